#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace blockcam {

/// Seeded random source with a platform-independent output sequence.
///
/// The engine is std::mt19937_64, whose raw output is fixed by the C++
/// standard. The standard library's distributions are implementation
/// defined, so every derived variate (uniform, Bernoulli, Gaussian, bounded
/// integer) is computed here from raw 64-bit words.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, bound) by rejection; bound > 0.
  std::uint64_t below(std::uint64_t bound);

  /// Standard normal via the Box-Muller transform (the second variate is cached).
  double normal();

  template <typename T>
  void shuffle(std::span<T> values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(values[i - 1], values[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

std::uint64_t splitmix64(std::uint64_t x);

/// Independent stream seed for (seed, stream tag, index).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index = 0);

/// Stream tags keep matrix, noise and training draws apart when they share a seed.
namespace stream {
inline constexpr std::uint64_t matrix = 0x6d61747269780000ULL;
inline constexpr std::uint64_t noise = 0x6e6f697365000000ULL;
inline constexpr std::uint64_t training = 0x747261696e000000ULL;
}  // namespace stream

/// Fisher-Yates permutation of 0..n-1.
std::vector<std::size_t> random_permutation(std::size_t n, Rng& rng);

}  // namespace blockcam
