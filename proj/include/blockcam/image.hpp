#pragma once

#include <cstddef>
#include <filesystem>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace blockcam {

/// Grayscale raster, row-major, intensities nominally in [0, 1].
///
/// Reconstructions may leave [0, 1] before they are saved; clamping happens
/// in write_pgm (or explicitly through clamped()).
class Image {
 public:
  Image() = default;
  Image(std::size_t width, std::size_t height, double fill = 0.0);
  Image(std::size_t width, std::size_t height, std::vector<double> pixels);

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t size() const noexcept { return pixels_.size(); }

  double operator()(std::size_t row, std::size_t col) const { return pixels_[row * width_ + col]; }
  double& operator()(std::size_t row, std::size_t col) { return pixels_[row * width_ + col]; }

  const std::vector<double>& pixels() const noexcept { return pixels_; }

  Image clamped() const;

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<double> pixels_;
};

/// Tiling of an image into square blocks of side `block_side`.
///
/// With overlap 0 the blocks tile the image exactly. With overlap > 0
/// neighbouring blocks share `overlap` pixels, so the stride is
/// block_side - overlap.
struct BlockGrid {
  std::size_t block_side = 8;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t overlap = 0;

  std::size_t block_dim() const noexcept { return block_side * block_side; }
  std::size_t block_count() const noexcept { return rows * cols; }
  std::size_t stride() const noexcept { return block_side - overlap; }
  std::size_t image_width() const noexcept { return cols == 0 ? 0 : (cols - 1) * stride() + block_side; }
  std::size_t image_height() const noexcept { return rows == 0 ? 0 : (rows - 1) * stride() + block_side; }

  /// Grid covering a width x height image exactly; throws a dimension error otherwise.
  static BlockGrid for_image(std::size_t width, std::size_t height, std::size_t block_side,
                             std::size_t overlap = 0);

  void validate() const;

  friend bool operator==(const BlockGrid&, const BlockGrid&) = default;
};

/// P x N_p matrix; column i is block i (blocks row-major, pixels row-major within a block).
using BlockMatrix = Eigen::MatrixXd;

BlockMatrix extract_blocks(const Image& image, const BlockGrid& grid);

/// Inverse of extract_blocks. Overlapping pixels are feather-blended.
Image stitch_blocks(const BlockMatrix& blocks, const BlockGrid& grid);

/// Normalized per-pixel blending weights of one block position, block_side x block_side row-major.
/// Weight ramps linearly (sampled at pixel centres) across `overlap` pixels on
/// every side that has a neighbour; sides on the image border keep weight 1.
Eigen::MatrixXd feather_weights(const BlockGrid& grid, std::size_t block_row, std::size_t block_col);

/// Sum of normalized feather weights at every image pixel (all ones up to rounding).
Image feather_weight_sum(const BlockGrid& grid);

/// Every block_side x block_side window at the given stride, ignoring any remainder.
/// Used to harvest training patches.
BlockMatrix sample_patches(const Image& image, std::size_t block_side, std::size_t stride);

inline constexpr double kPsnrInfinite = std::numeric_limits<double>::infinity();

/// 10 log10(peak^2 / MSE); kPsnrInfinite when the images are identical.
double psnr(const Image& reference, const Image& candidate, double peak = 1.0);

/// Binary PGM (P5), maxval <= 255. Values are mapped v / maxval on load.
/// Header comments are allowed; the first one is returned through `comment`.
Image decode_pgm(std::string_view bytes, const std::string& origin, std::string* comment = nullptr);
Image read_pgm(const std::filesystem::path& path, std::string* comment = nullptr);

/// P5 with maxval 255 and values round(clamp(v) * 255). A non-empty
/// single-line `comment` is written as "# comment" after the magic.
std::string encode_pgm(const Image& image, std::string_view comment = {});
void write_pgm(const Image& image, const std::filesystem::path& path, std::string_view comment = {});

}  // namespace blockcam
