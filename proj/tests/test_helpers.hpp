#pragma once

#include <filesystem>
#include <string>

#include "blockcam/error.hpp"
#include "doctest.h"

namespace testutil {

template <typename Fn>
blockcam::ErrorKind kind_of(Fn&& fn) {
  try {
    fn();
  } catch (const blockcam::Error& e) {
    return e.kind();
  }
  FAIL("expected a blockcam::Error");
  return blockcam::ErrorKind::usage;
}

/// Fresh scratch directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& name);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
};

inline TempDir::TempDir(const std::string& name)
    : path_(std::filesystem::temp_directory_path() / ("blockcam-test-" + name)) {
  std::filesystem::remove_all(path_);
  std::filesystem::create_directories(path_);
}

inline TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

}  // namespace testutil
