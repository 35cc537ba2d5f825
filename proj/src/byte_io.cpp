#include "byte_io.hpp"

#include <fstream>
#include <sstream>

#include <zlib.h>

namespace blockcam::detail {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) fail(ErrorKind::io, "read failed: " + path.string());
  return std::move(ss).str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::io, "cannot create " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::io, "write failed: " + path.string());
}

Eigen::MatrixXd take_matrix(std::string_view payload, std::size_t& offset, Eigen::Index rows, Eigen::Index cols,
                            const std::string& origin) {
  const auto count = static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
  if (payload.size() < offset || (payload.size() - offset) / 8 < count)
    fail(ErrorKind::format, origin + ": payload truncated");
  Eigen::MatrixXd m(rows, cols);
  const char* p = payload.data() + offset;
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r, p += 8) m(r, c) = load_f64(p);
  offset += count * 8;
  return m;
}

HeaderedFile split_headered(std::string_view bytes, std::string_view format, int version,
                            const std::string& origin) {
  const auto nl = bytes.find('\n');
  if (nl == std::string_view::npos) fail(ErrorKind::format, origin + ": missing header line");
  HeaderedFile file;
  try {
    file.header = nlohmann::ordered_json::parse(bytes.substr(0, nl));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::format, origin + ": malformed header: " + e.what());
  }
  if (!file.header.is_object() || file.header.value("format", "") != format)
    fail(ErrorKind::format, origin + ": not a " + std::string(format) + " file");
  if (!file.header.contains("version") || !file.header["version"].is_number_integer() ||
      file.header["version"].get<int>() != version)
    fail(ErrorKind::format, origin + ": unsupported version (expected " + std::to_string(version) + ")");
  file.payload = bytes.substr(nl + 1);
  return file;
}

std::uint32_t crc32(std::string_view bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks.
  const char* p = bytes.data();
  std::size_t left = bytes.size();
  while (left > 0) {
    const auto n = static_cast<uInt>(std::min<std::size_t>(left, 1U << 30));
    crc = ::crc32(crc, reinterpret_cast<const Bytef*>(p), n);
    p += n;
    left -= n;
  }
  return static_cast<std::uint32_t>(crc);
}

}  // namespace blockcam::detail
