#include "blockcam/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

#include "blockcam/error.hpp"
#include "blockcam/linalg.hpp"
#include "byte_io.hpp"

namespace blockcam {

Image::Image(std::size_t width, std::size_t height, double fill)
    : width_(width), height_(height), pixels_(width * height, fill) {}

Image::Image(std::size_t width, std::size_t height, std::vector<double> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
  require(pixels_.size() == width * height, ErrorKind::dimension,
          "image buffer holds " + std::to_string(pixels_.size()) + " values, expected " +
              std::to_string(width * height));
}

Image Image::clamped() const {
  Image out = *this;
  for (auto& v : out.pixels_) v = std::clamp(v, 0.0, 1.0);
  return out;
}

void BlockGrid::validate() const {
  require(block_side >= 1, ErrorKind::dimension, "block side must be positive");
  require(overlap < block_side, ErrorKind::dimension, "overlap must be smaller than the block side");
  require(rows >= 1 && cols >= 1, ErrorKind::dimension, "grid must contain at least one block");
}

BlockGrid BlockGrid::for_image(std::size_t width, std::size_t height, std::size_t block_side, std::size_t overlap) {
  BlockGrid g{block_side, 1, 1, overlap};
  require(block_side >= 1 && overlap < block_side, ErrorKind::dimension,
          "invalid block side/overlap (" + std::to_string(block_side) + "/" + std::to_string(overlap) + ")");
  const std::size_t stride = block_side - overlap;
  auto count = [&](std::size_t extent, const char* axis) {
    if (extent < block_side || (extent - block_side) % stride != 0)
      fail(ErrorKind::dimension, std::string("image ") + axis + " " + std::to_string(extent) +
                                     " is not tiled by blocks of " + std::to_string(block_side) +
                                     " with overlap " + std::to_string(overlap));
    return (extent - block_side) / stride + 1;
  };
  g.cols = count(width, "width");
  g.rows = count(height, "height");
  return g;
}

namespace {

void check_tiles(const Image& image, const BlockGrid& grid) {
  grid.validate();
  if (grid.image_width() != image.width() || grid.image_height() != image.height())
    fail(ErrorKind::dimension, "grid covers " + std::to_string(grid.image_width()) + "x" +
                                   std::to_string(grid.image_height()) + " but image is " +
                                   std::to_string(image.width()) + "x" + std::to_string(image.height()));
}

// Unnormalized weight along one axis at offset i inside a block.
double ramp(std::size_t i, std::size_t side, std::size_t overlap, bool lead, bool trail) {
  if (overlap == 0) return 1.0;
  double w = 1.0;
  const double ov = static_cast<double>(overlap);
  if (lead) w *= std::min(1.0, (static_cast<double>(i) + 0.5) / ov);
  if (trail) w *= std::min(1.0, (static_cast<double>(side - i) - 0.5) / ov);
  return w;
}

double raw_weight(const BlockGrid& g, std::size_t br, std::size_t bc, std::size_t i, std::size_t j) {
  return ramp(i, g.block_side, g.overlap, br > 0, br + 1 < g.rows) *
         ramp(j, g.block_side, g.overlap, bc > 0, bc + 1 < g.cols);
}

std::vector<double> weight_totals(const BlockGrid& g) {
  const std::size_t w = g.image_width();
  std::vector<double> total(w * g.image_height(), 0.0);
  const std::size_t b = g.block_side, s = g.stride();
  for (std::size_t br = 0; br < g.rows; ++br)
    for (std::size_t bc = 0; bc < g.cols; ++bc)
      for (std::size_t i = 0; i < b; ++i)
        for (std::size_t j = 0; j < b; ++j) total[(br * s + i) * w + bc * s + j] += raw_weight(g, br, bc, i, j);
  return total;
}

}  // namespace

BlockMatrix extract_blocks(const Image& image, const BlockGrid& grid) {
  check_tiles(image, grid);
  const std::size_t b = grid.block_side, s = grid.stride();
  BlockMatrix out(static_cast<Eigen::Index>(grid.block_dim()), static_cast<Eigen::Index>(grid.block_count()));
  for (std::size_t br = 0; br < grid.rows; ++br)
    for (std::size_t bc = 0; bc < grid.cols; ++bc) {
      double* col = out.col(static_cast<Eigen::Index>(br * grid.cols + bc)).data();
      for (std::size_t i = 0; i < b; ++i)
        for (std::size_t j = 0; j < b; ++j) col[i * b + j] = image(br * s + i, bc * s + j);
    }
  return out;
}

Image stitch_blocks(const BlockMatrix& blocks, const BlockGrid& grid) {
  grid.validate();
  if (static_cast<std::size_t>(blocks.rows()) != grid.block_dim() ||
      static_cast<std::size_t>(blocks.cols()) != grid.block_count())
    fail(ErrorKind::dimension, "block matrix is " + std::to_string(blocks.rows()) + "x" +
                                   std::to_string(blocks.cols()) + ", grid expects " +
                                   std::to_string(grid.block_dim()) + "x" + std::to_string(grid.block_count()));
  const std::size_t b = grid.block_side, s = grid.stride(), w = grid.image_width();
  Image out(w, grid.image_height());

  if (grid.overlap == 0) {
    for (std::size_t br = 0; br < grid.rows; ++br)
      for (std::size_t bc = 0; bc < grid.cols; ++bc) {
        const double* col = blocks.col(static_cast<Eigen::Index>(br * grid.cols + bc)).data();
        for (std::size_t i = 0; i < b; ++i)
          for (std::size_t j = 0; j < b; ++j) out(br * s + i, bc * s + j) = col[i * b + j];
      }
    return out;
  }

  // Blend as ref + sum w (v - ref) / sum w, with ref taken from the first
  // covering block. Identical contributions therefore reproduce ref exactly.
  std::vector<char> has_ref(out.size(), 0);
  std::vector<double> num(out.size(), 0.0), den(out.size(), 0.0);
  for (std::size_t br = 0; br < grid.rows; ++br)
    for (std::size_t bc = 0; bc < grid.cols; ++bc) {
      const double* col = blocks.col(static_cast<Eigen::Index>(br * grid.cols + bc)).data();
      for (std::size_t i = 0; i < b; ++i)
        for (std::size_t j = 0; j < b; ++j) {
          const std::size_t idx = (br * s + i) * w + bc * s + j;
          const double v = col[i * b + j];
          if (!has_ref[idx]) {
            has_ref[idx] = 1;
            out(br * s + i, bc * s + j) = v;
          }
          const double wt = raw_weight(grid, br, bc, i, j);
          num[idx] += wt * (v - out(br * s + i, bc * s + j));
          den[idx] += wt;
        }
    }
  for (std::size_t r = 0; r < out.height(); ++r)
    for (std::size_t c = 0; c < w; ++c) out(r, c) += num[r * w + c] / den[r * w + c];
  return out;
}

Eigen::MatrixXd feather_weights(const BlockGrid& grid, std::size_t block_row, std::size_t block_col) {
  grid.validate();
  require(block_row < grid.rows && block_col < grid.cols, ErrorKind::dimension, "block position out of range");
  const auto total = weight_totals(grid);
  const std::size_t b = grid.block_side, s = grid.stride(), w = grid.image_width();
  Eigen::MatrixXd out(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(b));
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t j = 0; j < b; ++j)
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          raw_weight(grid, block_row, block_col, i, j) / total[(block_row * s + i) * w + block_col * s + j];
  return out;
}

Image feather_weight_sum(const BlockGrid& grid) {
  grid.validate();
  Image sum(grid.image_width(), grid.image_height());
  const std::size_t b = grid.block_side, s = grid.stride();
  for (std::size_t br = 0; br < grid.rows; ++br)
    for (std::size_t bc = 0; bc < grid.cols; ++bc) {
      const auto wts = feather_weights(grid, br, bc);
      for (std::size_t i = 0; i < b; ++i)
        for (std::size_t j = 0; j < b; ++j)
          sum(br * s + i, bc * s + j) += wts(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
  return sum;
}

BlockMatrix sample_patches(const Image& image, std::size_t block_side, std::size_t stride) {
  require(block_side >= 1 && stride >= 1, ErrorKind::dimension, "block side and stride must be positive");
  if (image.width() < block_side || image.height() < block_side) return BlockMatrix(block_side * block_side, 0);
  const std::size_t nr = (image.height() - block_side) / stride + 1;
  const std::size_t nc = (image.width() - block_side) / stride + 1;
  BlockMatrix out(static_cast<Eigen::Index>(block_side * block_side), static_cast<Eigen::Index>(nr * nc));
  for (std::size_t r = 0; r < nr; ++r)
    for (std::size_t c = 0; c < nc; ++c) {
      double* col = out.col(static_cast<Eigen::Index>(r * nc + c)).data();
      for (std::size_t i = 0; i < block_side; ++i)
        for (std::size_t j = 0; j < block_side; ++j) col[i * block_side + j] = image(r * stride + i, c * stride + j);
    }
  return out;
}

double psnr(const Image& reference, const Image& candidate, double peak) {
  if (reference.width() != candidate.width() || reference.height() != candidate.height())
    fail(ErrorKind::dimension, "PSNR of differently sized images");
  require(reference.size() > 0, ErrorKind::dimension, "PSNR of empty images");
  std::vector<double> sq(reference.size());
  for (std::size_t i = 0; i < sq.size(); ++i) {
    const double d = reference.pixels()[i] - candidate.pixels()[i];
    sq[i] = d * d;
  }
  const double mse = pairwise_sum(sq.data(), sq.size()) / static_cast<double>(sq.size());
  if (mse == 0.0) return kPsnrInfinite;
  return 10.0 * std::log10(peak * peak / mse);
}

namespace {

struct PgmCursor {
  std::string_view bytes;
  std::size_t pos = 0;
  std::string comment;
  bool has_comment = false;
  const std::string& origin;

  void skip_space_and_comments() {
    while (pos < bytes.size()) {
      const char c = bytes[pos];
      if (c == '#') {
        const auto end = bytes.find('\n', pos);
        const auto text = bytes.substr(pos + 1, (end == std::string_view::npos ? bytes.size() : end) - pos - 1);
        if (!has_comment) {
          comment = std::string(text.starts_with(' ') ? text.substr(1) : text);
          has_comment = true;
        }
        pos = end == std::string_view::npos ? bytes.size() : end + 1;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos;
      } else {
        break;
      }
    }
  }

  std::size_t number() {
    skip_space_and_comments();
    std::size_t v = 0, digits = 0;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      v = v * 10 + static_cast<std::size_t>(bytes[pos++] - '0');
      if (++digits > 9) fail(ErrorKind::format, origin + ": PGM header value too large");
    }
    if (digits == 0) fail(ErrorKind::format, origin + ": malformed PGM header");
    return v;
  }
};

}  // namespace

Image decode_pgm(std::string_view bytes, const std::string& origin, std::string* comment) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5')
    fail(ErrorKind::format, origin + ": not a binary PGM (P5)");
  PgmCursor cur{bytes, 2, {}, false, origin};
  const std::size_t width = cur.number();
  const std::size_t height = cur.number();
  const std::size_t maxval = cur.number();
  if (maxval == 0 || maxval > 255) fail(ErrorKind::format, origin + ": only 8-bit PGM (maxval 1..255) is supported");
  if (cur.pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[cur.pos])))
    fail(ErrorKind::format, origin + ": malformed PGM header");
  ++cur.pos;
  if (bytes.size() - cur.pos < width * height) fail(ErrorKind::format, origin + ": PGM pixel data truncated");
  std::vector<double> px(width * height);
  const double scale = static_cast<double>(maxval);
  for (std::size_t i = 0; i < px.size(); ++i)
    px[i] = static_cast<double>(static_cast<unsigned char>(bytes[cur.pos + i])) / scale;
  if (comment) *comment = cur.comment;
  return Image(width, height, std::move(px));
}

Image read_pgm(const std::filesystem::path& path, std::string* comment) {
  return decode_pgm(detail::read_file(path), path.string(), comment);
}

std::string encode_pgm(const Image& image, std::string_view comment) {
  require(comment.find('\n') == std::string_view::npos, ErrorKind::usage, "PGM comment must be a single line");
  std::string out = "P5\n";
  if (!comment.empty()) {
    out += "# ";
    out += comment;
    out += '\n';
  }
  out += std::to_string(image.width()) + " " + std::to_string(image.height()) + "\n255\n";
  out.reserve(out.size() + image.size());
  for (double v : image.pixels()) {
    const double c = std::isnan(v) ? 0.0 : std::clamp(v, 0.0, 1.0);
    out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(c * 255.0))));
  }
  return out;
}

void write_pgm(const Image& image, const std::filesystem::path& path, std::string_view comment) {
  detail::write_file(path, encode_pgm(image, comment));
}

}  // namespace blockcam
