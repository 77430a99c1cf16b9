#include "hefir/nn/idx.hpp"

#include <fstream>
#include <iterator>

#include "hefir/common/errors.hpp"

namespace hefir::nn {

namespace {

std::vector<uint8_t> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string(), 0);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

uint32_t be32(const std::vector<uint8_t>& b, std::size_t off) {
  if (off + 4 > b.size()) throw FormatError("IDX header truncated", off);
  return (uint32_t{b[off]} << 24) | (uint32_t{b[off + 1]} << 16) | (uint32_t{b[off + 2]} << 8) | b[off + 3];
}

}  // namespace

IdxImages read_idx_images(const std::filesystem::path& path, std::size_t limit) {
  const auto bytes = slurp(path);
  if (be32(bytes, 0) != 0x00000803) throw FormatError("not an IDX image file: " + path.string(), 0);
  const std::size_t count = be32(bytes, 4);
  IdxImages out;
  out.rows = be32(bytes, 8);
  out.cols = be32(bytes, 12);
  const std::size_t px = out.rows * out.cols;
  const std::size_t take = std::min(count, limit);
  for (std::size_t i = 0; i < take; ++i) {
    const std::size_t off = 16 + i * px;
    if (off + px > bytes.size()) throw FormatError("IDX image data truncated", bytes.size());
    out.images.emplace_back(bytes.begin() + static_cast<std::ptrdiff_t>(off),
                            bytes.begin() + static_cast<std::ptrdiff_t>(off + px));
  }
  return out;
}

std::vector<uint8_t> read_idx_labels(const std::filesystem::path& path, std::size_t limit) {
  const auto bytes = slurp(path);
  if (be32(bytes, 0) != 0x00000801) throw FormatError("not an IDX label file: " + path.string(), 0);
  const std::size_t count = be32(bytes, 4);
  const std::size_t take = std::min(count, limit);
  if (8 + take > bytes.size()) throw FormatError("IDX label data truncated", bytes.size());
  return {bytes.begin() + 8, bytes.begin() + 8 + static_cast<std::ptrdiff_t>(take)};
}

}  // namespace hefir::nn
