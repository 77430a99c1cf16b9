#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace hefir::nn {

struct IdxImages {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::vector<uint8_t>> images;  // row-major bytes
};

// Big-endian IDX files: images carry magic 0x00000803, labels 0x00000801.
IdxImages read_idx_images(const std::filesystem::path& path, std::size_t limit = SIZE_MAX);
std::vector<uint8_t> read_idx_labels(const std::filesystem::path& path, std::size_t limit = SIZE_MAX);

}  // namespace hefir::nn
