#pragma once

#include <cstddef>
#include <vector>

namespace hefir::engine {

struct Block {
  std::size_t row_begin = 0, row_end = 0;  // output rows [begin, end)
  std::size_t col_begin = 0, col_end = 0;  // output columns [begin, end)
  std::size_t start_index = 0;             // flat input index of the block's first placement
  std::vector<std::size_t> placements;     // flat input index of each filter placement, row-major
  std::size_t resident = 0;                // input positions the block touches
};

struct BlockPlan {
  std::size_t capacity = 0;  // max resident input positions per block
  std::size_t out_h = 0, out_w = 0;
  std::vector<Block> blocks;
};

// Filter placement (j, k) starts at j*s_h*i_w + k*s_w; a band of output rows starting
// at row j starts at j*s_h*i_w. Bands are split by columns when a full-width band
// exceeds the capacity.
BlockPlan plan_blocks(std::size_t i_w, std::size_t i_h, std::size_t f_w, std::size_t f_h, std::size_t s_w,
                      std::size_t s_h, std::size_t capacity);

}  // namespace hefir::engine
