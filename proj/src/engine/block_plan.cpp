#include "hefir/engine/block_plan.hpp"

#include <string>

#include "hefir/common/errors.hpp"

namespace hefir::engine {

BlockPlan plan_blocks(std::size_t i_w, std::size_t i_h, std::size_t f_w, std::size_t f_h, std::size_t s_w,
                      std::size_t s_h, std::size_t capacity) {
  if (i_w == 0 || i_h == 0 || f_w == 0 || f_h == 0 || s_w == 0 || s_h == 0) {
    throw ParameterError("block planner dimensions must be positive");
  }
  if (f_w > i_w || f_h > i_h) throw ParameterError("filter larger than the feature map");
  if (capacity < f_w * f_h) {
    throw CapacityError("block capacity " + std::to_string(capacity) + " is below one filter window (" +
                        std::to_string(f_w * f_h) + ")");
  }
  auto span = [](std::size_t count, std::size_t f, std::size_t s) { return (count - 1) * s + f; };
  BlockPlan plan;
  plan.capacity = capacity;
  plan.out_h = (i_h - f_h) / s_h + 1;
  plan.out_w = (i_w - f_w) / s_w + 1;

  const std::size_t full_width = span(plan.out_w, f_w, s_w);
  // columns per chunk when one band of full width does not fit
  std::size_t cols = plan.out_w;
  while (cols > 1 && f_h * span(cols, f_w, s_w) > capacity) --cols;

  std::size_t j = 0;
  while (j < plan.out_h) {
    if (cols == plan.out_w) {
      std::size_t rows = 1;
      while (j + rows < plan.out_h && span(rows + 1, f_h, s_h) * full_width <= capacity) ++rows;
      Block b;
      b.row_begin = j;
      b.row_end = j + rows;
      b.col_begin = 0;
      b.col_end = plan.out_w;
      b.resident = span(rows, f_h, s_h) * span(plan.out_w, f_w, s_w);
      plan.blocks.push_back(std::move(b));
      j += rows;
    } else {
      for (std::size_t k = 0; k < plan.out_w; k += cols) {
        Block b;
        b.row_begin = j;
        b.row_end = j + 1;
        b.col_begin = k;
        b.col_end = std::min(plan.out_w, k + cols);
        b.resident = f_h * span(b.col_end - b.col_begin, f_w, s_w);
        plan.blocks.push_back(std::move(b));
      }
      ++j;
    }
  }
  for (auto& b : plan.blocks) {
    b.start_index = b.row_begin * s_h * i_w + b.col_begin * s_w;
    for (std::size_t r = b.row_begin; r < b.row_end; ++r) {
      for (std::size_t c = b.col_begin; c < b.col_end; ++c) b.placements.push_back(r * s_h * i_w + c * s_w);
    }
  }
  return plan;
}

}  // namespace hefir::engine
