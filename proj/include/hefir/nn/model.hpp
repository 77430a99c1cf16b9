#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hefir/nn/network.hpp"
#include "hefir/ring/sampling.hpp"

namespace hefir::nn {

/// k-bit uniform quantizer level: value = numerator / (2^k - 1).
struct QuantizedWeight {
  int64_t numerator = 0;
  int64_t levels = 1;  // 2^k - 1

  double value() const noexcept { return static_cast<double>(numerator) / static_cast<double>(levels); }
};

// Clamps w to [-1, 1] and rounds w * (2^k - 1) half away from zero.
QuantizedWeight quantize_weight(double w, int bits);
// round(w_q * scale), half away from zero, computed exactly.
int64_t integerize(const QuantizedWeight& wq, int64_t scale);

struct ModelLayer {
  LayerSpec spec;
  // Conv: [filter][ky][kx][depth]; FC: [output][input], inputs in (h, w, c) order.
  std::vector<int64_t> weights;
  std::vector<int64_t> bias;  // empty or one per output channel, at the layer's output scale
};

struct QuantizedModel {
  std::string architecture;
  int bit_width = 0;
  Shape input;
  int64_t input_scale = 1;
  std::vector<ModelLayer> layers;

  NetworkSpec spec() const;
  // Checks weight counts, weight ranges and, for known architectures, the layer list.
  void validate() const;
  uint64_t nonzero_weights() const;
};

QuantizedModel load_model(const std::filesystem::path& path);
QuantizedModel parse_model(const std::string& json_text);
std::string serialize_model(const QuantizedModel& model);
void save_model(const QuantizedModel& model, const std::filesystem::path& path);

// Random model on the k-bit grid: weights are integerize(j / (2^k - 1), scale) with
// each weight zero with probability `zero_fraction`.
QuantizedModel random_model(const NetworkSpec& spec, int bits, ring::Prng& prng, double zero_fraction = 0.3);

}  // namespace hefir::nn
