#pragma once

#include <gmpxx.h>

#include <cstdint>
#include <vector>

#include "hefir/codec/codec.hpp"
#include "hefir/nn/model.hpp"
#include "hefir/nn/network.hpp"

namespace hefir::nn {

/// Exact integer feature map in (h, w, c) order with its fixed-point scale.
struct IntTensor {
  Shape shape;
  std::vector<mpz_class> values;
  mpz_class scale = 1;

  IntTensor() = default;
  IntTensor(Shape s, mpz_class sc = 1) : shape(s), values(s.size(), 0), scale(std::move(sc)) {}

  mpz_class& at(std::size_t y, std::size_t x, std::size_t c) { return values[shape.index(y, x, c)]; }
  const mpz_class& at(std::size_t y, std::size_t x, std::size_t c) const { return values[shape.index(y, x, c)]; }
  mpz_class max_abs() const;
};

IntTensor conv2d(const IntTensor& x, const LayerSpec& layer, const std::vector<int64_t>& weights,
                 const std::vector<int64_t>& bias = {});
IntTensor fully_connected(const IntTensor& x, const LayerSpec& layer, const std::vector<int64_t>& weights,
                          const std::vector<int64_t>& bias = {});
IntTensor square_layer(const IntTensor& x);
IntTensor avg_pool(const IntTensor& x, const LayerSpec& layer);
IntTensor apply_layer(const IntTensor& x, const ModelLayer& layer);

struct ForwardTrace {
  std::vector<mpz_class> layer_max;  // max |value| after each layer
};

IntTensor forward(const QuantizedModel& model, const IntTensor& image, ForwardTrace* trace = nullptr);
// Index of the largest logit; the lowest index wins ties.
std::size_t classify(const std::vector<mpz_class>& logits);
std::size_t classify(const IntTensor& logits);

// Pixel bytes to integers at the model's input scale: round(p * scale / 255).
IntTensor integerize_image(const std::vector<uint8_t>& pixels, const Shape& shape, int64_t scale);

// Worst-case interval propagation of the model's weights over inputs in [0, input_max].
codec::ScaleTracker track_model(const QuantizedModel& model, const mpz_class& plain_modulus,
                                const mpz_class& input_max);
// Same using only the spec, with |w| <= weight_scale and unknown signs.
codec::ScaleTracker track_spec(const NetworkSpec& spec, const mpz_class& plain_modulus, const mpz_class& input_max);

// Primitive calls the engine issues for this model: nonzero in-bounds taps and squares.
OpCount count_ops(const QuantizedModel& model);

}  // namespace hefir::nn
