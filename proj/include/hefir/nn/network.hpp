#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace hefir::nn {

struct Shape {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;

  std::size_t size() const noexcept { return height * width * channels; }
  std::size_t index(std::size_t y, std::size_t x, std::size_t c) const noexcept {
    return (y * width + x) * channels + c;
  }
  bool operator==(const Shape&) const = default;
};

std::string to_string(const Shape& s);

enum class LayerKind { Conv, Square, AvgPool, FullyConnected };

std::string to_string(LayerKind kind);
LayerKind layer_kind_from_string(const std::string& s);

struct LayerSpec {
  LayerKind kind = LayerKind::Square;
  std::string name;

  // Conv
  std::size_t filters = 0;
  std::size_t kernel_h = 0, kernel_w = 0;
  std::size_t stride_h = 1, stride_w = 1;
  bool padding = false;  // zero "same" padding
  std::size_t groups = 1;

  // AvgPool (window sum)
  std::size_t extent = 0;
  std::size_t pool_stride = 0;

  // FullyConnected
  std::size_t outputs = 0;

  int64_t weight_scale = 1;  // Conv / FullyConnected
  // Nonzero weight count of a reference trained model; used by count_ops(spec) when set.
  std::optional<uint64_t> reference_nonzero_weights;

  bool has_weights() const noexcept { return kind == LayerKind::Conv || kind == LayerKind::FullyConnected; }
  // Weights per filter (Conv: kh*kw*depth) given the input shape.
  std::size_t weights_per_output(const Shape& in) const;
  std::size_t weight_count(const Shape& in) const;
  std::size_t pad_top(const Shape& in) const;
  std::size_t pad_left(const Shape& in) const;
  Shape output_shape(const Shape& in) const;
};

struct NetworkSpec {
  std::string name;
  Shape input;
  int64_t input_scale = 1;
  std::vector<LayerSpec> layers;

  // shapes[i] is the input of layer i; shapes.back() is the network output.
  std::vector<Shape> shapes() const;
  int multiplicative_depth() const;

  static NetworkSpec mnist();
  static NetworkSpec cifar10();
  // 8x8 input, conv 2@3x3 stride 2, square, fc 3.
  static NetworkSpec toy();
  static std::optional<NetworkSpec> by_name(const std::string& name);
};

struct LayerOps {
  std::string name;
  uint64_t mult_plain = 0;
  uint64_t square = 0;
  uint64_t add = 0;
};

struct OpCount {
  std::vector<LayerOps> layers;
  uint64_t mult_plain = 0;
  uint64_t square = 0;
};

// Audit formula: Conv = output positions x weights (or reference nonzero weights),
// FC = inputs x outputs, Square = one per value.
OpCount count_ops(const NetworkSpec& spec);

}  // namespace hefir::nn
