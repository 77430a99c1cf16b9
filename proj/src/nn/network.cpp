#include "hefir/nn/network.hpp"

#include "hefir/common/errors.hpp"

namespace hefir::nn {

std::string to_string(const Shape& s) {
  return std::to_string(s.height) + "x" + std::to_string(s.width) + "x" + std::to_string(s.channels);
}

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::Conv: return "conv";
    case LayerKind::Square: return "square";
    case LayerKind::AvgPool: return "avgpool";
    case LayerKind::FullyConnected: return "fc";
  }
  return "unknown";
}

LayerKind layer_kind_from_string(const std::string& s) {
  if (s == "conv") return LayerKind::Conv;
  if (s == "square") return LayerKind::Square;
  if (s == "avgpool") return LayerKind::AvgPool;
  if (s == "fc") return LayerKind::FullyConnected;
  throw ShapeError("unknown layer kind '" + s + "'");
}

std::size_t LayerSpec::weights_per_output(const Shape& in) const {
  switch (kind) {
    case LayerKind::Conv: return kernel_h * kernel_w * (in.channels / groups);
    case LayerKind::FullyConnected: return in.size();
    default: return 0;
  }
}

std::size_t LayerSpec::weight_count(const Shape& in) const {
  switch (kind) {
    case LayerKind::Conv: return filters * weights_per_output(in);
    case LayerKind::FullyConnected: return outputs * in.size();
    default: return 0;
  }
}

namespace {

std::size_t conv_out(std::size_t in, std::size_t k, std::size_t s, bool pad) {
  if (pad) return (in + s - 1) / s;
  if (in < k) return 0;
  return (in - k) / s + 1;
}

std::size_t pad_before(std::size_t in, std::size_t k, std::size_t s, bool pad) {
  if (!pad) return 0;
  const std::size_t out = (in + s - 1) / s;
  const std::size_t needed = (out - 1) * s + k;
  const std::size_t total = needed > in ? needed - in : 0;
  return total / 2;
}

}  // namespace

std::size_t LayerSpec::pad_top(const Shape& in) const {
  return kind == LayerKind::Conv ? pad_before(in.height, kernel_h, stride_h, padding) : 0;
}

std::size_t LayerSpec::pad_left(const Shape& in) const {
  return kind == LayerKind::Conv ? pad_before(in.width, kernel_w, stride_w, padding) : 0;
}

Shape LayerSpec::output_shape(const Shape& in) const {
  switch (kind) {
    case LayerKind::Conv: {
      if (filters == 0 || kernel_h == 0 || kernel_w == 0 || stride_h == 0 || stride_w == 0 || groups == 0) {
        throw ShapeError("layer '" + name + "': conv dimensions must be positive");
      }
      if (in.channels % groups != 0 || filters % groups != 0) {
        throw ShapeError("layer '" + name + "': groups must divide input channels and filters");
      }
      Shape out{conv_out(in.height, kernel_h, stride_h, padding), conv_out(in.width, kernel_w, stride_w, padding),
                filters};
      if (out.height == 0 || out.width == 0) {
        throw ShapeError("layer '" + name + "': kernel larger than input " + to_string(in));
      }
      return out;
    }
    case LayerKind::Square: return in;
    case LayerKind::AvgPool: {
      if (extent == 0 || pool_stride == 0) throw ShapeError("layer '" + name + "': pool dimensions must be positive");
      if (in.height < extent || in.width < extent || (in.height - extent) % pool_stride != 0 ||
          (in.width - extent) % pool_stride != 0) {
        throw ShapeError("layer '" + name + "': pool window does not tile " + to_string(in));
      }
      return {(in.height - extent) / pool_stride + 1, (in.width - extent) / pool_stride + 1, in.channels};
    }
    case LayerKind::FullyConnected:
      if (outputs == 0) throw ShapeError("layer '" + name + "': fc needs outputs");
      return {1, 1, outputs};
  }
  throw ShapeError("unknown layer kind");
}

std::vector<Shape> NetworkSpec::shapes() const {
  std::vector<Shape> out{input};
  for (const auto& layer : layers) out.push_back(layer.output_shape(out.back()));
  return out;
}

int NetworkSpec::multiplicative_depth() const {
  int depth = 0;
  for (const auto& l : layers) depth += l.kind == LayerKind::Square ? 1 : 0;
  return depth;
}

namespace {

LayerSpec conv(std::string name, std::size_t filters, std::size_t k, std::size_t stride, bool pad, int64_t scale,
               std::size_t groups = 1) {
  LayerSpec l;
  l.kind = LayerKind::Conv;
  l.name = std::move(name);
  l.filters = filters;
  l.kernel_h = l.kernel_w = k;
  l.stride_h = l.stride_w = stride;
  l.padding = pad;
  l.groups = groups;
  l.weight_scale = scale;
  return l;
}

LayerSpec square(std::string name) {
  LayerSpec l;
  l.kind = LayerKind::Square;
  l.name = std::move(name);
  return l;
}

LayerSpec pool(std::string name, std::size_t extent, std::size_t stride) {
  LayerSpec l;
  l.kind = LayerKind::AvgPool;
  l.name = std::move(name);
  l.extent = extent;
  l.pool_stride = stride;
  return l;
}

LayerSpec fc(std::string name, std::size_t outputs, int64_t scale) {
  LayerSpec l;
  l.kind = LayerKind::FullyConnected;
  l.name = std::move(name);
  l.outputs = outputs;
  l.weight_scale = scale;
  return l;
}

}  // namespace

NetworkSpec NetworkSpec::mnist() {
  NetworkSpec s;
  s.name = "mnist";
  s.input = {28, 28, 1};
  s.input_scale = 4;
  // the second conv applies 10 depth-1 filters to each of the 5 input maps
  s.layers = {conv("conv1", 5, 5, 2, false, 15), square("square1"), conv("conv2", 50, 5, 2, false, 15, 5),
              square("square2"), fc("fc1", 10, 15)};
  return s;
}

NetworkSpec NetworkSpec::cifar10() {
  NetworkSpec s;
  s.name = "cifar10";
  s.input = {32, 32, 3};
  s.input_scale = 255;
  s.layers = {conv("conv1", 32, 3, 1, true, 10000), square("square1"), pool("pool1", 2, 2),
              conv("conv2", 64, 3, 1, true, 4095),  square("square2"), pool("pool2", 2, 2),
              conv("conv3", 128, 3, 1, true, 10000), square("square3"), pool("pool3", 2, 2),
              fc("fc1", 256, 1023),                 fc("fc2", 10, 63)};
  const uint64_t nonzero[] = {576, 10133, 51696, 457398, 2518};
  std::size_t k = 0;
  for (auto& l : s.layers) {
    if (l.has_weights()) l.reference_nonzero_weights = nonzero[k++];
  }
  return s;
}

NetworkSpec NetworkSpec::toy() {
  NetworkSpec s;
  s.name = "toy";
  s.input = {8, 8, 1};
  s.input_scale = 4;
  s.layers = {conv("conv1", 2, 3, 2, false, 15), square("square1"), fc("fc1", 3, 15)};
  return s;
}

std::optional<NetworkSpec> NetworkSpec::by_name(const std::string& name) {
  if (name == "mnist") return mnist();
  if (name == "cifar10") return cifar10();
  if (name == "toy") return toy();
  return std::nullopt;
}

OpCount count_ops(const NetworkSpec& spec) {
  OpCount total;
  const auto shapes = spec.shapes();
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& l = spec.layers[i];
    const Shape& in = shapes[i];
    const Shape& out = shapes[i + 1];
    LayerOps ops{l.name};
    switch (l.kind) {
      case LayerKind::Conv: {
        const uint64_t weights = l.reference_nonzero_weights.value_or(l.weight_count(in));
        ops.mult_plain = out.height * out.width * weights;
        break;
      }
      case LayerKind::FullyConnected:
        ops.mult_plain = l.reference_nonzero_weights.value_or(l.weight_count(in));
        break;
      case LayerKind::Square:
        ops.square = out.size();
        break;
      case LayerKind::AvgPool:
        ops.add = out.size() * (l.extent * l.extent - 1);
        break;
    }
    total.mult_plain += ops.mult_plain;
    total.square += ops.square;
    total.layers.push_back(ops);
  }
  return total;
}

}  // namespace hefir::nn
