#include "hefir/nn/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "hefir/common/errors.hpp"

namespace hefir::nn {

using nlohmann::json;

QuantizedWeight quantize_weight(double w, int bits) {
  if (bits < 1 || bits > 31) throw ParameterError("bit width must be in [1, 31]");
  const int64_t levels = (int64_t{1} << bits) - 1;
  const double clamped = std::clamp(w, -1.0, 1.0);
  return {std::llround(clamped * static_cast<double>(levels)), levels};
}

int64_t integerize(const QuantizedWeight& wq, int64_t scale) {
  const __int128 num = static_cast<__int128>(wq.numerator) * scale;
  const __int128 den = wq.levels;
  const __int128 mag = num < 0 ? -num : num;
  const __int128 q = (2 * mag + den) / (2 * den);
  return static_cast<int64_t>(num < 0 ? -q : q);
}

NetworkSpec QuantizedModel::spec() const {
  NetworkSpec s;
  s.name = architecture;
  s.input = input;
  s.input_scale = input_scale;
  for (const auto& l : layers) s.layers.push_back(l.spec);
  return s;
}

uint64_t QuantizedModel::nonzero_weights() const {
  uint64_t n = 0;
  for (const auto& l : layers) n += std::count_if(l.weights.begin(), l.weights.end(), [](int64_t w) { return w != 0; });
  return n;
}

void QuantizedModel::validate() const {
  if (input.size() == 0) throw ShapeError("model input shape is empty");
  if (input_scale < 1) throw ShapeError("model input scale must be positive");
  const auto shapes = spec().shapes();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    const std::size_t expected = l.spec.weight_count(shapes[i]);
    if (l.weights.size() != expected) {
      throw ShapeError("layer '" + l.spec.name + "' has " + std::to_string(l.weights.size()) + " weights, expected " +
                       std::to_string(expected));
    }
    if (l.spec.has_weights()) {
      if (l.spec.weight_scale < 1) throw ShapeError("layer '" + l.spec.name + "' needs a positive weight scale");
      for (int64_t w : l.weights) {
        if (w > l.spec.weight_scale || w < -l.spec.weight_scale) {
          throw ShapeError("layer '" + l.spec.name + "' weight " + std::to_string(w) + " exceeds its scale");
        }
      }
      if (!l.bias.empty() && l.bias.size() != shapes[i + 1].channels) {
        throw ShapeError("layer '" + l.spec.name + "' bias length differs from its output channels");
      }
    } else if (!l.bias.empty()) {
      throw ShapeError("layer '" + l.spec.name + "' cannot carry a bias");
    }
  }
  if (auto known = NetworkSpec::by_name(architecture)) {
    if (known->input != input || known->layers.size() != layers.size()) {
      throw ShapeError("model does not match the " + architecture + " architecture");
    }
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const auto& a = known->layers[i];
      const auto& b = layers[i].spec;
      const bool same = a.kind == b.kind && a.filters == b.filters && a.kernel_h == b.kernel_h &&
                        a.kernel_w == b.kernel_w && a.stride_h == b.stride_h && a.stride_w == b.stride_w &&
                        a.padding == b.padding && a.groups == b.groups && a.extent == b.extent &&
                        a.pool_stride == b.pool_stride && a.outputs == b.outputs;
      if (!same) throw ShapeError("layer " + std::to_string(i + 1) + " does not match the " + architecture + " architecture");
    }
  }
}

namespace {

std::string default_name(LayerKind kind, std::size_t ordinal) {
  return to_string(kind) + std::to_string(ordinal);
}

}  // namespace

QuantizedModel parse_model(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("model file is not valid JSON: ") + e.what(), e.byte);
  }
  try {
    if (doc.value("format", "") != "hefir-model") throw FormatError("not a hefir model file", 0);
    if (doc.value("version", 0) != 1) throw FormatError("unsupported model file version", 0);
    QuantizedModel m;
    m.architecture = doc.at("architecture").get<std::string>();
    m.bit_width = doc.at("bit_width").get<int>();
    const auto& in = doc.at("input");
    m.input = {in.at("height").get<std::size_t>(), in.at("width").get<std::size_t>(), in.at("channels").get<std::size_t>()};
    m.input_scale = in.at("scale").get<int64_t>();
    std::size_t counts[4] = {0, 0, 0, 0};
    for (const auto& jl : doc.at("layers")) {
      ModelLayer l;
      l.spec.kind = layer_kind_from_string(jl.at("kind").get<std::string>());
      l.spec.name = jl.value("name", default_name(l.spec.kind, ++counts[static_cast<int>(l.spec.kind)]));
      switch (l.spec.kind) {
        case LayerKind::Conv:
          l.spec.filters = jl.at("filters").get<std::size_t>();
          l.spec.kernel_h = jl.at("kernel").at(0).get<std::size_t>();
          l.spec.kernel_w = jl.at("kernel").at(1).get<std::size_t>();
          l.spec.stride_h = jl.at("stride").at(0).get<std::size_t>();
          l.spec.stride_w = jl.at("stride").at(1).get<std::size_t>();
          l.spec.padding = jl.value("padding", false);
          l.spec.groups = jl.value("groups", std::size_t{1});
          break;
        case LayerKind::AvgPool:
          l.spec.extent = jl.at("extent").get<std::size_t>();
          l.spec.pool_stride = jl.value("stride", l.spec.extent);
          break;
        case LayerKind::FullyConnected:
          l.spec.outputs = jl.at("outputs").get<std::size_t>();
          break;
        case LayerKind::Square:
          break;
      }
      if (l.spec.has_weights()) {
        l.spec.weight_scale = jl.at("weight_scale").get<int64_t>();
        l.weights = jl.at("weights").get<std::vector<int64_t>>();
        if (jl.contains("bias")) l.bias = jl.at("bias").get<std::vector<int64_t>>();
      }
      m.layers.push_back(std::move(l));
    }
    m.validate();
    return m;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed model file: ") + e.what(), 0);
  }
}

QuantizedModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open model file " + path.string(), 0);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_model(ss.str());
}

std::string serialize_model(const QuantizedModel& m) {
  json doc;
  doc["format"] = "hefir-model";
  doc["version"] = 1;
  doc["architecture"] = m.architecture;
  doc["bit_width"] = m.bit_width;
  doc["input"] = {{"height", m.input.height}, {"width", m.input.width}, {"channels", m.input.channels},
                  {"scale", m.input_scale}};
  json layers = json::array();
  for (const auto& l : m.layers) {
    json jl;
    jl["kind"] = to_string(l.spec.kind);
    jl["name"] = l.spec.name;
    switch (l.spec.kind) {
      case LayerKind::Conv:
        jl["filters"] = l.spec.filters;
        jl["kernel"] = {l.spec.kernel_h, l.spec.kernel_w};
        jl["stride"] = {l.spec.stride_h, l.spec.stride_w};
        jl["padding"] = l.spec.padding;
        jl["groups"] = l.spec.groups;
        break;
      case LayerKind::AvgPool:
        jl["extent"] = l.spec.extent;
        jl["stride"] = l.spec.pool_stride;
        break;
      case LayerKind::FullyConnected:
        jl["outputs"] = l.spec.outputs;
        break;
      case LayerKind::Square:
        break;
    }
    if (l.spec.has_weights()) {
      jl["weight_scale"] = l.spec.weight_scale;
      jl["weights"] = l.weights;
      if (!l.bias.empty()) jl["bias"] = l.bias;
    }
    layers.push_back(std::move(jl));
  }
  doc["layers"] = std::move(layers);
  return doc.dump();
}

void save_model(const QuantizedModel& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write model file " + path.string(), 0);
  out << serialize_model(m);
}

QuantizedModel random_model(const NetworkSpec& spec, int bits, ring::Prng& prng, double zero_fraction) {
  QuantizedModel m;
  m.architecture = spec.name;
  m.bit_width = bits;
  m.input = spec.input;
  m.input_scale = spec.input_scale;
  const auto shapes = spec.shapes();
  const int64_t levels = (int64_t{1} << bits) - 1;
  const uint64_t zero_cut = static_cast<uint64_t>(zero_fraction * 1e9);
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    ModelLayer l;
    l.spec = spec.layers[i];
    l.spec.reference_nonzero_weights.reset();
    l.weights.resize(l.spec.weight_count(shapes[i]));
    for (auto& w : l.weights) {
      if (prng.uniform(1000000000) < zero_cut) {
        w = 0;
        continue;
      }
      const int64_t j = static_cast<int64_t>(prng.uniform(2 * static_cast<uint64_t>(levels) + 1)) - levels;
      w = integerize({j, levels}, l.spec.weight_scale);
    }
    m.layers.push_back(std::move(l));
  }
  return m;
}

}  // namespace hefir::nn
