#include "hefir/nn/oracle.hpp"

#include "hefir/common/errors.hpp"

namespace hefir::nn {

mpz_class IntTensor::max_abs() const {
  mpz_class best = 0;
  for (const auto& v : values) {
    if (mpz_cmpabs(v.get_mpz_t(), best.get_mpz_t()) > 0) best = abs(v);
  }
  return best;
}

namespace {

void require_shape(const IntTensor& x, const LayerSpec& layer, const std::vector<int64_t>& weights) {
  if (x.values.size() != x.shape.size()) throw ShapeError("tensor storage does not match its shape");
  const std::size_t expected = layer.weight_count(x.shape);
  if (weights.size() != expected) {
    throw ShapeError("layer '" + layer.name + "' expects " + std::to_string(expected) + " weights for input " +
                     to_string(x.shape) + ", got " + std::to_string(weights.size()));
  }
}

}  // namespace

IntTensor conv2d(const IntTensor& x, const LayerSpec& layer, const std::vector<int64_t>& weights,
                 const std::vector<int64_t>& bias) {
  if (layer.kind != LayerKind::Conv) throw ShapeError("conv2d called with a non-conv layer");
  require_shape(x, layer, weights);
  const Shape out_shape = layer.output_shape(x.shape);
  IntTensor out(out_shape, x.scale * static_cast<long>(layer.weight_scale));
  const std::size_t depth = x.shape.channels / layer.groups;
  const std::size_t per_group = layer.filters / layer.groups;
  const long pt = static_cast<long>(layer.pad_top(x.shape));
  const long pl = static_cast<long>(layer.pad_left(x.shape));
  for (std::size_t oy = 0; oy < out_shape.height; ++oy) {
    for (std::size_t ox = 0; ox < out_shape.width; ++ox) {
      for (std::size_t f = 0; f < layer.filters; ++f) {
        const std::size_t c0 = (f / per_group) * depth;
        mpz_class acc = bias.empty() ? 0 : static_cast<long>(bias.at(f));
        for (std::size_t ky = 0; ky < layer.kernel_h; ++ky) {
          const long iy = static_cast<long>(oy * layer.stride_h + ky) - pt;
          if (iy < 0 || iy >= static_cast<long>(x.shape.height)) continue;
          for (std::size_t kx = 0; kx < layer.kernel_w; ++kx) {
            const long ix = static_cast<long>(ox * layer.stride_w + kx) - pl;
            if (ix < 0 || ix >= static_cast<long>(x.shape.width)) continue;
            for (std::size_t d = 0; d < depth; ++d) {
              const int64_t w = weights[((f * layer.kernel_h + ky) * layer.kernel_w + kx) * depth + d];
              if (w == 0) continue;
              const mpz_class& v = x.at(static_cast<std::size_t>(iy), static_cast<std::size_t>(ix), c0 + d);
              if (w > 0) {
                mpz_addmul_ui(acc.get_mpz_t(), v.get_mpz_t(), static_cast<unsigned long>(w));
              } else {
                mpz_submul_ui(acc.get_mpz_t(), v.get_mpz_t(), static_cast<unsigned long>(-w));
              }
            }
          }
        }
        out.at(oy, ox, f) = std::move(acc);
      }
    }
  }
  return out;
}

IntTensor fully_connected(const IntTensor& x, const LayerSpec& layer, const std::vector<int64_t>& weights,
                          const std::vector<int64_t>& bias) {
  if (layer.kind != LayerKind::FullyConnected) throw ShapeError("fully_connected called with a non-fc layer");
  require_shape(x, layer, weights);
  IntTensor out({1, 1, layer.outputs}, x.scale * static_cast<long>(layer.weight_scale));
  const std::size_t n = x.values.size();
  for (std::size_t o = 0; o < layer.outputs; ++o) {
    mpz_class acc = bias.empty() ? 0 : static_cast<long>(bias.at(o));
    for (std::size_t i = 0; i < n; ++i) {
      const int64_t w = weights[o * n + i];
      if (w > 0) {
        mpz_addmul_ui(acc.get_mpz_t(), x.values[i].get_mpz_t(), static_cast<unsigned long>(w));
      } else if (w < 0) {
        mpz_submul_ui(acc.get_mpz_t(), x.values[i].get_mpz_t(), static_cast<unsigned long>(-w));
      }
    }
    out.values[o] = std::move(acc);
  }
  return out;
}

IntTensor square_layer(const IntTensor& x) {
  IntTensor out(x.shape, x.scale * x.scale);
  for (std::size_t i = 0; i < x.values.size(); ++i) out.values[i] = x.values[i] * x.values[i];
  return out;
}

IntTensor avg_pool(const IntTensor& x, const LayerSpec& layer) {
  if (layer.kind != LayerKind::AvgPool) throw ShapeError("avg_pool called with a non-pool layer");
  const Shape out_shape = layer.output_shape(x.shape);
  IntTensor out(out_shape, x.scale * static_cast<long>(layer.extent * layer.extent));
  for (std::size_t oy = 0; oy < out_shape.height; ++oy) {
    for (std::size_t ox = 0; ox < out_shape.width; ++ox) {
      for (std::size_t c = 0; c < out_shape.channels; ++c) {
        mpz_class acc = 0;
        for (std::size_t dy = 0; dy < layer.extent; ++dy) {
          for (std::size_t dx = 0; dx < layer.extent; ++dx) {
            acc += x.at(oy * layer.pool_stride + dy, ox * layer.pool_stride + dx, c);
          }
        }
        out.at(oy, ox, c) = std::move(acc);
      }
    }
  }
  return out;
}

IntTensor apply_layer(const IntTensor& x, const ModelLayer& layer) {
  switch (layer.spec.kind) {
    case LayerKind::Conv: return conv2d(x, layer.spec, layer.weights, layer.bias);
    case LayerKind::FullyConnected: return fully_connected(x, layer.spec, layer.weights, layer.bias);
    case LayerKind::Square: return square_layer(x);
    case LayerKind::AvgPool: return avg_pool(x, layer.spec);
  }
  throw ShapeError("unknown layer kind");
}

IntTensor forward(const QuantizedModel& model, const IntTensor& image, ForwardTrace* trace) {
  if (image.shape != model.input) {
    throw ShapeError("image shape " + to_string(image.shape) + " differs from model input " + to_string(model.input));
  }
  IntTensor x = image;
  for (const auto& layer : model.layers) {
    x = apply_layer(x, layer);
    if (trace) trace->layer_max.push_back(x.max_abs());
  }
  return x;
}

std::size_t classify(const std::vector<mpz_class>& logits) {
  if (logits.empty()) throw ShapeError("no logits to classify");
  std::size_t best = 0;
  for (std::size_t i = 1; i < logits.size(); ++i) {
    if (logits[i] > logits[best]) best = i;
  }
  return best;
}

std::size_t classify(const IntTensor& logits) { return classify(logits.values); }

IntTensor integerize_image(const std::vector<uint8_t>& pixels, const Shape& shape, int64_t scale) {
  if (pixels.size() != shape.size()) throw ShapeError("pixel count differs from image shape");
  IntTensor out(shape, scale);
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    // round(p * scale / 255) with ties away from zero; p and scale are nonnegative
    const int64_t num = static_cast<int64_t>(pixels[i]) * scale;
    out.values[i] = (2 * num + 255) / 510;
  }
  return out;
}

namespace {

std::vector<std::vector<codec::WeightTap>> conv_taps(const LayerSpec& l, const Shape& in,
                                                     const std::vector<int64_t>* weights) {
  const std::size_t depth = in.channels / l.groups;
  const std::size_t per_group = l.filters / l.groups;
  std::vector<std::vector<codec::WeightTap>> taps(l.filters);
  for (std::size_t f = 0; f < l.filters; ++f) {
    const std::size_t c0 = (f / per_group) * depth;
    for (std::size_t k = 0; k < l.kernel_h * l.kernel_w; ++k) {
      for (std::size_t d = 0; d < depth; ++d) {
        const int64_t w = weights ? (*weights)[(f * l.kernel_h * l.kernel_w + k) * depth + d] : l.weight_scale;
        if (w != 0) taps[f].push_back({c0 + d, w});
      }
    }
  }
  return taps;
}

std::vector<std::vector<codec::WeightTap>> fc_taps(const LayerSpec& l, const Shape& in,
                                                   const std::vector<int64_t>* weights) {
  const std::size_t n = in.size();
  std::vector<std::vector<codec::WeightTap>> taps(l.outputs);
  for (std::size_t o = 0; o < l.outputs; ++o) {
    for (std::size_t i = 0; i < n; ++i) {
      const int64_t w = weights ? (*weights)[o * n + i] : l.weight_scale;
      if (w != 0) taps[o].push_back({i % in.channels, w});
    }
  }
  return taps;
}

codec::ScaleTracker track(const NetworkSpec& spec, const std::vector<const ModelLayer*>& layers,
                          const mpz_class& plain_modulus, const mpz_class& input_max) {
  const bool exact = !layers.empty();
  std::vector<codec::Interval> input(spec.input.channels, codec::Interval{0, input_max});
  codec::ScaleTracker tracker(plain_modulus, spec.input_scale, std::move(input));
  const auto shapes = spec.shapes();
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& l = spec.layers[i];
    const std::vector<int64_t>* w = exact ? &layers[i]->weights : nullptr;
    const std::vector<int64_t> no_bias;
    const std::vector<int64_t>& bias = exact ? layers[i]->bias : no_bias;
    switch (l.kind) {
      case LayerKind::Conv:
        tracker.linear(l.name, l.weight_scale, conv_taps(l, shapes[i], w), bias, l.padding, !exact);
        break;
      case LayerKind::FullyConnected:
        tracker.linear(l.name, l.weight_scale, fc_taps(l, shapes[i], w), bias, false, !exact);
        break;
      case LayerKind::Square:
        tracker.square(l.name);
        break;
      case LayerKind::AvgPool:
        tracker.pool(l.name, static_cast<int64_t>(l.extent * l.extent));
        break;
    }
  }
  return tracker;
}

}  // namespace

codec::ScaleTracker track_model(const QuantizedModel& model, const mpz_class& plain_modulus,
                                const mpz_class& input_max) {
  std::vector<const ModelLayer*> layers;
  for (const auto& l : model.layers) layers.push_back(&l);
  return track(model.spec(), layers, plain_modulus, input_max);
}

codec::ScaleTracker track_spec(const NetworkSpec& spec, const mpz_class& plain_modulus, const mpz_class& input_max) {
  return track(spec, {}, plain_modulus, input_max);
}

OpCount count_ops(const QuantizedModel& model) {
  OpCount total;
  const NetworkSpec spec = model.spec();
  const auto shapes = spec.shapes();
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const auto& layer = model.layers[i];
    const auto& l = layer.spec;
    const Shape& in = shapes[i];
    const Shape& out = shapes[i + 1];
    LayerOps ops{l.name};
    switch (l.kind) {
      case LayerKind::Conv: {
        const std::size_t depth = in.channels / l.groups;
        const long pt = static_cast<long>(l.pad_top(in)), pl = static_cast<long>(l.pad_left(in));
        for (std::size_t oy = 0; oy < out.height; ++oy) {
          for (std::size_t ox = 0; ox < out.width; ++ox) {
            for (std::size_t f = 0; f < l.filters; ++f) {
              for (std::size_t ky = 0; ky < l.kernel_h; ++ky) {
                const long iy = static_cast<long>(oy * l.stride_h + ky) - pt;
                if (iy < 0 || iy >= static_cast<long>(in.height)) continue;
                for (std::size_t kx = 0; kx < l.kernel_w; ++kx) {
                  const long ix = static_cast<long>(ox * l.stride_w + kx) - pl;
                  if (ix < 0 || ix >= static_cast<long>(in.width)) continue;
                  for (std::size_t d = 0; d < depth; ++d) {
                    if (layer.weights[((f * l.kernel_h + ky) * l.kernel_w + kx) * depth + d] != 0) ++ops.mult_plain;
                  }
                }
              }
            }
          }
        }
        break;
      }
      case LayerKind::FullyConnected:
        for (int64_t w : layer.weights) ops.mult_plain += w != 0 ? 1 : 0;
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
