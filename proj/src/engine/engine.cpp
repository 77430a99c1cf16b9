#include "hefir/engine/engine.hpp"

#include <algorithm>
#include <climits>
#include <string>

#include "hefir/common/errors.hpp"
#include "hefir/engine/block_plan.hpp"
#include "hefir/engine/worker_pool.hpp"
#include "hefir/ring/modarith.hpp"

namespace hefir::engine {

using nn::LayerKind;

namespace {

bool can_batch(uint64_t t, std::size_t n) { return ring::is_prime(t) && (t - 1) % (2 * n) == 0; }

void count(OpCounters* c, std::atomic<uint64_t> OpCounters::*field, uint64_t amount = 1) {
  if (c) (c->*field).fetch_add(amount, std::memory_order_relaxed);
}

// Centered residue of w mod t, so small channels keep multipliers small.
int64_t centered_weight(int64_t w, uint64_t t) {
  if (t > static_cast<uint64_t>(INT64_MAX)) return w;
  const int64_t tt = static_cast<int64_t>(t);
  int64_t r = w % tt;
  if (r < 0) r += tt;
  return r > tt / 2 ? r - tt : r;
}

void require_tensor(const CipherTensor& in) {
  if (in.cts.size() != in.shape.size() || in.cts.empty()) {
    throw ShapeError("cipher tensor holds " + std::to_string(in.cts.size()) + " ciphertexts for shape " +
                     nn::to_string(in.shape));
  }
}

// Splits [0, n) into roughly equal chunks, a few per worker.
template <typename F>
void parallel_ranges(WorkerPool& pool, std::size_t n, F&& body) {
  const std::size_t chunks = std::min<std::size_t>(n, pool.size() * 4);
  for (std::size_t i = 0; i < chunks; ++i) {
    const std::size_t begin = n * i / chunks, end = n * (i + 1) / chunks;
    pool.submit([&body, begin, end] { body(begin, end); });
  }
  pool.wait();
}

}  // namespace

PackingLayout::PackingLayout(const bfv::ParamsPtr& params, std::size_t batch)
    : n_(params->degree()), t_(params->plain_modulus()), batch_(batch) {
  if (can_batch(t_, n_)) encoder_.emplace(t_, n_);
  if (batch_ == 0) throw CapacityError("batch must hold at least one image");
  if (batch_ > capacity()) {
    throw CapacityError("batch of " + std::to_string(batch_) + " images exceeds the " + std::to_string(capacity()) +
                        " available slots");
  }
}

std::size_t PackingLayout::capacity() const noexcept { return encoder_ ? n_ : 1; }

bfv::Plaintext PackingLayout::encode(const std::vector<uint64_t>& per_image) const {
  if (per_image.size() > batch_) throw CapacityError("more values than packed images");
  if (encoder_) return encoder_->encode(per_image);
  auto pt = bfv::Plaintext::constant(n_, per_image.empty() ? 0 : per_image[0]);
  if (pt.coeffs[0] >= t_) throw EncodingError("slot value not below t");
  return pt;
}

std::vector<uint64_t> PackingLayout::decode(const bfv::Plaintext& pt) const {
  if (encoder_) {
    auto slots = encoder_->decode(pt);
    slots.resize(batch_);
    return slots;
  }
  return {pt.coeffs.at(0)};
}

std::size_t ciphertext_capacity(const bfv::BfvParams& params, std::size_t mem_budget_mb) {
  const double bits = 3.0 * 2.0 * static_cast<double>(params.degree()) *
                      static_cast<double>(params.context()->modulus_bits());
  const double budget_bits = static_cast<double>(mem_budget_mb) * 8.0 * 1024.0 * 1024.0;
  return static_cast<std::size_t>(budget_bits / bits);
}

CipherTensor pack_images(const std::vector<nn::IntTensor>& images, const PackingLayout& layout,
                         const bfv::PublicKey& pk, ring::Prng& prng, std::size_t channel) {
  if (images.empty()) throw ShapeError("no images to pack");
  if (images.size() != layout.batch()) {
    throw CapacityError("layout expects " + std::to_string(layout.batch()) + " images, got " +
                        std::to_string(images.size()));
  }
  const nn::Shape shape = images[0].shape;
  for (const auto& img : images) {
    if (img.shape != shape) throw ShapeError("images in a batch must share one shape");
  }
  mpz_class t;
  mpz_set_ui(t.get_mpz_t(), layout.plain_modulus());
  CipherTensor out;
  out.shape = shape;
  out.scale = images[0].scale;
  out.channel = channel;
  out.cts.reserve(shape.size());
  std::vector<uint64_t> slots(images.size());
  for (std::size_t pos = 0; pos < shape.size(); ++pos) {
    for (std::size_t j = 0; j < images.size(); ++j) {
      mpz_class r;
      mpz_fdiv_r(r.get_mpz_t(), images[j].values[pos].get_mpz_t(), t.get_mpz_t());
      slots[j] = mpz_get_ui(r.get_mpz_t());
    }
    out.cts.push_back(bfv::encrypt(pk, layout.encode(slots), prng));
  }
  return out;
}

CipherTensor eval_conv(const CipherTensor& in, const nn::ModelLayer& layer, const EngineOptions& options,
                       OpCounters* counters) {
  require_tensor(in);
  const auto& l = layer.spec;
  if (l.kind != LayerKind::Conv) throw ShapeError("eval_conv called with a non-conv layer");
  if (layer.weights.size() != l.weight_count(in.shape)) throw ShapeError("layer '" + l.name + "' weight count mismatch");
  const nn::Shape out_shape = l.output_shape(in.shape);
  const auto& params = in.cts[0].params;
  const std::size_t depth = in.shape.channels / l.groups;
  const std::size_t per_group = l.filters / l.groups;
  const long pt = static_cast<long>(l.pad_top(in.shape));
  const long pl = static_cast<long>(l.pad_left(in.shape));

  // blocks over the (padded) input map; capacity counts spatial positions per worker
  const std::size_t capacity = options.block_capacity
                                   ? options.block_capacity
                                   : ciphertext_capacity(*params, options.mem_budget_mb) / in.shape.channels;
  const std::size_t padded_w = (out_shape.width - 1) * l.stride_w + l.kernel_w;
  const std::size_t padded_h = (out_shape.height - 1) * l.stride_h + l.kernel_h;
  const BlockPlan plan = plan_blocks(padded_w, padded_h, l.kernel_w, l.kernel_h, l.stride_w, l.stride_h, capacity);

  CipherTensor out;
  out.shape = out_shape;
  out.scale = in.scale * static_cast<long>(l.weight_scale);
  out.channel = in.channel;
  out.cts.resize(out_shape.size());

  WorkerPool pool(options.workers);
  for (const auto& block : plan.blocks) {
    pool.submit([&, block_ptr = &block] {
      const Block& b = *block_ptr;
      for (std::size_t oy = b.row_begin; oy < b.row_end; ++oy) {
        for (std::size_t ox = b.col_begin; ox < b.col_end; ++ox) {
          for (std::size_t f = 0; f < l.filters; ++f) {
            const std::size_t c0 = (f / per_group) * depth;
            bfv::Ciphertext acc = bfv::zero_ciphertext(params);
            for (std::size_t ky = 0; ky < l.kernel_h; ++ky) {
              const long iy = static_cast<long>(oy * l.stride_h + ky) - pt;
              if (iy < 0 || iy >= static_cast<long>(in.shape.height)) continue;
              for (std::size_t kx = 0; kx < l.kernel_w; ++kx) {
                const long ix = static_cast<long>(ox * l.stride_w + kx) - pl;
                if (ix < 0 || ix >= static_cast<long>(in.shape.width)) continue;
                for (std::size_t d = 0; d < depth; ++d) {
                  const int64_t w = centered_weight(
                      layer.weights[((f * l.kernel_h + ky) * l.kernel_w + kx) * depth + d], params->plain_modulus());
                  if (w == 0) continue;
                  bfv::hmult_scalar_accumulate(
                      acc, in.at(static_cast<std::size_t>(iy), static_cast<std::size_t>(ix), c0 + d), w);
                  count(counters, &OpCounters::mult_plain);
                  count(counters, &OpCounters::add);
                }
              }
            }
            if (!layer.bias.empty()) {
              acc = bfv::hadd_plain(acc, bfv::Plaintext::constant(
                                             params->degree(), bfv::reduce_plain(layer.bias[f], params->plain_modulus())));
              count(counters, &OpCounters::add_plain);
            }
            out.at(oy, ox, f) = std::move(acc);
          }
        }
      }
    });
  }
  pool.wait();
  return out;
}

CipherTensor eval_fc(const CipherTensor& in, const nn::ModelLayer& layer, const EngineOptions& options,
                     OpCounters* counters) {
  require_tensor(in);
  const auto& l = layer.spec;
  if (l.kind != LayerKind::FullyConnected) throw ShapeError("eval_fc called with a non-fc layer");
  const std::size_t n = in.shape.size();
  if (layer.weights.size() != n * l.outputs) throw ShapeError("layer '" + l.name + "' weight count mismatch");
  const auto& params = in.cts[0].params;
  CipherTensor out;
  out.shape = {1, 1, l.outputs};
  out.scale = in.scale * static_cast<long>(l.weight_scale);
  out.channel = in.channel;
  out.cts.resize(l.outputs);
  WorkerPool pool(options.workers);
  for (std::size_t o = 0; o < l.outputs; ++o) {
    pool.submit([&, o] {
      bfv::Ciphertext acc = bfv::zero_ciphertext(params);
      for (std::size_t i = 0; i < n; ++i) {
        const int64_t w = centered_weight(layer.weights[o * n + i], params->plain_modulus());
        if (w == 0) continue;
        bfv::hmult_scalar_accumulate(acc, in.cts[i], w);
        count(counters, &OpCounters::mult_plain);
        count(counters, &OpCounters::add);
      }
      if (!layer.bias.empty()) {
        acc = bfv::hadd_plain(
            acc, bfv::Plaintext::constant(params->degree(), bfv::reduce_plain(layer.bias[o], params->plain_modulus())));
        count(counters, &OpCounters::add_plain);
      }
      out.cts[o] = std::move(acc);
    });
  }
  pool.wait();
  return out;
}

CipherTensor eval_square(const CipherTensor& in, const bfv::RelinKey& rlk, const EngineOptions& options,
                         OpCounters* counters) {
  require_tensor(in);
  if (!rlk.params || rlk.parts.empty()) throw KeyError("square layer needs a relinearization key");
  CipherTensor out;
  out.shape = in.shape;
  out.scale = in.scale * in.scale;
  out.channel = in.channel;
  out.cts.resize(in.cts.size());
  WorkerPool pool(options.workers);
  parallel_ranges(pool, in.cts.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      out.cts[i] = bfv::hsquare(in.cts[i], rlk);
      count(counters, &OpCounters::square);
    }
  });
  return out;
}

CipherTensor eval_pool(const CipherTensor& in, const nn::LayerSpec& l, const EngineOptions& options,
                       OpCounters* counters) {
  require_tensor(in);
  if (l.kind != LayerKind::AvgPool) throw ShapeError("eval_pool called with a non-pool layer");
  const nn::Shape out_shape = l.output_shape(in.shape);
  CipherTensor out;
  out.shape = out_shape;
  out.scale = in.scale * static_cast<long>(l.extent * l.extent);
  out.channel = in.channel;
  out.cts.resize(out_shape.size());
  WorkerPool pool(options.workers);
  parallel_ranges(pool, out_shape.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t idx = begin; idx < end; ++idx) {
      const std::size_t c = idx % out_shape.channels;
      const std::size_t ox = (idx / out_shape.channels) % out_shape.width;
      const std::size_t oy = idx / (out_shape.channels * out_shape.width);
      bfv::Ciphertext acc = in.at(oy * l.pool_stride, ox * l.pool_stride, c);
      for (std::size_t dy = 0; dy < l.extent; ++dy) {
        for (std::size_t dx = 0; dx < l.extent; ++dx) {
          if (dy == 0 && dx == 0) continue;
          bfv::hadd_inplace(acc, in.at(oy * l.pool_stride + dy, ox * l.pool_stride + dx, c));
          count(counters, &OpCounters::add);
        }
      }
      out.cts[idx] = std::move(acc);
    }
  });
  return out;
}

CipherTensor eval_network(const CipherTensor& input, const nn::QuantizedModel& model, const bfv::RelinKey& rlk,
                          const EngineOptions& options, OpCounters* counters, const LayerObserver& observer) {
  require_tensor(input);
  if (input.shape != model.input) {
    throw ShapeError("encrypted input " + nn::to_string(input.shape) + " differs from model input " +
                     nn::to_string(model.input));
  }
  if (rlk.params && rlk.params->fingerprint() != input.cts[0].params->fingerprint()) {
    throw ParameterError("evaluation key belongs to a different channel or parameter set");
  }
  CipherTensor x = input;
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const auto& layer = model.layers[i];
    switch (layer.spec.kind) {
      case LayerKind::Conv: x = eval_conv(x, layer, options, counters); break;
      case LayerKind::FullyConnected: x = eval_fc(x, layer, options, counters); break;
      case LayerKind::Square: x = eval_square(x, rlk, options, counters); break;
      case LayerKind::AvgPool: x = eval_pool(x, layer.spec, options, counters); break;
    }
    if (observer) observer(i, layer, x);
  }
  return x;
}

std::vector<std::vector<uint64_t>> decrypt_tensor(const CipherTensor& ct, const bfv::SecretKey& sk,
                                                  const PackingLayout& layout) {
  std::vector<std::vector<uint64_t>> out;
  out.reserve(ct.cts.size());
  for (const auto& c : ct.cts) out.push_back(layout.decode(bfv::decrypt(sk, c)));
  return out;
}

ChannelResult run_channels(const std::vector<nn::IntTensor>& images, const nn::QuantizedModel& model,
                           const std::vector<Channel>& channels, ring::Prng& prng, const EngineOptions& options,
                           OpCounters* counters) {
  if (channels.empty()) throw ParameterError("no CRT channels given");
  ChannelResult result;
  result.batch = images.size();
  for (std::size_t ch = 0; ch < channels.size(); ++ch) {
    const auto& c = channels[ch];
    const PackingLayout layout(c.params, images.size());
    CipherTensor packed = pack_images(images, layout, c.keys.public_key, prng, ch);
    CipherTensor logits = eval_network(packed, model, c.keys.relin, options, counters);
    result.moduli.push_back(c.params->plain_modulus());
    result.logits.push_back(decrypt_tensor(logits, c.keys.secret, layout));
  }
  return result;
}

std::vector<std::vector<mpz_class>> reconstruct_logits(const ChannelResult& result, const codec::CrtSystem& crt) {
  if (result.logits.size() != crt.size() || result.moduli != crt.moduli()) {
    throw IncompleteResult("channel result has " + std::to_string(result.logits.size()) +
                           " channels; the CRT system needs " + std::to_string(crt.size()));
  }
  const std::size_t outputs = result.logits[0].size();
  std::vector<std::vector<mpz_class>> out(result.batch, std::vector<mpz_class>(outputs));
  std::vector<uint64_t> residues(crt.size());
  for (std::size_t img = 0; img < result.batch; ++img) {
    for (std::size_t o = 0; o < outputs; ++o) {
      for (std::size_t ch = 0; ch < crt.size(); ++ch) {
        if (result.logits[ch].size() != outputs || result.logits[ch][o].size() != result.batch) {
          throw IncompleteResult("channel " + std::to_string(ch) + " is missing logits");
        }
        residues[ch] = result.logits[ch][o][img];
      }
      out[img][o] = crt.reconstruct_signed(residues);
    }
  }
  return out;
}

std::vector<std::size_t> classify(const std::vector<std::vector<mpz_class>>& logits) {
  std::vector<std::size_t> labels;
  labels.reserve(logits.size());
  for (const auto& l : logits) labels.push_back(nn::classify(l));
  return labels;
}

}  // namespace hefir::engine
