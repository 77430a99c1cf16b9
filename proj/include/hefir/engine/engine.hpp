#pragma once

#include <atomic>
#include <functional>
#include <optional>
#include <vector>

#include "hefir/batching/slot_encoder.hpp"
#include "hefir/bfv/bfv.hpp"
#include "hefir/codec/codec.hpp"
#include "hefir/nn/model.hpp"
#include "hefir/nn/oracle.hpp"

namespace hefir::engine {

/// Feature map with one ciphertext per (y, x, c) position, slot j holding image j.
struct CipherTensor {
  nn::Shape shape;
  std::vector<bfv::Ciphertext> cts;
  mpz_class scale = 1;
  std::size_t channel = 0;  // index of the plaintext modulus in a CRT system

  bfv::Ciphertext& at(std::size_t y, std::size_t x, std::size_t c) { return cts[shape.index(y, x, c)]; }
  const bfv::Ciphertext& at(std::size_t y, std::size_t x, std::size_t c) const { return cts[shape.index(y, x, c)]; }
};

/// How images map to plaintext slots. Without a slot encoder only one image fits and
/// values ride in the constant coefficient.
class PackingLayout {
 public:
  PackingLayout(const bfv::ParamsPtr& params, std::size_t batch);

  std::size_t batch() const noexcept { return batch_; }
  std::size_t capacity() const noexcept;
  bool batched() const noexcept { return encoder_.has_value(); }
  uint64_t plain_modulus() const noexcept { return t_; }

  bfv::Plaintext encode(const std::vector<uint64_t>& per_image) const;
  std::vector<uint64_t> decode(const bfv::Plaintext& pt) const;  // batch() values

 private:
  std::size_t n_;
  uint64_t t_;
  std::size_t batch_;
  std::optional<batching::SlotEncoder> encoder_;
};

struct OpCounters {
  std::atomic<uint64_t> mult_plain{0};
  std::atomic<uint64_t> square{0};
  std::atomic<uint64_t> mult{0};
  std::atomic<uint64_t> add{0};
  std::atomic<uint64_t> add_plain{0};
};

struct EngineOptions {
  std::size_t workers = 1;
  std::size_t mem_budget_mb = 4096;
  std::size_t block_capacity = 0;  // resident input positions per block; 0 derives it from the budget
};

// Resident ciphertexts per worker: budget / (3 * 2 * N * log2 q bits).
std::size_t ciphertext_capacity(const bfv::BfvParams& params, std::size_t mem_budget_mb);

using LayerObserver = std::function<void(std::size_t layer_index, const nn::ModelLayer& layer, const CipherTensor& out)>;

CipherTensor pack_images(const std::vector<nn::IntTensor>& images, const PackingLayout& layout,
                         const bfv::PublicKey& pk, ring::Prng& prng, std::size_t channel = 0);

CipherTensor eval_conv(const CipherTensor& in, const nn::ModelLayer& layer, const EngineOptions& options,
                       OpCounters* counters = nullptr);
CipherTensor eval_fc(const CipherTensor& in, const nn::ModelLayer& layer, const EngineOptions& options,
                     OpCounters* counters = nullptr);
CipherTensor eval_square(const CipherTensor& in, const bfv::RelinKey& rlk, const EngineOptions& options,
                         OpCounters* counters = nullptr);
CipherTensor eval_pool(const CipherTensor& in, const nn::LayerSpec& layer, const EngineOptions& options,
                       OpCounters* counters = nullptr);

CipherTensor eval_network(const CipherTensor& input, const nn::QuantizedModel& model, const bfv::RelinKey& rlk,
                          const EngineOptions& options = {}, OpCounters* counters = nullptr,
                          const LayerObserver& observer = {});

// values[position][image] as residues mod t.
std::vector<std::vector<uint64_t>> decrypt_tensor(const CipherTensor& ct, const bfv::SecretKey& sk,
                                                  const PackingLayout& layout);

/// Keys and parameters for one plaintext modulus of a CRT system.
struct Channel {
  bfv::ParamsPtr params;
  bfv::KeySet keys;
};

struct ChannelResult {
  std::vector<uint64_t> moduli;
  std::size_t batch = 0;
  // logits[channel][output][image], residues mod moduli[channel]
  std::vector<std::vector<std::vector<uint64_t>>> logits;
};

ChannelResult run_channels(const std::vector<nn::IntTensor>& images, const nn::QuantizedModel& model,
                           const std::vector<Channel>& channels, ring::Prng& prng, const EngineOptions& options = {},
                           OpCounters* counters = nullptr);
// Signed logits per image: centered CRT reconstruction over all channels.
std::vector<std::vector<mpz_class>> reconstruct_logits(const ChannelResult& result, const codec::CrtSystem& crt);
std::vector<std::size_t> classify(const std::vector<std::vector<mpz_class>>& logits);

}  // namespace hefir::engine
