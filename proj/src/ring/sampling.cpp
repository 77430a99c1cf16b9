#include "hefir/ring/sampling.hpp"

#include <sodium.h>

#include <cmath>
#include <cstring>
#include <mutex>
#include <stdexcept>

#include "hefir/ring/modarith.hpp"

namespace hefir::ring {

namespace {

void ensure_sodium() {
  static std::once_flag flag;
  std::call_once(flag, [] {
    if (sodium_init() < 0) throw std::runtime_error("libsodium initialisation failed");
  });
}

// Cumulative table of P(|X| <= k) scaled to 2^63, for k = 0..bound.
const std::array<uint64_t, kNoiseBound + 1>& gaussian_cdt() {
  static const auto table = [] {
    std::array<double, kNoiseBound + 1> weight{};
    double total = 0.0;
    for (int k = 0; k <= kNoiseBound; ++k) {
      const double w = std::exp(-(k * k) / (2.0 * kNoiseSigma * kNoiseSigma));
      weight[k] = (k == 0) ? w : 2.0 * w;
      total += weight[k];
    }
    std::array<uint64_t, kNoiseBound + 1> cdt{};
    double acc = 0.0;
    const double scale = 9223372036854775808.0;  // 2^63
    for (int k = 0; k <= kNoiseBound; ++k) {
      acc += weight[k] / total;
      cdt[k] = (k == kNoiseBound) ? (1ULL << 63) : static_cast<uint64_t>(acc * scale);
    }
    return cdt;
  }();
  return table;
}

}  // namespace

Prng::Prng() {
  ensure_sodium();
  randombytes_buf(key_.data(), key_.size());
}

Prng::Prng(uint64_t seed) {
  ensure_sodium();
  uint8_t bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<uint8_t>(seed >> (8 * i));
  crypto_generichash(key_.data(), key_.size(), bytes, sizeof bytes, nullptr, 0);
}

Prng::Prng(std::span<const uint8_t> seed_bytes) {
  ensure_sodium();
  crypto_generichash(key_.data(), key_.size(), seed_bytes.data(), seed_bytes.size(), nullptr, 0);
}

void Prng::refill() {
  uint8_t nonce[crypto_stream_chacha20_NONCEBYTES];
  std::memcpy(nonce, &block_counter_, sizeof nonce);
  ++block_counter_;
  uint8_t raw[sizeof(buffer_)];
  crypto_stream_chacha20(raw, sizeof raw, nonce, key_.data());
  std::memcpy(buffer_.data(), raw, sizeof raw);
  pos_ = 0;
}

Prng::result_type Prng::operator()() {
  if (pos_ == buffer_.size()) refill();
  return buffer_[pos_++];
}

uint64_t Prng::uniform(uint64_t bound) {
  if (bound <= 1) return 0;
  const uint64_t limit = max() - (max() % bound + 1) % bound;
  uint64_t x;
  do {
    x = (*this)();
  } while (x > limit);
  return x % bound;
}

void Prng::fill(std::span<uint8_t> out) {
  std::size_t i = 0;
  while (i < out.size()) {
    const uint64_t w = (*this)();
    for (int b = 0; b < 8 && i < out.size(); ++b, ++i) out[i] = static_cast<uint8_t>(w >> (8 * b));
  }
}

Prng Prng::fork() {
  std::array<uint8_t, 32> child_seed{};
  fill(child_seed);
  return Prng(std::span<const uint8_t>(child_seed));
}

int64_t sample_gaussian(Prng& prng) {
  const auto& cdt = gaussian_cdt();
  const uint64_t word = prng();
  const uint64_t r = word >> 1;
  const bool negative = word & 1;
  int k = 0;
  while (k < kNoiseBound && r >= cdt[k]) ++k;
  if (k == 0) return 0;
  return negative ? -k : k;
}

std::vector<int64_t> sample_binary_coeffs(std::size_t n, Prng& prng) {
  std::vector<int64_t> out(n);
  uint64_t bits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (i % 64 == 0) bits = prng();
    out[i] = static_cast<int64_t>((bits >> (i % 64)) & 1);
  }
  return out;
}

std::vector<int64_t> sample_noise_coeffs(std::size_t n, Prng& prng) {
  std::vector<int64_t> out(n);
  for (auto& x : out) x = sample_gaussian(prng);
  return out;
}

RingElem sample_uniform(const ContextPtr& ctx, Prng& prng, Domain domain) {
  // independent uniform residues are uniform mod q by CRT; the NTT is a bijection
  RingElem out(ctx, domain);
  for (std::size_t i = 0; i < ctx->prime_count(); ++i) {
    const uint64_t p = ctx->prime(i).value;
    for (auto& x : out.residues(i)) x = prng.uniform(p);
  }
  return out;
}

RingElem sample_binary(const ContextPtr& ctx, Prng& prng) {
  return RingElem::from_signed(ctx, sample_binary_coeffs(ctx->degree(), prng));
}

RingElem sample_noise(const ContextPtr& ctx, Prng& prng) {
  return RingElem::from_signed(ctx, sample_noise_coeffs(ctx->degree(), prng));
}

}  // namespace hefir::ring
