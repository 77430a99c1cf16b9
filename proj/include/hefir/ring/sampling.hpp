#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "hefir/ring/rns.hpp"

namespace hefir::ring {

/// ChaCha20 keystream generator. Seeded runs are reproducible; unseeded runs
/// draw their key from the OS.
class Prng {
 public:
  using result_type = uint64_t;

  Prng();
  explicit Prng(uint64_t seed);
  explicit Prng(std::span<const uint8_t> seed_bytes);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }
  result_type operator()();

  // Uniform in [0, bound), rejection sampled.
  uint64_t uniform(uint64_t bound);
  void fill(std::span<uint8_t> out);

  // Derives an independent generator (used to hand streams to workers).
  Prng fork();

 private:
  void refill();

  std::array<uint8_t, 32> key_{};
  uint64_t block_counter_ = 0;
  std::array<uint64_t, 64> buffer_{};
  std::size_t pos_ = 64;
};

inline constexpr double kNoiseSigma = 3.2;
inline constexpr int kNoiseBound = 19;  // floor(6 * sigma)

// Discrete Gaussian with sigma 3.2, truncated to |x| <= 19.
int64_t sample_gaussian(Prng& prng);

std::vector<int64_t> sample_binary_coeffs(std::size_t n, Prng& prng);
std::vector<int64_t> sample_noise_coeffs(std::size_t n, Prng& prng);

// Uniform element of R_q, returned in the requested domain.
RingElem sample_uniform(const ContextPtr& ctx, Prng& prng, Domain domain = Domain::Ntt);
RingElem sample_binary(const ContextPtr& ctx, Prng& prng);
RingElem sample_noise(const ContextPtr& ctx, Prng& prng);

}  // namespace hefir::ring
