#pragma once

// Word-sized modular arithmetic for odd moduli below 2^62.

#include <cstddef>
#include <cstdint>
#include <vector>

namespace hefir::ring {

using u128 = unsigned __int128;

inline uint64_t add_mod(uint64_t a, uint64_t b, uint64_t p) noexcept {
  uint64_t s = a + b;
  return s >= p ? s - p : s;
}

inline uint64_t sub_mod(uint64_t a, uint64_t b, uint64_t p) noexcept {
  return a >= b ? a - b : a + p - b;
}

inline uint64_t neg_mod(uint64_t a, uint64_t p) noexcept { return a == 0 ? 0 : p - a; }

inline uint64_t mul_mod(uint64_t a, uint64_t b, uint64_t p) noexcept {
  return static_cast<uint64_t>((static_cast<u128>(a) * b) % p);
}

// Shoup's precomputed multiplication by a fixed operand w < p:
// quotient = floor(w * 2^64 / p).
inline uint64_t shoup_quotient(uint64_t w, uint64_t p) noexcept {
  return static_cast<uint64_t>((static_cast<u128>(w) << 64) / p);
}

inline uint64_t mul_mod_shoup(uint64_t a, uint64_t w, uint64_t w_quot, uint64_t p) noexcept {
  uint64_t q = static_cast<uint64_t>((static_cast<u128>(a) * w_quot) >> 64);
  uint64_t r = a * w - q * p;
  return r >= p ? r - p : r;
}

uint64_t pow_mod(uint64_t base, uint64_t exp, uint64_t p) noexcept;

// Inverse of a modulo m (m need not be prime); requires gcd(a, m) = 1.
uint64_t inv_mod(uint64_t a, uint64_t m);

// Deterministic Miller-Rabin for 64-bit integers.
bool is_prime(uint64_t n) noexcept;

// Smallest-search primitive 2N-th root of unity modulo a prime p ≡ 1 (mod 2N).
// Throws UnsupportedParameters when p ≢ 1 (mod 2N).
uint64_t primitive_2n_root(uint64_t p, std::size_t n);

// `count` distinct primes p ≡ 1 (mod 2N) with bit length exactly `bits`,
// descending from 2^bits, skipping anything in `exclude`.
std::vector<uint64_t> generate_ntt_primes(int bits, std::size_t count, std::size_t n,
                                          const std::vector<uint64_t>& exclude = {});

inline std::size_t reverse_bits(std::size_t x, int bit_count) noexcept {
  std::size_t r = 0;
  for (int i = 0; i < bit_count; ++i) {
    r = (r << 1) | (x & 1);
    x >>= 1;
  }
  return r;
}

}  // namespace hefir::ring
