#include "hefir/ring/modarith.hpp"

#include <algorithm>
#include <string>

#include "hefir/common/errors.hpp"

namespace hefir::ring {

uint64_t pow_mod(uint64_t base, uint64_t exp, uint64_t p) noexcept {
  uint64_t result = 1 % p;
  base %= p;
  while (exp > 0) {
    if (exp & 1) result = mul_mod(result, base, p);
    base = mul_mod(base, base, p);
    exp >>= 1;
  }
  return result;
}

uint64_t inv_mod(uint64_t a, uint64_t m) {
  // extended Euclid over signed 128-bit to stay exact for m < 2^63
  __int128 old_r = a % m, r = m;
  __int128 old_s = 1, s = 0;
  while (r != 0) {
    __int128 q = old_r / r;
    __int128 tmp = old_r - q * r;
    old_r = r;
    r = tmp;
    tmp = old_s - q * s;
    old_s = s;
    s = tmp;
  }
  if (old_r != 1) {
    throw ParameterError("inv_mod: " + std::to_string(a) + " is not invertible mod " +
                         std::to_string(m));
  }
  __int128 result = old_s % static_cast<__int128>(m);
  if (result < 0) result += m;
  return static_cast<uint64_t>(result);
}

bool is_prime(uint64_t n) noexcept {
  if (n < 2) return false;
  for (uint64_t small : {2ULL, 3ULL, 5ULL, 7ULL, 11ULL, 13ULL, 17ULL, 19ULL, 23ULL, 29ULL, 31ULL, 37ULL}) {
    if (n % small == 0) return n == small;
  }
  uint64_t d = n - 1;
  int s = 0;
  while ((d & 1) == 0) {
    d >>= 1;
    ++s;
  }
  for (uint64_t a : {2ULL, 3ULL, 5ULL, 7ULL, 11ULL, 13ULL, 17ULL, 19ULL, 23ULL, 29ULL, 31ULL, 37ULL}) {
    uint64_t x = pow_mod(a, d, n);
    if (x == 1 || x == n - 1) continue;
    bool composite = true;
    for (int r = 1; r < s; ++r) {
      x = mul_mod(x, x, n);
      if (x == n - 1) {
        composite = false;
        break;
      }
    }
    if (composite) return false;
  }
  return true;
}

uint64_t primitive_2n_root(uint64_t p, std::size_t n) {
  const uint64_t two_n = 2 * static_cast<uint64_t>(n);
  if (p < 3 || (p - 1) % two_n != 0) {
    throw UnsupportedParameters("modulus " + std::to_string(p) + " is not 1 mod " +
                                std::to_string(two_n));
  }
  const uint64_t cofactor = (p - 1) / two_n;
  // 2N is a power of two, so x^cofactor has order exactly 2N iff its N-th power is -1.
  for (uint64_t x = 2; x < p; ++x) {
    uint64_t candidate = pow_mod(x, cofactor, p);
    if (pow_mod(candidate, n, p) == p - 1) return candidate;
  }
  throw UnsupportedParameters("no primitive 2N-th root modulo " + std::to_string(p));
}

std::vector<uint64_t> generate_ntt_primes(int bits, std::size_t count, std::size_t n,
                                          const std::vector<uint64_t>& exclude) {
  if (bits < 3 || bits > 62) throw ParameterError("prime bit length must be in [3, 62]");
  const uint64_t step = 2 * static_cast<uint64_t>(n);
  const uint64_t upper = (bits == 64) ? ~0ULL : (1ULL << bits);
  const uint64_t lower = 1ULL << (bits - 1);
  std::vector<uint64_t> primes;
  // largest candidate of the form k*2N + 1 below 2^bits
  uint64_t candidate = ((upper - 2) / step) * step + 1;
  while (primes.size() < count) {
    if (candidate < lower || candidate <= step) {
      throw ParameterError("not enough " + std::to_string(bits) + "-bit NTT primes for N = " +
                           std::to_string(n));
    }
    if (is_prime(candidate) &&
        std::find(exclude.begin(), exclude.end(), candidate) == exclude.end()) {
      primes.push_back(candidate);
    }
    candidate -= step;
  }
  return primes;
}

}  // namespace hefir::ring
