#include "hefir/ring/ntt.hpp"

#include <bit>
#include <string>

#include "hefir/common/errors.hpp"
#include "hefir/ring/modarith.hpp"

namespace hefir::ring {

NttTables::NttTables(uint64_t modulus, std::size_t n) : p_(modulus), n_(n) {
  if (n < 4 || !std::has_single_bit(n)) {
    throw ParameterError("ring degree must be a power of two >= 4, got " + std::to_string(n));
  }
  if (modulus >= (1ULL << 62)) throw ParameterError("NTT modulus must be below 2^62");
  log_n_ = std::countr_zero(n);
  psi_ = primitive_2n_root(p_, n_);
  const uint64_t psi_inv = inv_mod(psi_, p_);
  n_inv_ = inv_mod(n_ % p_, p_);
  n_inv_quot_ = shoup_quotient(n_inv_, p_);

  roots_.resize(n_);
  inv_roots_.resize(n_);
  roots_quot_.resize(n_);
  inv_roots_quot_.resize(n_);
  uint64_t power = 1, inv_power = 1;
  for (std::size_t i = 0; i < n_; ++i) {
    const std::size_t r = reverse_bits(i, log_n_);
    roots_[r] = power;
    inv_roots_[r] = inv_power;
    power = mul_mod(power, psi_, p_);
    inv_power = mul_mod(inv_power, psi_inv, p_);
  }
  for (std::size_t i = 0; i < n_; ++i) {
    roots_quot_[i] = shoup_quotient(roots_[i], p_);
    inv_roots_quot_[i] = shoup_quotient(inv_roots_[i], p_);
  }
}

void NttTables::forward(std::span<uint64_t> a) const {
  const uint64_t p = p_;
  std::size_t t = n_;
  for (std::size_t m = 1; m < n_; m <<= 1) {
    t >>= 1;
    for (std::size_t i = 0; i < m; ++i) {
      const std::size_t j1 = 2 * i * t;
      const uint64_t w = roots_[m + i];
      const uint64_t wq = roots_quot_[m + i];
      uint64_t* x = a.data() + j1;
      uint64_t* y = x + t;
      for (std::size_t j = 0; j < t; ++j) {
        const uint64_t u = x[j];
        const uint64_t v = mul_mod_shoup(y[j], w, wq, p);
        x[j] = add_mod(u, v, p);
        y[j] = sub_mod(u, v, p);
      }
    }
  }
}

void NttTables::inverse(std::span<uint64_t> a) const {
  const uint64_t p = p_;
  std::size_t t = 1;
  for (std::size_t m = n_; m > 1; m >>= 1) {
    const std::size_t h = m >> 1;
    std::size_t j1 = 0;
    for (std::size_t i = 0; i < h; ++i) {
      const uint64_t w = inv_roots_[h + i];
      const uint64_t wq = inv_roots_quot_[h + i];
      uint64_t* x = a.data() + j1;
      uint64_t* y = x + t;
      for (std::size_t j = 0; j < t; ++j) {
        const uint64_t u = x[j];
        const uint64_t v = y[j];
        x[j] = add_mod(u, v, p);
        y[j] = mul_mod_shoup(sub_mod(u, v, p), w, wq, p);
      }
      j1 += 2 * t;
    }
    t <<= 1;
  }
  for (auto& x : a) x = mul_mod_shoup(x, n_inv_, n_inv_quot_, p);
}

std::size_t NttTables::evaluation_index(std::size_t i) const noexcept {
  return reverse_bits(i, log_n_);
}

}  // namespace hefir::ring
