#pragma once

#include <gmpxx.h>

#include <cstdint>
#include <string>
#include <vector>

namespace hefir::codec {

// round(x * scale), ties away from zero.
int64_t encode_scalar(double x, int64_t scale);
double decode_scalar(int64_t v, int64_t scale);

// Signed value to its residue in [0, t); |v| must be below t/2.
uint64_t to_modular(int64_t v, uint64_t t);
mpz_class to_modular(const mpz_class& v, const mpz_class& t);
// Residue u in [0, t) to the signed representative: u if u <= floor(t/2), else u - t.
int64_t from_modular(uint64_t u, uint64_t t);
mpz_class from_modular(const mpz_class& u, const mpz_class& t);

/// Plaintext CRT over pairwise coprime moduli t_0..t_{r-1}.
class CrtSystem {
 public:
  explicit CrtSystem(std::vector<uint64_t> moduli);

  const std::vector<uint64_t>& moduli() const noexcept { return moduli_; }
  std::size_t size() const noexcept { return moduli_.size(); }
  const mpz_class& product() const noexcept { return product_; }

  std::vector<uint64_t> icrt(const mpz_class& m) const;
  // Residue vector to the integer in [0, T).
  mpz_class reconstruct(const std::vector<uint64_t>& residues) const;
  // Same, centered into (-T/2, T/2].
  mpz_class reconstruct_signed(const std::vector<uint64_t>& residues) const;

 private:
  std::vector<uint64_t> moduli_;
  mpz_class product_;
  std::vector<mpz_class> basis_;  // (T/t_i) * ((T/t_i)^-1 mod t_i)
};

struct Interval {
  mpz_class lo;
  mpz_class hi;

  mpz_class magnitude() const { return abs(lo) > abs(hi) ? abs(lo) : abs(hi); }
};

struct WeightTap {
  std::size_t channel;
  int64_t weight;
};

/// Per-channel worst-case value intervals and the running scale of a network.
///
/// Every update checks that the largest magnitude stays below T/2, so values
/// survive the centered lift out of Z_T.
class ScaleTracker {
 public:
  ScaleTracker(mpz_class plain_modulus, mpz_class input_scale, std::vector<Interval> input);

  const mpz_class& scale() const noexcept { return scale_; }
  const std::vector<Interval>& intervals() const noexcept { return intervals_; }
  mpz_class bound() const;  // max magnitude over channels
  const mpz_class& plain_modulus() const noexcept { return t_; }
  const std::vector<mpz_class>& layer_bounds() const noexcept { return history_; }

  // taps[o] lists the (input channel, weight) pairs summed into output channel o.
  // include_zero widens the inputs to contain 0 (padding taps); unknown_sign treats
  // each weight as +-|w|.
  void linear(const std::string& layer, int64_t weight_scale,
              const std::vector<std::vector<WeightTap>>& taps, const std::vector<int64_t>& bias = {},
              bool include_zero = false, bool unknown_sign = false);
  void square(const std::string& layer);
  void pool(const std::string& layer, int64_t window);

 private:
  void check(const std::string& layer);

  mpz_class t_;
  mpz_class scale_;
  std::vector<Interval> intervals_;
  std::vector<mpz_class> history_;
};

}  // namespace hefir::codec
