#include "hefir/codec/codec.hpp"

#include <cmath>
#include <numeric>

#include "hefir/common/errors.hpp"
#include "hefir/ring/modarith.hpp"

namespace hefir::codec {

namespace {

mpz_class mpz_from_u64(uint64_t v) {
  mpz_class z;
  mpz_import(z.get_mpz_t(), 1, -1, sizeof v, 0, 0, &v);
  return z;
}

}  // namespace

int64_t encode_scalar(double x, int64_t scale) {
  if (scale < 1) throw ParameterError("scale must be positive");
  return std::llround(x * static_cast<double>(scale));
}

double decode_scalar(int64_t v, int64_t scale) {
  if (scale < 1) throw ParameterError("scale must be positive");
  return static_cast<double>(v) / static_cast<double>(scale);
}

uint64_t to_modular(int64_t v, uint64_t t) {
  const uint64_t mag = v < 0 ? static_cast<uint64_t>(-(v + 1)) + 1 : static_cast<uint64_t>(v);
  if (2 * static_cast<unsigned __int128>(mag) >= t) {
    throw OverflowError("value " + std::to_string(v) + " does not fit in the centered range of " +
                        std::to_string(t));
  }
  return v < 0 ? t - mag : mag;
}

mpz_class to_modular(const mpz_class& v, const mpz_class& t) {
  if (2 * abs(v) >= t) throw OverflowError("value does not fit in the centered range of t");
  return v < 0 ? mpz_class(t + v) : v;
}

int64_t from_modular(uint64_t u, uint64_t t) {
  if (u >= t) throw ParameterError("residue not below its modulus");
  return u > t / 2 ? -static_cast<int64_t>(t - u) : static_cast<int64_t>(u);
}

mpz_class from_modular(const mpz_class& u, const mpz_class& t) {
  if (u < 0 || u >= t) throw ParameterError("residue not below its modulus");
  return u > t / 2 ? mpz_class(u - t) : u;
}

CrtSystem::CrtSystem(std::vector<uint64_t> moduli) : moduli_(std::move(moduli)), product_(1) {
  if (moduli_.empty()) throw ParameterError("CRT system needs at least one modulus");
  for (std::size_t i = 0; i < moduli_.size(); ++i) {
    if (moduli_[i] < 2) throw ParameterError("CRT modulus must be at least 2");
    for (std::size_t j = i + 1; j < moduli_.size(); ++j) {
      if (std::gcd(moduli_[i], moduli_[j]) != 1) throw ParameterError("CRT moduli must be pairwise coprime");
    }
    product_ *= mpz_from_u64(moduli_[i]);
  }
  for (uint64_t t : moduli_) {
    const mpz_class punctured = product_ / mpz_from_u64(t);
    const uint64_t inv = ring::inv_mod(mpz_fdiv_ui(punctured.get_mpz_t(), t), t);
    basis_.push_back(punctured * mpz_from_u64(inv));
  }
}

std::vector<uint64_t> CrtSystem::icrt(const mpz_class& m) const {
  std::vector<uint64_t> out;
  out.reserve(moduli_.size());
  for (uint64_t t : moduli_) out.push_back(mpz_fdiv_ui(m.get_mpz_t(), t));
  return out;
}

mpz_class CrtSystem::reconstruct(const std::vector<uint64_t>& residues) const {
  if (residues.size() != moduli_.size()) {
    throw IncompleteResult("expected " + std::to_string(moduli_.size()) + " CRT residues, got " +
                           std::to_string(residues.size()));
  }
  mpz_class acc = 0;
  for (std::size_t i = 0; i < residues.size(); ++i) {
    if (residues[i] >= moduli_[i]) throw ParameterError("CRT residue not below its modulus");
    acc += basis_[i] * mpz_from_u64(residues[i]);
  }
  mpz_mod(acc.get_mpz_t(), acc.get_mpz_t(), product_.get_mpz_t());
  return acc;
}

mpz_class CrtSystem::reconstruct_signed(const std::vector<uint64_t>& residues) const {
  return from_modular(reconstruct(residues), product_);
}

ScaleTracker::ScaleTracker(mpz_class plain_modulus, mpz_class input_scale, std::vector<Interval> input)
    : t_(std::move(plain_modulus)), scale_(std::move(input_scale)), intervals_(std::move(input)) {
  check("input");
}

mpz_class ScaleTracker::bound() const {
  mpz_class b = 0;
  for (const auto& iv : intervals_) {
    const mpz_class m = iv.magnitude();
    if (m > b) b = m;
  }
  return b;
}

void ScaleTracker::check(const std::string& layer) {
  const mpz_class b = bound();
  history_.push_back(b);
  if (2 * b >= t_) {
    throw CapacityError("layer '" + layer + "' can reach magnitude " + b.get_str() +
                        ", which does not fit below T/2 for T = " + t_.get_str());
  }
}

void ScaleTracker::linear(const std::string& layer, int64_t weight_scale,
                          const std::vector<std::vector<WeightTap>>& taps, const std::vector<int64_t>& bias,
                          bool include_zero, bool unknown_sign) {
  std::vector<Interval> in = intervals_;
  for (auto& iv : in) {
    if (include_zero) {
      if (iv.lo > 0) iv.lo = 0;
      if (iv.hi < 0) iv.hi = 0;
    }
    if (unknown_sign) {
      const mpz_class m = iv.magnitude();
      iv = {-m, m};
    }
  }
  std::vector<Interval> out(taps.size(), Interval{0, 0});
  for (std::size_t o = 0; o < taps.size(); ++o) {
    for (const auto& tap : taps[o]) {
      if (tap.channel >= in.size()) throw ShapeError("tracker tap refers to a missing channel");
      const mpz_class w = static_cast<long>(tap.weight);
      const auto& iv = in[tap.channel];
      if (w >= 0) {
        out[o].lo += w * iv.lo;
        out[o].hi += w * iv.hi;
      } else {
        out[o].lo += w * iv.hi;
        out[o].hi += w * iv.lo;
      }
    }
    if (!bias.empty()) {
      out[o].lo += static_cast<long>(bias.at(o));
      out[o].hi += static_cast<long>(bias.at(o));
    }
  }
  intervals_ = std::move(out);
  scale_ *= static_cast<long>(weight_scale);
  check(layer);
}

void ScaleTracker::square(const std::string& layer) {
  for (auto& iv : intervals_) {
    const mpz_class lo2 = iv.lo * iv.lo, hi2 = iv.hi * iv.hi;
    if (iv.lo >= 0) {
      iv = {lo2, hi2};
    } else if (iv.hi <= 0) {
      iv = {hi2, lo2};
    } else {
      iv = {0, lo2 > hi2 ? lo2 : hi2};
    }
  }
  scale_ *= scale_;
  check(layer);
}

void ScaleTracker::pool(const std::string& layer, int64_t window) {
  for (auto& iv : intervals_) {
    iv.lo *= static_cast<long>(window);
    iv.hi *= static_cast<long>(window);
  }
  scale_ *= static_cast<long>(window);
  check(layer);
}

}  // namespace hefir::codec
