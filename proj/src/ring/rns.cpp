#include "hefir/ring/rns.hpp"

#include <algorithm>
#include <string>

#include "hefir/common/errors.hpp"
#include "hefir/ring/modarith.hpp"

namespace hefir::ring {

PrimeModulus::PrimeModulus(uint64_t v, std::size_t n) : value(v), ntt(v, n) {}

namespace {

uint64_t mix(uint64_t h, uint64_t v) {
  // splitmix64 finalizer folded into a running hash
  h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  h ^= h >> 30;
  h *= 0xbf58476d1ce4e5b9ULL;
  h ^= h >> 27;
  h *= 0x94d049bb133111ebULL;
  return h ^ (h >> 31);
}

}  // namespace

RnsContext::RnsContext(std::size_t n, std::vector<uint64_t> primes) : n_(n) {
  if (primes.empty()) throw ParameterError("RNS context needs at least one prime");
  for (std::size_t i = 0; i < primes.size(); ++i) {
    for (std::size_t j = i + 1; j < primes.size(); ++j) {
      if (primes[i] == primes[j]) throw ParameterError("RNS primes must be pairwise distinct");
    }
    if (!is_prime(primes[i])) {
      throw ParameterError("RNS modulus " + std::to_string(primes[i]) + " is not prime");
    }
  }
  primes_.reserve(primes.size());
  for (uint64_t p : primes) primes_.emplace_back(p, n);

  q_ = 1;
  for (uint64_t p : primes) q_ *= mpz_class(std::to_string(p));
  half_q_ = q_ / 2;

  crt_basis_.reserve(primes.size());
  for (uint64_t p : primes) {
    mpz_class punctured = q_ / mpz_class(std::to_string(p));
    uint64_t punctured_mod = mpz_fdiv_ui(punctured.get_mpz_t(), p);
    uint64_t inverse = inv_mod(punctured_mod, p);
    mpz_class basis = punctured * mpz_class(std::to_string(inverse));
    basis %= q_;
    crt_basis_.push_back(basis);
  }

  fingerprint_ = mix(0x48464952ULL, n);
  for (uint64_t p : primes) fingerprint_ = mix(fingerprint_, p);
}

std::shared_ptr<const RnsContext> RnsContext::create(std::size_t n, std::vector<uint64_t> primes) {
  return std::shared_ptr<const RnsContext>(new RnsContext(n, std::move(primes)));
}

std::vector<uint64_t> RnsContext::prime_values() const {
  std::vector<uint64_t> out;
  out.reserve(primes_.size());
  for (const auto& p : primes_) out.push_back(p.value);
  return out;
}

bool RnsContext::same_as(const RnsContext& other) const noexcept {
  if (this == &other) return true;
  if (n_ != other.n_ || primes_.size() != other.primes_.size()) return false;
  for (std::size_t i = 0; i < primes_.size(); ++i) {
    if (primes_[i].value != other.primes_[i].value) return false;
  }
  return true;
}

void RnsContext::reconstruct(const uint64_t* residues, std::size_t stride, mpz_t out) const {
  mpz_set_ui(out, 0);
  for (std::size_t i = 0; i < primes_.size(); ++i) {
    mpz_addmul_ui(out, crt_basis_[i].get_mpz_t(), residues[i * stride]);
  }
  mpz_tdiv_r(out, out, q_.get_mpz_t());
}

void center(mpz_t value, const RnsContext& ctx) {
  if (mpz_cmp(value, ctx.half_modulus().get_mpz_t()) > 0) {
    mpz_sub(value, value, ctx.modulus().get_mpz_t());
  }
}

RingElem::RingElem(ContextPtr ctx, Domain domain)
    : ctx_(std::move(ctx)), domain_(domain), data_(ctx_->prime_count() * ctx_->degree(), 0) {}

std::span<uint64_t> RingElem::residues(std::size_t i) {
  const std::size_t n = ctx_->degree();
  return {data_.data() + i * n, n};
}

std::span<const uint64_t> RingElem::residues(std::size_t i) const {
  const std::size_t n = ctx_->degree();
  return {data_.data() + i * n, n};
}

RingElem RingElem::from_signed(ContextPtr ctx, std::span<const int64_t> coeffs) {
  RingElem out(ctx, Domain::Coefficient);
  const std::size_t n = ctx->degree();
  if (coeffs.size() > n) throw ParameterError("too many coefficients for ring degree");
  for (std::size_t i = 0; i < ctx->prime_count(); ++i) {
    const uint64_t p = ctx->prime(i).value;
    auto r = out.residues(i);
    for (std::size_t j = 0; j < coeffs.size(); ++j) {
      const int64_t v = coeffs[j];
      const uint64_t mag = static_cast<uint64_t>(v < 0 ? -(v + 1) : v) + (v < 0 ? 1 : 0);
      const uint64_t red = mag % p;
      r[j] = v < 0 ? neg_mod(red, p) : red;
    }
  }
  return out;
}

RingElem RingElem::constant(ContextPtr ctx, int64_t value, Domain domain) {
  RingElem out(ctx, Domain::Coefficient);
  const std::size_t n = ctx->degree();
  for (std::size_t i = 0; i < ctx->prime_count(); ++i) {
    const uint64_t p = ctx->prime(i).value;
    const uint64_t mag = static_cast<uint64_t>(value < 0 ? -(value + 1) : value) + (value < 0 ? 1 : 0);
    const uint64_t red = value < 0 ? neg_mod(mag % p, p) : mag % p;
    auto r = out.residues(i);
    if (domain == Domain::Ntt) {
      // a constant evaluates to itself at every root
      std::fill(r.begin(), r.end(), red);
    } else {
      r[0] = red;
    }
  }
  (void)n;
  out.domain_ = domain;
  return out;
}

void RingElem::to_ntt() {
  if (domain_ != Domain::Coefficient) throw DomainError("ntt_forward expects a coefficient-domain element");
  for (std::size_t i = 0; i < ctx_->prime_count(); ++i) ctx_->prime(i).ntt.forward(residues(i));
  domain_ = Domain::Ntt;
}

void RingElem::to_coefficient() {
  if (domain_ != Domain::Ntt) throw DomainError("ntt_inverse expects an NTT-domain element");
  for (std::size_t i = 0; i < ctx_->prime_count(); ++i) ctx_->prime(i).ntt.inverse(residues(i));
  domain_ = Domain::Coefficient;
}

void RingElem::require_compatible(const RingElem& other) const {
  if (!ctx_ || !other.ctx_ || !ctx_->same_as(*other.ctx_)) {
    throw ParameterError("ring elements belong to different contexts");
  }
  if (domain_ != other.domain_) throw DomainError("ring elements are in different domains");
}

RingElem& RingElem::operator+=(const RingElem& other) {
  require_compatible(other);
  const std::size_t n = ctx_->degree();
  for (std::size_t i = 0; i < ctx_->prime_count(); ++i) {
    const uint64_t p = ctx_->prime(i).value;
    uint64_t* a = data_.data() + i * n;
    const uint64_t* b = other.data_.data() + i * n;
    for (std::size_t j = 0; j < n; ++j) a[j] = add_mod(a[j], b[j], p);
  }
  return *this;
}

RingElem& RingElem::operator-=(const RingElem& other) {
  require_compatible(other);
  const std::size_t n = ctx_->degree();
  for (std::size_t i = 0; i < ctx_->prime_count(); ++i) {
    const uint64_t p = ctx_->prime(i).value;
    uint64_t* a = data_.data() + i * n;
    const uint64_t* b = other.data_.data() + i * n;
    for (std::size_t j = 0; j < n; ++j) a[j] = sub_mod(a[j], b[j], p);
  }
  return *this;
}

RingElem& RingElem::negate() {
  const std::size_t n = ctx_->degree();
  for (std::size_t i = 0; i < ctx_->prime_count(); ++i) {
    const uint64_t p = ctx_->prime(i).value;
    uint64_t* a = data_.data() + i * n;
    for (std::size_t j = 0; j < n; ++j) a[j] = neg_mod(a[j], p);
  }
  return *this;
}

RingElem& RingElem::multiply_scalar(std::span<const uint64_t> scalar) {
  if (scalar.size() != ctx_->prime_count()) throw ParameterError("scalar residue count mismatch");
  const std::size_t n = ctx_->degree();
  for (std::size_t i = 0; i < ctx_->prime_count(); ++i) {
    const uint64_t p = ctx_->prime(i).value;
    const uint64_t w = scalar[i];
    const uint64_t wq = shoup_quotient(w, p);
    uint64_t* a = data_.data() + i * n;
    for (std::size_t j = 0; j < n; ++j) a[j] = mul_mod_shoup(a[j], w, wq, p);
  }
  return *this;
}

RingElem& RingElem::multiply_scalar(int64_t scalar) {
  std::vector<uint64_t> residues(ctx_->prime_count());
  const uint64_t mag = static_cast<uint64_t>(scalar < 0 ? -(scalar + 1) : scalar) + (scalar < 0 ? 1 : 0);
  for (std::size_t i = 0; i < residues.size(); ++i) {
    const uint64_t p = ctx_->prime(i).value;
    residues[i] = scalar < 0 ? neg_mod(mag % p, p) : mag % p;
  }
  return multiply_scalar(residues);
}

void RingElem::add_scaled(const RingElem& x, std::span<const uint64_t> scalar) {
  require_compatible(x);
  if (scalar.size() != ctx_->prime_count()) throw ParameterError("scalar residue count mismatch");
  const std::size_t n = ctx_->degree();
  for (std::size_t i = 0; i < ctx_->prime_count(); ++i) {
    const uint64_t p = ctx_->prime(i).value;
    const uint64_t w = scalar[i];
    const uint64_t wq = shoup_quotient(w, p);
    uint64_t* acc = data_.data() + i * n;
    const uint64_t* a = x.data_.data() + i * n;
    for (std::size_t j = 0; j < n; ++j) acc[j] = add_mod(acc[j], mul_mod_shoup(a[j], w, wq, p), p);
  }
}

void RingElem::fma_pointwise(const RingElem& a, const RingElem& b) {
  require_compatible(a);
  require_compatible(b);
  if (domain_ != Domain::Ntt) throw DomainError("pointwise product requires NTT domain");
  const std::size_t n = ctx_->degree();
  for (std::size_t i = 0; i < ctx_->prime_count(); ++i) {
    const uint64_t p = ctx_->prime(i).value;
    uint64_t* acc = data_.data() + i * n;
    const uint64_t* x = a.data_.data() + i * n;
    const uint64_t* y = b.data_.data() + i * n;
    for (std::size_t j = 0; j < n; ++j) acc[j] = add_mod(acc[j], mul_mod(x[j], y[j], p), p);
  }
}

bool RingElem::operator==(const RingElem& other) const {
  if (!ctx_ || !other.ctx_) return !ctx_ && !other.ctx_;
  return ctx_->same_as(*other.ctx_) && domain_ == other.domain_ && data_ == other.data_;
}

bool RingElem::is_zero() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](uint64_t x) { return x == 0; });
}

RingElem ntt_forward(RingElem e) {
  e.to_ntt();
  return e;
}

RingElem ntt_inverse(RingElem e) {
  e.to_coefficient();
  return e;
}

RingElem poly_add(const RingElem& a, const RingElem& b) {
  RingElem out = a;
  out += b;
  return out;
}

RingElem poly_sub(const RingElem& a, const RingElem& b) {
  RingElem out = a;
  out -= b;
  return out;
}

RingElem poly_neg(const RingElem& a) {
  RingElem out = a;
  out.negate();
  return out;
}

RingElem poly_mul(const RingElem& a, const RingElem& b) {
  if (!a.context() || !b.context() || !a.context()->same_as(*b.context())) {
    throw ParameterError("poly_mul: ring elements belong to different contexts");
  }
  const Domain result_domain = a.domain();
  RingElem x = a.domain() == Domain::Ntt ? a : ntt_forward(a);
  RingElem y = b.domain() == Domain::Ntt ? b : ntt_forward(b);
  RingElem out(a.context(), Domain::Ntt);
  out.fma_pointwise(x, y);
  if (result_domain == Domain::Coefficient) out.to_coefficient();
  return out;
}

BigPoly crt_lift(const RingElem& e) {
  if (e.domain() != Domain::Coefficient) throw DomainError("crt_lift expects a coefficient-domain element");
  const auto& ctx = *e.context();
  const std::size_t n = ctx.degree();
  BigPoly out;
  out.coeffs.resize(n);
  const uint64_t* base = e.data().data();
  for (std::size_t j = 0; j < n; ++j) ctx.reconstruct(base + j, n, out.coeffs[j].get_mpz_t());
  return out;
}

RingElem crt_reduce(const BigPoly& poly, ContextPtr ctx) {
  const std::size_t n = ctx->degree();
  if (poly.coeffs.size() != n) throw ParameterError("BigPoly length differs from ring degree");
  RingElem out(ctx, Domain::Coefficient);
  for (std::size_t i = 0; i < ctx->prime_count(); ++i) {
    const uint64_t p = ctx->prime(i).value;
    auto r = out.residues(i);
    for (std::size_t j = 0; j < n; ++j) r[j] = mpz_fdiv_ui(poly.coeffs[j].get_mpz_t(), p);
  }
  return out;
}

}  // namespace hefir::ring
