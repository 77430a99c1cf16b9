#include "hefir/bfv/bfv.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

#include "hefir/common/errors.hpp"
#include "hefir/ring/modarith.hpp"

namespace hefir::bfv {

using ring::crt_lift;
using ring::RnsContext;

namespace {

uint64_t hash_mix(uint64_t h, uint64_t v) {
  h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  h *= 0xbf58476d1ce4e5b9ULL;
  return h ^ (h >> 29);
}

void require_same(const Ciphertext& a, const Ciphertext& b) {
  if (!a.params || !b.params) throw ParameterError("ciphertext without parameters");
  if (a.params->fingerprint() != b.params->fingerprint()) {
    throw ParameterError("ciphertexts were produced under different parameters");
  }
}

void require_parts(const Ciphertext& c) {
  if (c.parts.size() < 2 || c.parts.size() > 3) {
    throw ParameterError("ciphertext must have 2 or 3 parts, has " + std::to_string(c.parts.size()));
  }
}

RingElem plain_to_ring(const ContextPtr& ctx, const Plaintext& pt, uint64_t t, bool centered) {
  if (pt.coeffs.size() != ctx->degree()) {
    throw EncodingError("plaintext length " + std::to_string(pt.coeffs.size()) + " differs from N = " +
                        std::to_string(ctx->degree()));
  }
  std::vector<int64_t> v(pt.coeffs.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (pt.coeffs[i] >= t) throw EncodingError("plaintext coefficient not below t");
    v[i] = centered ? center_plain(pt.coeffs[i], t) : static_cast<int64_t>(pt.coeffs[i]);
  }
  return RingElem::from_signed(ctx, v);
}

// Centered lift of a q-basis element into the extended basis.
RingElem lift_to_extended(const BfvParams& params, const RingElem& x) {
  const auto& q = *params.context();
  const auto& ext = *params.extended_context();
  const std::size_t n = q.degree();
  const std::size_t kq = q.prime_count();
  RingElem out(params.extended_context(), Domain::Coefficient);
  auto src = x.data();
  auto dst = out.data();
  std::copy(src.begin(), src.end(), dst.begin());
  mpz_t v;
  mpz_init2(v, q.modulus_bits() + 64);
  for (std::size_t j = 0; j < n; ++j) {
    q.reconstruct(src.data() + j, n, v);
    ring::center(v, q);
    for (std::size_t i = kq; i < ext.prime_count(); ++i) {
      dst[i * n + j] = mpz_fdiv_ui(v, ext.prime(i).value);
    }
  }
  mpz_clear(v);
  return out;
}

// round(t * x / q) for each centered coefficient x of an extended-basis element,
// reduced into the q basis.
RingElem scale_to_q(const BfvParams& params, const RingElem& x) {
  const auto& q = *params.context();
  const auto& ext = *params.extended_context();
  const std::size_t n = q.degree();
  RingElem out(params.context(), Domain::Coefficient);
  auto src = x.data();
  auto dst = out.data();
  const mpz_srcptr qz = q.modulus().get_mpz_t();
  mpz_class q2 = q.modulus() * 2;
  mpz_t v, num;
  mpz_init2(v, ext.modulus_bits() + 128);
  mpz_init2(num, ext.modulus_bits() + 128);
  for (std::size_t j = 0; j < n; ++j) {
    ext.reconstruct(src.data() + j, n, v);
    ring::center(v, ext);
    const bool negative = mpz_sgn(v) < 0;
    mpz_abs(v, v);
    mpz_mul_ui(num, v, params.plain_modulus());
    mpz_mul_2exp(num, num, 1);
    mpz_add(num, num, qz);
    mpz_fdiv_q(num, num, q2.get_mpz_t());
    if (negative) mpz_neg(num, num);
    for (std::size_t i = 0; i < q.prime_count(); ++i) {
      dst[i * n + j] = mpz_fdiv_ui(num, q.prime(i).value);
    }
  }
  mpz_clear(v);
  mpz_clear(num);
  return out;
}

// c0 + c1 s (+ c2 s^2) in the coefficient domain.
RingElem decryption_phase(const SecretKey& sk, const Ciphertext& ct) {
  require_parts(ct);
  if (!sk.params || sk.params->fingerprint() != ct.params->fingerprint()) {
    throw ParameterError("secret key does not match ciphertext parameters");
  }
  RingElem acc = ring::ntt_forward(ct.parts[0]);
  RingElem c1 = ring::ntt_forward(ct.parts[1]);
  acc.fma_pointwise(c1, sk.s_ntt);
  if (ct.parts.size() == 3) {
    RingElem s2(sk.params->context(), Domain::Ntt);
    s2.fma_pointwise(sk.s_ntt, sk.s_ntt);
    RingElem c2 = ring::ntt_forward(ct.parts[2]);
    acc.fma_pointwise(c2, s2);
  }
  acc.to_coefficient();
  return acc;
}

}  // namespace

int64_t center_plain(uint64_t u, uint64_t t) noexcept {
  return u > t / 2 ? static_cast<int64_t>(u) - static_cast<int64_t>(t) : static_cast<int64_t>(u);
}

uint64_t reduce_plain(int64_t v, uint64_t t) noexcept {
  const int64_t r = v % static_cast<int64_t>(t);
  return static_cast<uint64_t>(r < 0 ? r + static_cast<int64_t>(t) : r);
}

std::shared_ptr<const BfvParams> BfvParams::create(std::size_t n, std::vector<uint64_t> q_primes,
                                                   uint64_t t, int depth, int security,
                                                   int relin_base_bits) {
  if (t < 2) throw ParameterError("plaintext modulus must be at least 2");
  if (relin_base_bits < 1 || relin_base_bits > 32) {
    throw ParameterError("relinearization base must be 2^1 .. 2^32");
  }
  auto p = std::shared_ptr<BfvParams>(new BfvParams());
  p->ctx_ = RnsContext::create(n, q_primes);
  if (mpz_class(std::to_string(t)) >= p->ctx_->modulus()) {
    throw ParameterError("plaintext modulus must be below q");
  }
  p->t_ = t;
  p->delta_ = p->ctx_->modulus() / mpz_class(std::to_string(t));
  for (std::size_t i = 0; i < p->ctx_->prime_count(); ++i) {
    p->delta_rns_.push_back(mpz_fdiv_ui(p->delta_.get_mpz_t(), p->ctx_->prime(i).value));
  }
  p->w_bits_ = relin_base_bits;
  p->relin_len_ = (p->ctx_->modulus_bits() - 1) / static_cast<std::size_t>(relin_base_bits);
  p->depth_ = depth;
  p->security_ = security;

  // the tensor product needs |coeff| < N q^2 / 2 to be exact after centering
  const int log_n = std::countr_zero(n);
  const std::size_t aux_bits = p->ctx_->modulus_bits() + static_cast<std::size_t>(log_n) + 4;
  const std::size_t aux_count = (aux_bits + 59) / 60;
  auto aux = ring::generate_ntt_primes(61, aux_count, n, q_primes);
  std::vector<uint64_t> ext = q_primes;
  ext.insert(ext.end(), aux.begin(), aux.end());
  p->ext_ctx_ = RnsContext::create(n, ext);

  p->fingerprint_ = hash_mix(hash_mix(p->ctx_->fingerprint(), t), static_cast<uint64_t>(relin_base_bits));
  return p;
}

Plaintext Plaintext::constant(std::size_t n, uint64_t value) {
  Plaintext pt;
  pt.coeffs.assign(n, 0);
  pt.coeffs[0] = value;
  return pt;
}

bool Plaintext::is_constant() const noexcept {
  return std::all_of(coeffs.begin() + (coeffs.empty() ? 0 : 1), coeffs.end(),
                     [](uint64_t c) { return c == 0; });
}

SecretKey make_secret_key(const ParamsPtr& params, const RingElem& s) {
  SecretKey sk{params, s, ring::ntt_forward(s)};
  return sk;
}

KeySet keygen_from_secret(const SecretKey& sk, Prng& prng) {
  const auto& params = sk.params;
  const auto& ctx = params->context();
  KeySet keys;
  keys.secret = sk;

  RingElem a = ring::sample_uniform(ctx, prng, Domain::Ntt);
  RingElem b = ring::ntt_forward(ring::sample_noise(ctx, prng));
  RingElem as(ctx, Domain::Ntt);
  as.fma_pointwise(a, sk.s_ntt);
  b -= as;
  keys.public_key = PublicKey{params, std::move(b), std::move(a)};

  RingElem s2(ctx, Domain::Ntt);
  s2.fma_pointwise(sk.s_ntt, sk.s_ntt);
  keys.relin.params = params;
  std::vector<uint64_t> w_pow(ctx->prime_count(), 1);
  for (std::size_t i = 0; i <= params->relin_length(); ++i) {
    RingElem ai = ring::sample_uniform(ctx, prng, Domain::Ntt);
    RingElem k0 = s2;
    k0.multiply_scalar(w_pow);
    RingElem ei = ring::ntt_forward(ring::sample_noise(ctx, prng));
    k0 -= ei;
    RingElem ais(ctx, Domain::Ntt);
    ais.fma_pointwise(ai, sk.s_ntt);
    k0 -= ais;
    keys.relin.parts.emplace_back(std::move(k0), std::move(ai));
    for (std::size_t j = 0; j < w_pow.size(); ++j) {
      const uint64_t pj = ctx->prime(j).value;
      w_pow[j] = ring::mul_mod(w_pow[j], ring::pow_mod(2, static_cast<uint64_t>(params->relin_base_bits()), pj), pj);
    }
  }
  return keys;
}

KeySet keygen(const ParamsPtr& params, Prng& prng) {
  SecretKey sk = make_secret_key(params, ring::sample_binary(params->context(), prng));
  return keygen_from_secret(sk, prng);
}

Ciphertext encrypt(const PublicKey& pk, const Plaintext& pt, Prng& prng) {
  const auto& params = pk.params;
  const auto& ctx = params->context();
  RingElem m = plain_to_ring(ctx, pt, params->plain_modulus(), false);
  m.multiply_scalar(params->delta_residues());

  RingElem r = ring::ntt_forward(ring::sample_binary(ctx, prng));
  RingElem c0(ctx, Domain::Ntt), c1(ctx, Domain::Ntt);
  c0.fma_pointwise(pk.b, r);
  c1.fma_pointwise(pk.a, r);
  c0.to_coefficient();
  c1.to_coefficient();
  c0 += ring::sample_noise(ctx, prng);
  c0 += m;
  c1 += ring::sample_noise(ctx, prng);
  Ciphertext ct;
  ct.params = params;
  ct.parts.push_back(std::move(c0));
  ct.parts.push_back(std::move(c1));
  return ct;
}

Plaintext decrypt(const SecretKey& sk, const Ciphertext& ct) {
  RingElem v = decryption_phase(sk, ct);
  const auto& q = *sk.params->context();
  const std::size_t n = q.degree();
  const uint64_t t = sk.params->plain_modulus();
  Plaintext out;
  out.coeffs.resize(n);
  mpz_class q2 = q.modulus() * 2;
  mpz_t x, num;
  mpz_init(x);
  mpz_init(num);
  auto data = v.data();
  for (std::size_t j = 0; j < n; ++j) {
    q.reconstruct(data.data() + j, n, x);
    ring::center(x, q);
    const bool negative = mpz_sgn(x) < 0;
    mpz_abs(x, x);
    mpz_mul_ui(num, x, t);
    mpz_mul_2exp(num, num, 1);
    mpz_add(num, num, q.modulus().get_mpz_t());
    mpz_fdiv_q(num, num, q2.get_mpz_t());
    if (negative) mpz_neg(num, num);
    out.coeffs[j] = mpz_fdiv_ui(num, t);
  }
  mpz_clear(x);
  mpz_clear(num);
  return out;
}

mpz_class noise_norm(const SecretKey& sk, const Ciphertext& ct) {
  const Plaintext m = decrypt(sk, ct);
  RingElem v = decryption_phase(sk, ct);
  RingElem dm = plain_to_ring(sk.params->context(), m, sk.params->plain_modulus(), false);
  dm.multiply_scalar(sk.params->delta_residues());
  v -= dm;
  const auto& q = *sk.params->context();
  const std::size_t n = q.degree();
  mpz_class best = 0;
  mpz_t x;
  mpz_init(x);
  for (std::size_t j = 0; j < n; ++j) {
    q.reconstruct(v.data().data() + j, n, x);
    ring::center(x, q);
    mpz_abs(x, x);
    if (mpz_cmp(x, best.get_mpz_t()) > 0) mpz_set(best.get_mpz_t(), x);
  }
  mpz_clear(x);
  return best;
}

int noise_budget(const SecretKey& sk, const Ciphertext& ct) {
  const mpz_class norm = noise_norm(sk, ct);
  auto log2_of = [](const mpz_class& z) {
    long exp = 0;
    const double mant = mpz_get_d_2exp(&exp, z.get_mpz_t());
    return std::log2(mant) + static_cast<double>(exp);
  };
  const double log_q = log2_of(sk.params->context()->modulus());
  const double log_t = std::log2(static_cast<double>(sk.params->plain_modulus()));
  const double log_e = norm > 1 ? log2_of(norm) : 0.0;
  const double budget = log_q - log_t - log_e - 1.0;
  return budget <= 0.0 ? 0 : static_cast<int>(std::floor(budget));
}

void hadd_inplace(Ciphertext& acc, const Ciphertext& b) {
  require_same(acc, b);
  require_parts(acc);
  require_parts(b);
  if (acc.parts.size() < b.parts.size()) {
    acc.parts.emplace_back(acc.params->context(), Domain::Coefficient);
  }
  for (std::size_t i = 0; i < b.parts.size(); ++i) acc.parts[i] += b.parts[i];
  acc.is_product = acc.is_product || b.is_product;
}

Ciphertext hadd(const Ciphertext& a, const Ciphertext& b) {
  Ciphertext out = a;
  hadd_inplace(out, b);
  return out;
}

Ciphertext hsub(const Ciphertext& a, const Ciphertext& b) {
  require_same(a, b);
  Ciphertext neg = b;
  for (auto& p : neg.parts) p.negate();
  return hadd(a, neg);
}

Ciphertext hadd_plain(const Ciphertext& c, const Plaintext& pt) {
  require_parts(c);
  const auto& params = c.params;
  RingElem m = plain_to_ring(params->context(), pt, params->plain_modulus(), false);
  m.multiply_scalar(params->delta_residues());
  Ciphertext out = c;
  out.parts[0] += m;
  return out;
}

Ciphertext hmult_scalar(const Ciphertext& c, int64_t value) {
  require_parts(c);
  const uint64_t t = c.params->plain_modulus();
  const int64_t centered = center_plain(reduce_plain(value, t), t);
  Ciphertext out = c;
  for (auto& p : out.parts) p.multiply_scalar(centered);
  return out;
}

void hmult_scalar_accumulate(Ciphertext& acc, const Ciphertext& c, int64_t value) {
  require_same(acc, c);
  require_parts(c);
  const uint64_t t = c.params->plain_modulus();
  const int64_t centered = center_plain(reduce_plain(value, t), t);
  const auto& ctx = *c.params->context();
  std::vector<uint64_t> residues(ctx.prime_count());
  const uint64_t mag = centered < 0 ? static_cast<uint64_t>(-centered) : static_cast<uint64_t>(centered);
  for (std::size_t i = 0; i < residues.size(); ++i) {
    const uint64_t p = ctx.prime(i).value;
    residues[i] = centered < 0 ? ring::neg_mod(mag % p, p) : mag % p;
  }
  while (acc.parts.size() < c.parts.size()) acc.parts.emplace_back(c.params->context(), Domain::Coefficient);
  for (std::size_t i = 0; i < c.parts.size(); ++i) acc.parts[i].add_scaled(c.parts[i], residues);
}

Ciphertext zero_ciphertext(const ParamsPtr& params) {
  Ciphertext ct;
  ct.params = params;
  ct.parts.emplace_back(params->context(), Domain::Coefficient);
  ct.parts.emplace_back(params->context(), Domain::Coefficient);
  return ct;
}

Ciphertext hmult_plain(const Ciphertext& c, const Plaintext& pt) {
  require_parts(c);
  const uint64_t t = c.params->plain_modulus();
  if (pt.coeffs.size() != c.params->degree()) throw EncodingError("plaintext length differs from N");
  if (pt.is_constant()) {
    if (pt.coeffs[0] >= t) throw EncodingError("plaintext coefficient not below t");
    return hmult_scalar(c, center_plain(pt.coeffs[0], t));
  }
  RingElem w = ring::ntt_forward(plain_to_ring(c.params->context(), pt, t, true));
  Ciphertext out = c;
  for (auto& p : out.parts) p = ring::poly_mul(p, w);
  return out;
}

Ciphertext multiply_raw(const Ciphertext& a, const Ciphertext& b) {
  require_same(a, b);
  if (a.parts.size() != 2 || b.parts.size() != 2) {
    throw ParameterError("multiplication expects relinearized (2-part) ciphertexts");
  }
  const auto& params = *a.params;
  const auto& ext = params.extended_context();
  RingElem a0 = ring::ntt_forward(lift_to_extended(params, a.parts[0]));
  RingElem a1 = ring::ntt_forward(lift_to_extended(params, a.parts[1]));
  RingElem b0 = ring::ntt_forward(lift_to_extended(params, b.parts[0]));
  RingElem b1 = ring::ntt_forward(lift_to_extended(params, b.parts[1]));
  RingElem d0(ext, Domain::Ntt), d1(ext, Domain::Ntt), d2(ext, Domain::Ntt);
  d0.fma_pointwise(a0, b0);
  d1.fma_pointwise(a0, b1);
  d1.fma_pointwise(a1, b0);
  d2.fma_pointwise(a1, b1);
  d0.to_coefficient();
  d1.to_coefficient();
  d2.to_coefficient();
  Ciphertext out;
  out.params = a.params;
  out.parts.push_back(scale_to_q(params, d0));
  out.parts.push_back(scale_to_q(params, d1));
  out.parts.push_back(scale_to_q(params, d2));
  out.is_product = true;
  return out;
}

Ciphertext square_raw(const Ciphertext& a) {
  require_parts(a);
  if (a.parts.size() != 2) throw ParameterError("squaring expects a relinearized (2-part) ciphertext");
  const auto& params = *a.params;
  const auto& ext = params.extended_context();
  RingElem a0 = ring::ntt_forward(lift_to_extended(params, a.parts[0]));
  RingElem a1 = ring::ntt_forward(lift_to_extended(params, a.parts[1]));
  RingElem d0(ext, Domain::Ntt), d1(ext, Domain::Ntt), d2(ext, Domain::Ntt);
  d0.fma_pointwise(a0, a0);
  d1.fma_pointwise(a0, a1);
  d1 += d1;
  d2.fma_pointwise(a1, a1);
  d0.to_coefficient();
  d1.to_coefficient();
  d2.to_coefficient();
  Ciphertext out;
  out.params = a.params;
  out.parts.push_back(scale_to_q(params, d0));
  out.parts.push_back(scale_to_q(params, d1));
  out.parts.push_back(scale_to_q(params, d2));
  out.is_product = true;
  return out;
}

Ciphertext relinearize(const Ciphertext& c, const RelinKey& rlk) {
  require_parts(c);
  if (c.parts.size() == 2) return c;
  if (!rlk.params || rlk.parts.empty()) throw KeyError("relinearization key missing");
  if (rlk.params->fingerprint() != c.params->fingerprint()) {
    throw ParameterError("relinearization key does not match ciphertext parameters");
  }
  const auto& params = *c.params;
  const auto& ctx = params.context();
  const std::size_t n = ctx->degree();
  const std::size_t digits = params.relin_length() + 1;
  if (rlk.parts.size() != digits) throw KeyError("relinearization key has the wrong length");
  const int w_bits = params.relin_base_bits();
  const uint64_t mask = (w_bits == 64) ? ~0ULL : ((1ULL << w_bits) - 1);

  // digit[i][j] = i-th base-w digit of coefficient j of c2 in [0, q)
  std::vector<std::vector<int64_t>> digit(digits, std::vector<int64_t>(n, 0));
  mpz_t x;
  mpz_init(x);
  const auto c2 = c.parts[2].data();
  for (std::size_t j = 0; j < n; ++j) {
    ctx->reconstruct(c2.data() + j, n, x);
    for (std::size_t i = 0; i < digits; ++i) {
      const std::size_t bit = i * static_cast<std::size_t>(w_bits);
      const std::size_t limb = bit / 64, off = bit % 64;
      uint64_t v = mpz_getlimbn(x, static_cast<mp_size_t>(limb)) >> off;
      if (off + static_cast<std::size_t>(w_bits) > 64) {
        v |= static_cast<uint64_t>(mpz_getlimbn(x, static_cast<mp_size_t>(limb + 1))) << (64 - off);
      }
      digit[i][j] = static_cast<int64_t>(v & mask);
    }
  }
  mpz_clear(x);

  RingElem acc0(ctx, Domain::Ntt), acc1(ctx, Domain::Ntt);
  for (std::size_t i = 0; i < digits; ++i) {
    RingElem d = ring::ntt_forward(RingElem::from_signed(ctx, digit[i]));
    acc0.fma_pointwise(d, rlk.parts[i].first);
    acc1.fma_pointwise(d, rlk.parts[i].second);
  }
  acc0.to_coefficient();
  acc1.to_coefficient();
  Ciphertext out;
  out.params = c.params;
  out.parts.push_back(c.parts[0]);
  out.parts.push_back(c.parts[1]);
  out.parts[0] += acc0;
  out.parts[1] += acc1;
  out.is_product = c.is_product;
  return out;
}

Ciphertext hmult(const Ciphertext& a, const Ciphertext& b, const RelinKey& rlk) {
  if (!rlk.params || rlk.parts.empty()) throw KeyError("relinearization key missing");
  const Ciphertext x = a.parts.size() == 3 ? relinearize(a, rlk) : a;
  const Ciphertext y = b.parts.size() == 3 ? relinearize(b, rlk) : b;
  return relinearize(multiply_raw(x, y), rlk);
}

Ciphertext hsquare(const Ciphertext& a, const RelinKey& rlk) {
  if (!rlk.params || rlk.parts.empty()) throw KeyError("relinearization key missing");
  const Ciphertext x = a.parts.size() == 3 ? relinearize(a, rlk) : a;
  return relinearize(square_raw(x), rlk);
}

}  // namespace hefir::bfv
