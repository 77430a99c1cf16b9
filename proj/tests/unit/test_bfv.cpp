#include <gtest/gtest.h>

#include "hefir/bfv/bfv.hpp"
#include "hefir/common/errors.hpp"
#include "hefir/ring/modarith.hpp"

using namespace hefir;
using namespace hefir::bfv;

namespace {

constexpr uint64_t kT = 5522259017729ULL;

ParamsPtr small_params(uint64_t t = kT, std::size_t n = 1024, int primes = 4) {
  return BfvParams::create(n, ring::generate_ntt_primes(62, primes, n), t);
}

struct Fixture {
  ParamsPtr params;
  KeySet keys;
  ring::Prng prng;
  Fixture(ParamsPtr p, uint64_t seed) : params(std::move(p)), prng(seed) { keys = keygen(params, prng); }

  Ciphertext enc(const Plaintext& pt) { return encrypt(keys.public_key, pt, prng); }
  Ciphertext enc_const(uint64_t v) { return enc(Plaintext::constant(params->degree(), v)); }
  Plaintext random_plain() {
    Plaintext pt;
    pt.coeffs.resize(params->degree());
    for (auto& c : pt.coeffs) c = prng.uniform(params->plain_modulus());
    return pt;
  }
};

mpz_class max_centered(const ring::RingElem& e) {
  auto lifted = ring::crt_lift(ring::ntt_inverse(e));
  mpz_class best = 0;
  for (auto& c : lifted.coeffs) {
    ring::center(c.get_mpz_t(), *e.context());
    if (abs(c) > best) best = abs(c);
  }
  return best;
}

Plaintext negacyclic_plain(const Plaintext& a, const Plaintext& b, uint64_t t) {
  const std::size_t n = a.coeffs.size();
  std::vector<unsigned __int128> acc(n, 0), neg(n, 0);
  Plaintext out;
  out.coeffs.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (a.coeffs[i] == 0) continue;
    for (std::size_t j = 0; j < n; ++j) {
      const uint64_t p = ring::mul_mod(a.coeffs[i], b.coeffs[j], t);
      const std::size_t k = (i + j) % n;
      out.coeffs[k] = (i + j < n) ? ring::add_mod(out.coeffs[k], p, t) : ring::sub_mod(out.coeffs[k], p, t);
    }
  }
  return out;
}

}  // namespace

TEST(Bfv, KeyGenerationEquations) {
  Fixture f(small_params(), 1);
  ring::RingElem check = f.keys.public_key.b;
  ring::RingElem as(f.params->context(), ring::Domain::Ntt);
  as.fma_pointwise(f.keys.public_key.a, f.keys.secret.s_ntt);
  check += as;
  EXPECT_LE(max_centered(check), ring::kNoiseBound);

  const auto& [k0, a0] = f.keys.relin.parts[0];
  ring::RingElem e0 = k0;
  ring::RingElem tmp(f.params->context(), ring::Domain::Ntt);
  tmp.fma_pointwise(a0, f.keys.secret.s_ntt);
  e0 += tmp;
  ring::RingElem s2(f.params->context(), ring::Domain::Ntt);
  s2.fma_pointwise(f.keys.secret.s_ntt, f.keys.secret.s_ntt);
  e0 -= s2;
  EXPECT_LE(max_centered(e0), ring::kNoiseBound);
  EXPECT_EQ(f.keys.relin.parts.size(), f.params->relin_length() + 1);

  for (auto c : ring::crt_lift(f.keys.secret.s).coeffs) EXPECT_TRUE(c == 0 || c == 1);

  Fixture g(f.params, 2);
  EXPECT_FALSE(g.keys.public_key.a == f.keys.public_key.a);
}

TEST(Bfv, EncryptDecryptRoundTrip) {
  Fixture f(small_params(), 3);
  for (int i = 0; i < 100; ++i) {
    auto m = f.random_plain();
    ASSERT_EQ(decrypt(f.keys.secret, f.enc(m)), m);
  }
  auto zero = Plaintext::constant(f.params->degree(), 0);
  EXPECT_EQ(decrypt(f.keys.secret, f.enc(zero)), zero);
  EXPECT_GT(noise_budget(f.keys.secret, f.enc(zero)), 100);
}

TEST(Bfv, AdditiveHomomorphism) {
  Fixture f(small_params(), 4);
  EXPECT_EQ(decrypt(f.keys.secret, hadd(f.enc_const(3), f.enc_const(4))).coeffs[0], 7u);
  auto m = f.random_plain();
  EXPECT_EQ(decrypt(f.keys.secret, hadd(f.enc(m), f.enc_const(0))), m);
  EXPECT_EQ(decrypt(f.keys.secret, hadd_plain(f.enc_const(5), Plaintext::constant(1024, 6))).coeffs[0], 11u);
  EXPECT_EQ(decrypt(f.keys.secret, hsub(f.enc_const(3), f.enc_const(5))).coeffs[0], kT - 2);

  Fixture g(small_params(3), 5);
  for (uint64_t a = 0; a < 3; ++a) {
    for (uint64_t b = 0; b < 3; ++b) {
      EXPECT_EQ(decrypt(g.keys.secret, hadd(g.enc_const(a), g.enc_const(b))).coeffs[0], (a + b) % 3);
    }
  }
}

TEST(Bfv, PlainMultiplication) {
  Fixture f(small_params(), 6);
  auto m = f.random_plain();
  EXPECT_EQ(decrypt(f.keys.secret, hmult_plain(f.enc(m), Plaintext::constant(1024, 1))), m);
  EXPECT_EQ(decrypt(f.keys.secret, hmult_plain(f.enc_const(3), Plaintext::constant(1024, 4))).coeffs[0], 12u);
  EXPECT_EQ(decrypt(f.keys.secret, hmult_scalar(f.enc_const(3), -4)).coeffs[0], kT - 12);
  EXPECT_TRUE(decrypt(f.keys.secret, hmult_plain(f.enc(m), Plaintext::constant(1024, 0))).is_constant());

  // general plaintext: small entries keep the noise low enough for a dense product
  Fixture g(small_params(65537), 7);
  for (int trial = 0; trial < 3; ++trial) {
    auto a = g.random_plain();
    auto b = g.random_plain();
    EXPECT_EQ(decrypt(g.keys.secret, hmult_plain(g.enc(a), b)), negacyclic_plain(a, b, 65537));
  }
}

TEST(Bfv, MultiplicativeHomomorphism) {
  Fixture f(small_params(), 8);
  EXPECT_EQ(decrypt(f.keys.secret, hmult(f.enc_const(3), f.enc_const(4), f.keys.relin)).coeffs[0], 12u);
  for (int i = 0; i < 10; ++i) {
    const uint64_t x = f.prng.uniform(kT);
    auto c = f.enc_const(x);
    auto sq = decrypt(f.keys.secret, hsquare(c, f.keys.relin));
    auto mul = decrypt(f.keys.secret, hmult(c, c, f.keys.relin));
    EXPECT_EQ(sq, mul);
    EXPECT_EQ(sq.coeffs[0], ring::mul_mod(x, x, kT));
  }
  auto a = f.random_plain(), b = f.random_plain();
  auto ca = f.enc(a), cb = f.enc(b);
  auto raw = multiply_raw(ca, cb);
  ASSERT_EQ(raw.size(), 3u);
  auto relin = relinearize(raw, f.keys.relin);
  ASSERT_EQ(relin.size(), 2u);
  EXPECT_EQ(decrypt(f.keys.secret, raw), decrypt(f.keys.secret, relin));
  EXPECT_EQ(decrypt(f.keys.secret, relin), negacyclic_plain(a, b, kT));
}

TEST(Bfv, PlaintextCrtExampleChannels) {
  // y = 2x + 1 at x = 4 evaluated separately mod 3 and mod 5
  const uint64_t moduli[2] = {3, 5};
  const uint64_t expected[2] = {0, 4};
  for (int ch = 0; ch < 2; ++ch) {
    Fixture f(small_params(moduli[ch], 64, 2), 10 + ch);
    auto x = f.enc_const(4 % moduli[ch]);
    auto y = hadd_plain(hmult_scalar(x, 2), Plaintext::constant(64, 1));
    EXPECT_EQ(decrypt(f.keys.secret, y).coeffs[0], expected[ch]);
  }
}

TEST(Bfv, NoiseBudgetShrinksThenDecryptionFails) {
  Fixture f(small_params(kT, 1024, 4), 12);
  auto ct = f.enc_const(3);
  uint64_t expect = 3;
  int previous = noise_budget(f.keys.secret, ct);
  bool failed = false;
  for (int i = 0; i < 6 && !failed; ++i) {
    ct = hsquare(ct, f.keys.relin);
    expect = ring::mul_mod(expect, expect, kT);
    const int budget = noise_budget(f.keys.secret, ct);
    const bool ok = decrypt(f.keys.secret, ct).coeffs[0] == expect;
    if (!ok) {
      failed = true;
      EXPECT_EQ(budget, 0);
    } else {
      EXPECT_LT(budget, previous);
    }
    previous = budget;
  }
  EXPECT_TRUE(failed);
}

TEST(Bfv, ErrorsAreReported) {
  Fixture f(small_params(), 13);
  Fixture g(small_params(65537), 14);
  EXPECT_THROW(hadd(f.enc_const(1), g.enc_const(1)), ParameterError);
  EXPECT_THROW(hsquare(f.enc_const(1), RelinKey{}), KeyError);
  EXPECT_THROW(f.enc_const(kT), EncodingError);
  EXPECT_THROW(decrypt(g.keys.secret, f.enc_const(1)), ParameterError);
  EXPECT_THROW(BfvParams::create(64, {257}, 1), ParameterError);
}
