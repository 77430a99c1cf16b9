#pragma once

#include <gmpxx.h>

#include <cstdint>
#include <memory>
#include <vector>

#include "hefir/ring/rns.hpp"
#include "hefir/ring/sampling.hpp"

namespace hefir::bfv {

using ring::ContextPtr;
using ring::Domain;
using ring::Prng;
using ring::RingElem;

/// Scheme parameters: ciphertext ring, plaintext modulus t and relinearization base.
///
/// Holds an extended RNS basis (q primes followed by auxiliary primes) large
/// enough to carry the exact tensor product of two ciphertexts.
class BfvParams {
 public:
  static std::shared_ptr<const BfvParams> create(std::size_t n, std::vector<uint64_t> q_primes,
                                                 uint64_t t, int depth = 0, int security = 0,
                                                 int relin_base_bits = 16);

  const ContextPtr& context() const noexcept { return ctx_; }
  const ContextPtr& extended_context() const noexcept { return ext_ctx_; }
  std::size_t degree() const noexcept { return ctx_->degree(); }
  uint64_t plain_modulus() const noexcept { return t_; }
  const mpz_class& delta() const noexcept { return delta_; }  // floor(q / t)
  const std::vector<uint64_t>& delta_residues() const noexcept { return delta_rns_; }
  int relin_base_bits() const noexcept { return w_bits_; }
  std::size_t relin_length() const noexcept { return relin_len_; }  // l; the key has l + 1 parts
  int depth() const noexcept { return depth_; }
  int security() const noexcept { return security_; }
  uint64_t fingerprint() const noexcept { return fingerprint_; }

 private:
  BfvParams() = default;

  ContextPtr ctx_;
  ContextPtr ext_ctx_;
  uint64_t t_ = 0;
  mpz_class delta_;
  std::vector<uint64_t> delta_rns_;
  int w_bits_ = 16;
  std::size_t relin_len_ = 0;
  int depth_ = 0;
  int security_ = 0;
  uint64_t fingerprint_ = 0;
};

using ParamsPtr = std::shared_ptr<const BfvParams>;

/// Polynomial in R_t, coefficients in [0, t).
struct Plaintext {
  std::vector<uint64_t> coeffs;

  static Plaintext constant(std::size_t n, uint64_t value);
  bool is_constant() const noexcept;
  bool operator==(const Plaintext&) const = default;
};

struct SecretKey {
  ParamsPtr params;
  RingElem s;      // coefficient domain, binary
  RingElem s_ntt;
};

struct PublicKey {
  ParamsPtr params;
  RingElem b;  // NTT domain, b = e - a*s
  RingElem a;  // NTT domain
};

struct RelinKey {
  ParamsPtr params;
  // entry i holds (w^i s^2 - (a_i s + e_i), a_i), both in the NTT domain
  std::vector<std::pair<RingElem, RingElem>> parts;
};

struct KeySet {
  SecretKey secret;
  PublicKey public_key;
  RelinKey relin;
};

/// Two or three coefficient-domain ring elements under a fixed parameter set.
struct Ciphertext {
  ParamsPtr params;
  std::vector<RingElem> parts;
  bool is_product = false;  // output of a multiplication

  std::size_t size() const noexcept { return parts.size(); }
};

KeySet keygen(const ParamsPtr& params, Prng& prng);
// Rebuilds the public and relinearization keys for a known secret.
KeySet keygen_from_secret(const SecretKey& sk, Prng& prng);
SecretKey make_secret_key(const ParamsPtr& params, const RingElem& s);

Ciphertext encrypt(const PublicKey& pk, const Plaintext& pt, Prng& prng);
Plaintext decrypt(const SecretKey& sk, const Ciphertext& ct);

Ciphertext hadd(const Ciphertext& a, const Ciphertext& b);
Ciphertext hsub(const Ciphertext& a, const Ciphertext& b);
Ciphertext hadd_plain(const Ciphertext& c, const Plaintext& pt);
Ciphertext hmult_plain(const Ciphertext& c, const Plaintext& pt);
// Same as hmult_plain with a constant plaintext; value is a signed integer taken mod t.
Ciphertext hmult_scalar(const Ciphertext& c, int64_t value);
void hadd_inplace(Ciphertext& acc, const Ciphertext& b);
// acc += c * value without materializing the product.
void hmult_scalar_accumulate(Ciphertext& acc, const Ciphertext& c, int64_t value);
// Trivial encryption of zero (no noise), the additive identity.
Ciphertext zero_ciphertext(const ParamsPtr& params);

// Exact tensor product, scaled by t/q; three parts, no relinearization.
Ciphertext multiply_raw(const Ciphertext& a, const Ciphertext& b);
Ciphertext square_raw(const Ciphertext& a);
Ciphertext relinearize(const Ciphertext& c, const RelinKey& rlk);
Ciphertext hmult(const Ciphertext& a, const Ciphertext& b, const RelinKey& rlk);
Ciphertext hsquare(const Ciphertext& a, const RelinKey& rlk);

// Remaining headroom in bits before decryption fails; 0 once exhausted.
int noise_budget(const SecretKey& sk, const Ciphertext& ct);
// Infinity norm of the decryption noise as a multiprecision integer.
mpz_class noise_norm(const SecretKey& sk, const Ciphertext& ct);

// Centered representative of u mod t in (-t/2, t/2].
int64_t center_plain(uint64_t u, uint64_t t) noexcept;
// Signed v reduced into [0, t).
uint64_t reduce_plain(int64_t v, uint64_t t) noexcept;

}  // namespace hefir::bfv
