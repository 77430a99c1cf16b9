#pragma once

#include <gmpxx.h>

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "hefir/ring/ntt.hpp"

namespace hefir::ring {

/// One RNS channel of q: an NTT-friendly prime with its transform tables.
struct PrimeModulus {
  explicit PrimeModulus(uint64_t value, std::size_t n);

  uint64_t value;
  NttTables ntt;

  uint64_t root() const noexcept { return ntt.root(); }
};

/// Ring Z_q[X]/(X^N + 1) with q a product of word-sized primes.
///
/// Immutable after construction; share it through shared_ptr across threads.
class RnsContext {
 public:
  static std::shared_ptr<const RnsContext> create(std::size_t n, std::vector<uint64_t> primes);

  std::size_t degree() const noexcept { return n_; }
  std::size_t prime_count() const noexcept { return primes_.size(); }
  const PrimeModulus& prime(std::size_t i) const { return primes_[i]; }
  std::vector<uint64_t> prime_values() const;

  const mpz_class& modulus() const noexcept { return q_; }
  const mpz_class& half_modulus() const noexcept { return half_q_; }
  std::size_t modulus_bits() const noexcept { return mpz_sizeinbase(q_.get_mpz_t(), 2); }

  // Hash of (N, primes); equal fingerprints mean interchangeable contexts.
  uint64_t fingerprint() const noexcept { return fingerprint_; }
  bool same_as(const RnsContext& other) const noexcept;

  // CRT reconstruction of one coefficient: out = value in [0, q).
  // `residues` are read with the given stride (N for a RingElem layout).
  void reconstruct(const uint64_t* residues, std::size_t stride, mpz_t out) const;

 private:
  RnsContext(std::size_t n, std::vector<uint64_t> primes);

  std::size_t n_;
  std::vector<PrimeModulus> primes_;
  mpz_class q_;
  mpz_class half_q_;
  std::vector<mpz_class> crt_basis_;  // (q/p_i) * ((q/p_i)^-1 mod p_i)
  uint64_t fingerprint_;
};

using ContextPtr = std::shared_ptr<const RnsContext>;

enum class Domain { Coefficient, Ntt };

/// Element of R_q in residue form, one length-N array per prime.
class RingElem {
 public:
  RingElem() = default;
  RingElem(ContextPtr ctx, Domain domain);  // zero element

  const ContextPtr& context() const noexcept { return ctx_; }
  Domain domain() const noexcept { return domain_; }
  std::size_t degree() const noexcept { return ctx_->degree(); }
  std::size_t prime_count() const noexcept { return ctx_->prime_count(); }

  std::span<uint64_t> residues(std::size_t prime_index);
  std::span<const uint64_t> residues(std::size_t prime_index) const;
  std::span<uint64_t> data() noexcept { return data_; }
  std::span<const uint64_t> data() const noexcept { return data_; }

  // Sets every residue channel to the integer v (negative v wraps to p - |v|).
  static RingElem from_signed(ContextPtr ctx, std::span<const int64_t> coeffs);
  static RingElem constant(ContextPtr ctx, int64_t value, Domain domain = Domain::Coefficient);

  void to_ntt();
  void to_coefficient();

  RingElem& operator+=(const RingElem& other);
  RingElem& operator-=(const RingElem& other);
  RingElem& negate();
  // Multiplies by an integer constant given per prime as its residue.
  RingElem& multiply_scalar(std::span<const uint64_t> scalar_residues);
  RingElem& multiply_scalar(int64_t scalar);
  // this += x * scalar, scalar given per prime as its residue; any matching domain.
  void add_scaled(const RingElem& x, std::span<const uint64_t> scalar_residues);
  // this += a ⊙ b, all three in the NTT domain.
  void fma_pointwise(const RingElem& a, const RingElem& b);

  bool operator==(const RingElem& other) const;
  bool is_zero() const noexcept;

 private:
  void require_compatible(const RingElem& other) const;

  ContextPtr ctx_;
  Domain domain_ = Domain::Coefficient;
  std::vector<uint64_t> data_;  // prime-major: data_[i*N + j]
};

RingElem ntt_forward(RingElem e);
RingElem ntt_inverse(RingElem e);

RingElem poly_add(const RingElem& a, const RingElem& b);
RingElem poly_sub(const RingElem& a, const RingElem& b);
RingElem poly_neg(const RingElem& a);
// Negacyclic product; the result is in the domain of `a`.
RingElem poly_mul(const RingElem& a, const RingElem& b);

/// Coefficient vector of multiprecision integers (CRT-lifted RingElem).
struct BigPoly {
  std::vector<mpz_class> coeffs;

  bool operator==(const BigPoly&) const = default;
};

// Each coefficient reconstructed into [0, q).
BigPoly crt_lift(const RingElem& e);
// Reduces arbitrary (possibly negative) integers into the residues of ctx.
RingElem crt_reduce(const BigPoly& p, ContextPtr ctx);

// Centered representative in (-q/2, q/2].
void center(mpz_t value, const RnsContext& ctx);

}  // namespace hefir::ring
