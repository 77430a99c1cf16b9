#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace hefir::ring {

/// Negacyclic NTT over Z_p for a single prime p ≡ 1 (mod 2N).
///
/// forward() maps coefficients a_0..a_{N-1} to evaluations in bit-reversed
/// order: output[k] = a(psi^(2*bitrev(k)+1)), where psi is the primitive
/// 2N-th root held by the table. inverse() undoes it exactly.
class NttTables {
 public:
  NttTables(uint64_t modulus, std::size_t n);

  uint64_t modulus() const noexcept { return p_; }
  uint64_t root() const noexcept { return psi_; }
  std::size_t size() const noexcept { return n_; }
  int log_size() const noexcept { return log_n_; }

  void forward(std::span<uint64_t> a) const;
  void inverse(std::span<uint64_t> a) const;

  // Index in forward() output that holds the evaluation at psi^(2*i+1).
  std::size_t evaluation_index(std::size_t i) const noexcept;

 private:
  uint64_t p_;
  std::size_t n_;
  int log_n_;
  uint64_t psi_;
  uint64_t n_inv_;
  uint64_t n_inv_quot_;
  std::vector<uint64_t> roots_;       // psi^bitrev(k)
  std::vector<uint64_t> roots_quot_;
  std::vector<uint64_t> inv_roots_;   // psi^-bitrev(k)
  std::vector<uint64_t> inv_roots_quot_;
};

}  // namespace hefir::ring
