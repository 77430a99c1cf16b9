#pragma once

#include <cstdint>
#include <vector>

#include "hefir/bfv/bfv.hpp"
#include "hefir/ring/ntt.hpp"

namespace hefir::batching {

using SlotVector = std::vector<uint64_t>;

/// Packs N values mod t into one plaintext so that ring arithmetic acts slot-wise.
///
/// Slot i holds the evaluation at zeta^(2i+1), zeta the table's primitive 2N-th
/// root of unity mod t.
class SlotEncoder {
 public:
  SlotEncoder(uint64_t t, std::size_t n);

  uint64_t plain_modulus() const noexcept { return tables_.modulus(); }
  std::size_t slot_count() const noexcept { return tables_.size(); }
  uint64_t root() const noexcept { return tables_.root(); }

  bfv::Plaintext encode(const SlotVector& values) const;
  SlotVector decode(const bfv::Plaintext& pt) const;

  // Signed convenience wrappers using the centered representative.
  bfv::Plaintext encode_signed(const std::vector<int64_t>& values) const;
  std::vector<int64_t> decode_signed(const bfv::Plaintext& pt) const;

 private:
  ring::NttTables tables_;
};

}  // namespace hefir::batching
