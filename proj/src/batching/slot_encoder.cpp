#include "hefir/batching/slot_encoder.hpp"

#include <string>

#include "hefir/common/errors.hpp"
#include "hefir/ring/modarith.hpp"

namespace hefir::batching {

namespace {

ring::NttTables make_tables(uint64_t t, std::size_t n) {
  if (!ring::is_prime(t)) throw UnsupportedParameters("batching needs a prime t, got " + std::to_string(t));
  if ((t - 1) % (2 * n) != 0) {
    throw UnsupportedParameters("batching needs t = 1 mod 2N; " + std::to_string(t) + " fails for N = " +
                                std::to_string(n));
  }
  return ring::NttTables(t, n);
}

}  // namespace

SlotEncoder::SlotEncoder(uint64_t t, std::size_t n) : tables_(make_tables(t, n)) {}

bfv::Plaintext SlotEncoder::encode(const SlotVector& values) const {
  const std::size_t n = slot_count();
  if (values.size() > n) throw EncodingError("more values than slots");
  std::vector<uint64_t> evals(n, 0);
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] >= plain_modulus()) throw EncodingError("slot value not below t");
    evals[tables_.evaluation_index(i)] = values[i];
  }
  tables_.inverse(evals);
  return bfv::Plaintext{std::move(evals)};
}

SlotVector SlotEncoder::decode(const bfv::Plaintext& pt) const {
  const std::size_t n = slot_count();
  if (pt.coeffs.size() != n) throw EncodingError("plaintext length differs from slot count");
  std::vector<uint64_t> evals = pt.coeffs;
  tables_.forward(evals);
  SlotVector out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = evals[tables_.evaluation_index(i)];
  return out;
}

bfv::Plaintext SlotEncoder::encode_signed(const std::vector<int64_t>& values) const {
  SlotVector v(values.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = bfv::reduce_plain(values[i], plain_modulus());
  return encode(v);
}

std::vector<int64_t> SlotEncoder::decode_signed(const bfv::Plaintext& pt) const {
  const SlotVector v = decode(pt);
  std::vector<int64_t> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = bfv::center_plain(v[i], plain_modulus());
  return out;
}

}  // namespace hefir::batching
