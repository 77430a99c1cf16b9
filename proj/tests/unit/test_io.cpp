#include <gtest/gtest.h>

#include "hefir/common/errors.hpp"
#include "hefir/io/serialize.hpp"
#include "hefir/ring/modarith.hpp"

using namespace hefir;

namespace {

struct Keys {
  bfv::ParamsPtr params = bfv::BfvParams::create(256, ring::generate_ntt_primes(50, 3, 256), 7681);
  ring::Prng prng{42};
  bfv::KeySet keys = bfv::keygen(params, prng);
};

io::CipherBatch small_batch(Keys& k) {
  io::CipherBatch cb;
  cb.batch = 2;
  cb.tensor.shape = {1, 2, 1};
  cb.tensor.scale = mpz_class("123456789012345678901234567890");
  cb.tensor.channel = 1;
  for (uint64_t v : {5u, 9u}) {
    cb.tensor.cts.push_back(bfv::encrypt(k.keys.public_key, bfv::Plaintext::constant(256, v), k.prng));
  }
  cb.tensor.cts[1] = bfv::multiply_raw(cb.tensor.cts[1], cb.tensor.cts[0]);  // three parts
  return cb;
}

}  // namespace

TEST(Serialize, KeysRoundTripByteExact) {
  Keys k;
  const std::string sk = io::serialize(k.keys.secret);
  const std::string pk = io::serialize(k.keys.public_key);
  const std::string rlk = io::serialize(k.keys.relin);
  EXPECT_EQ(sk.substr(0, 4), "HFIR");
  // header: 4 + 2 + 1 + 4 + 2 + 3*8 + 8 bytes, then one ring element
  EXPECT_EQ(sk.size(), 45u + 3 * 256 * 8);
  EXPECT_EQ(io::serialize(io::deserialize_secret_key(sk)), sk);
  EXPECT_EQ(io::serialize(io::deserialize_public_key(pk)), pk);
  EXPECT_EQ(io::serialize(io::deserialize_relin_key(rlk)), rlk);

  const auto sk2 = io::deserialize_secret_key(sk);
  EXPECT_EQ(sk2.s, k.keys.secret.s);
  EXPECT_EQ(sk2.s_ntt, k.keys.secret.s_ntt);
  const auto pk2 = io::deserialize_public_key(pk);
  EXPECT_EQ(pk2.b, k.keys.public_key.b);
  EXPECT_EQ(pk2.params->fingerprint(), k.params->fingerprint());
}

TEST(Serialize, CipherBatchRoundTrip) {
  Keys k;
  const auto cb = small_batch(k);
  const std::string bytes = io::serialize(cb);
  const auto back = io::deserialize_cipher_batch(bytes);
  EXPECT_EQ(back.batch, 2u);
  EXPECT_EQ(back.tensor.shape, cb.tensor.shape);
  EXPECT_EQ(back.tensor.scale, cb.tensor.scale);
  EXPECT_EQ(back.tensor.channel, 1u);
  ASSERT_EQ(back.tensor.cts.size(), 2u);
  EXPECT_EQ(back.tensor.cts[1].size(), 3u);
  EXPECT_TRUE(back.tensor.cts[1].is_product);
  EXPECT_EQ(io::serialize(back), bytes);
  EXPECT_EQ(bfv::decrypt(k.keys.secret, back.tensor.cts[0]).coeffs[0], 5u);
}

TEST(Serialize, CorruptInputReportsOffsets) {
  Keys k;
  const std::string pk = io::serialize(k.keys.public_key);
  try {
    io::deserialize_public_key(std::string_view(pk).substr(0, 100));
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), 45u);
  }
  EXPECT_THROW(io::deserialize_secret_key(pk), FormatError);  // wrong kind
  std::string bad = pk;
  bad[0] = 'X';
  EXPECT_THROW(io::deserialize_public_key(bad), FormatError);
  bad = pk + "x";
  try {
    io::deserialize_public_key(bad);
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), pk.size());
  }
  bad = pk;
  for (int i = 0; i < 8; ++i) bad[45 + i] = static_cast<char>(0xff);  // residue >= prime
  EXPECT_THROW(io::deserialize_public_key(bad), FormatError);
  try {
    io::read_header("HFIR\x01");
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), 4u);
  }
}
