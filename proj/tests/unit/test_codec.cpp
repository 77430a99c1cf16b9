#include <gtest/gtest.h>

#include <random>

#include "hefir/codec/codec.hpp"
#include "hefir/common/errors.hpp"

using namespace hefir;
using namespace hefir::codec;

TEST(Codec, ScalarEncoding) {
  EXPECT_EQ(encode_scalar(0.5, 4), 2);
  EXPECT_EQ(encode_scalar(0.0, 97), 0);
  EXPECT_EQ(encode_scalar(255.0 / 255.0, 4), 4);
  EXPECT_EQ(encode_scalar(0.125, 4), 1);   // tie rounds away from zero
  EXPECT_EQ(encode_scalar(-0.125, 4), -1);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  for (int i = 0; i < 10000; ++i) {
    const double x = dist(rng);
    EXPECT_LE(std::abs(decode_scalar(encode_scalar(x, 255), 255) - x), 0.5 / 255 + 1e-12);
  }
}

TEST(Codec, CenteredModular) {
  EXPECT_EQ(to_modular(-1, 15), 14u);
  EXPECT_EQ(from_modular(14, 15), -1);
  EXPECT_EQ(to_modular(7, 15), 7u);
  EXPECT_EQ(from_modular(7, 15), 7);
  EXPECT_EQ(to_modular(-7, 15), 8u);
  EXPECT_EQ(from_modular(8, 15), -7);
  EXPECT_THROW(to_modular(8, 15), OverflowError);
  EXPECT_THROW(to_modular(-8, 15), OverflowError);
  for (int64_t v = -7; v <= 7; ++v) EXPECT_EQ(from_modular(to_modular(v, 15), 15), v);
}

TEST(Codec, CrtThreeTimesFive) {
  CrtSystem crt({3, 5});
  EXPECT_EQ(crt.icrt(4), (std::vector<uint64_t>{1, 4}));
  EXPECT_EQ(crt.reconstruct({0, 4}), 9);
  EXPECT_EQ(crt.icrt(0), (std::vector<uint64_t>{0, 0}));
  for (int m = 0; m < 15; ++m) EXPECT_EQ(crt.reconstruct(crt.icrt(m)), m);
  EXPECT_THROW(crt.reconstruct({1}), IncompleteResult);
  EXPECT_THROW(crt.reconstruct({3, 0}), ParameterError);
  EXPECT_THROW(CrtSystem({6, 9}), ParameterError);
}

TEST(Codec, CrtTenPrimeSystem) {
  CrtSystem crt({2424833, 2654209, 2752513, 3604481, 3735553, 4423681, 4620289, 4816897, 4882433, 5308417});
  gmp_randclass rng(gmp_randinit_default);
  rng.seed(5);
  for (int i = 0; i < 200; ++i) {
    mpz_class m = rng.get_z_range(crt.product());
    EXPECT_EQ(crt.reconstruct(crt.icrt(m)), m);
  }
  EXPECT_EQ(mpz_sizeinbase(crt.product().get_mpz_t(), 2), 219u);
}

TEST(Codec, TrackerRules) {
  ScaleTracker tr(mpz_class(1) << 64, 60, {{-5, 5}});
  tr.square("sq");
  EXPECT_EQ(tr.scale(), 3600);
  EXPECT_EQ(tr.intervals()[0].lo, 0);
  EXPECT_EQ(tr.intervals()[0].hi, 25);
  tr.linear("fc", 15, {{{0, 3}, {0, -2}}, {{0, -1}}});
  EXPECT_EQ(tr.scale(), 54000);
  EXPECT_EQ(tr.intervals()[0].lo, -50);
  EXPECT_EQ(tr.intervals()[0].hi, 75);
  EXPECT_EQ(tr.intervals()[1].lo, -25);
  tr.pool("pool", 4);
  EXPECT_EQ(tr.bound(), 300);
  EXPECT_EQ(tr.scale(), 216000);

  ScaleTracker small(15, 1, {{0, 3}});
  EXPECT_THROW(small.square("sq1"), CapacityError);
  try {
    ScaleTracker s2(15, 1, {{0, 3}});
    s2.square("sq1");
  } catch (const CapacityError& e) {
    EXPECT_NE(std::string(e.what()).find("sq1"), std::string::npos);
  }
}
