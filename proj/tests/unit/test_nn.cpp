#include <gtest/gtest.h>

#include "hefir/common/errors.hpp"
#include "hefir/nn/idx.hpp"
#include "hefir/nn/model.hpp"
#include "hefir/nn/network.hpp"
#include "hefir/nn/oracle.hpp"
#include "hefir/ring/sampling.hpp"

using namespace hefir;
using namespace hefir::nn;

namespace {

const std::string kFixtures = HEFIR_FIXTURE_DIR;

LayerSpec conv_layer(std::size_t filters, std::size_t k, std::size_t s, bool pad, std::size_t groups = 1) {
  LayerSpec l;
  l.kind = LayerKind::Conv;
  l.name = "c";
  l.filters = filters;
  l.kernel_h = l.kernel_w = k;
  l.stride_h = l.stride_w = s;
  l.padding = pad;
  l.groups = groups;
  l.weight_scale = 15;
  return l;
}

// Dense sliding window over an explicitly zero-padded copy.
std::vector<int64_t> naive_conv(const std::vector<int64_t>& x, Shape in, const LayerSpec& l,
                                const std::vector<int64_t>& w, Shape out) {
  auto pad = [](std::size_t o, std::size_t s, std::size_t k, std::size_t i) {
    const long total = static_cast<long>((o - 1) * s + k) - static_cast<long>(i);
    return static_cast<std::size_t>(std::max(0L, total) / 2);
  };
  const std::size_t ph = l.padding ? pad(out.height, l.stride_h, l.kernel_h, in.height) : 0;
  const std::size_t pw = l.padding ? pad(out.width, l.stride_w, l.kernel_w, in.width) : 0;
  const std::size_t H = in.height + 2 * ph + l.kernel_h, W = in.width + 2 * pw + l.kernel_w;
  std::vector<int64_t> padded(H * W * in.channels, 0);
  for (std::size_t y = 0; y < in.height; ++y)
    for (std::size_t xx = 0; xx < in.width; ++xx)
      for (std::size_t c = 0; c < in.channels; ++c)
        padded[((y + ph) * W + xx + pw) * in.channels + c] = x[(y * in.width + xx) * in.channels + c];
  const std::size_t depth = in.channels / l.groups;
  std::vector<int64_t> res(out.size(), 0);
  for (std::size_t oy = 0; oy < out.height; ++oy)
    for (std::size_t ox = 0; ox < out.width; ++ox)
      for (std::size_t f = 0; f < l.filters; ++f) {
        int64_t acc = 0;
        const std::size_t g = f / (l.filters / l.groups);
        for (std::size_t ky = 0; ky < l.kernel_h; ++ky)
          for (std::size_t kx = 0; kx < l.kernel_w; ++kx)
            for (std::size_t d = 0; d < depth; ++d)
              acc += w[((f * l.kernel_h + ky) * l.kernel_w + kx) * depth + d] *
                     padded[((oy * l.stride_h + ky) * W + ox * l.stride_w + kx) * in.channels + g * depth + d];
        res[(oy * out.width + ox) * out.channels + f] = acc;
      }
  return res;
}

}  // namespace

TEST(Quantizer, UniformLevels) {
  EXPECT_EQ(quantize_weight(1.0, 4).numerator, 15);
  EXPECT_EQ(integerize(quantize_weight(1.0, 4), 15), 15);
  EXPECT_EQ(quantize_weight(0.0, 8).numerator, 0);
  EXPECT_EQ(quantize_weight(0.5, 4).numerator, 8);
  EXPECT_EQ(integerize(quantize_weight(0.5, 4), 15), 8);
  EXPECT_EQ(quantize_weight(-3.0, 4).numerator, -15);
  EXPECT_EQ(integerize({7, 15}, 10), 5);    // 4.67
  EXPECT_EQ(integerize({-3, 6}, 3), -2);    // -1.5 rounds away from zero
}

TEST(Network, ShapesFollowTheArchitectureTables) {
  auto mnist = NetworkSpec::mnist().shapes();
  EXPECT_EQ(mnist[1], (Shape{12, 12, 5}));
  EXPECT_EQ(mnist[3], (Shape{4, 4, 50}));
  EXPECT_EQ(mnist[5], (Shape{1, 1, 10}));
  auto cifar = NetworkSpec::cifar10().shapes();
  EXPECT_EQ(cifar[1], (Shape{32, 32, 32}));
  EXPECT_EQ(cifar[3], (Shape{16, 16, 32}));
  EXPECT_EQ(cifar[4], (Shape{16, 16, 64}));
  EXPECT_EQ(cifar[6], (Shape{8, 8, 64}));
  EXPECT_EQ(cifar[9], (Shape{4, 4, 128}));
  EXPECT_EQ(cifar[10], (Shape{1, 1, 256}));
  EXPECT_EQ(cifar[11], (Shape{1, 1, 10}));
  EXPECT_EQ(NetworkSpec::cifar10().layers.size(), 11u);
  EXPECT_EQ(NetworkSpec::mnist().multiplicative_depth(), 2);
}

TEST(Network, OpCountsMatchComplexityTables) {
  auto mnist = count_ops(NetworkSpec::mnist());
  EXPECT_EQ(mnist.mult_plain, 46000u);
  EXPECT_EQ(mnist.square, 1520u);
  EXPECT_EQ(mnist.layers[0].mult_plain, 18000u);
  EXPECT_EQ(mnist.layers[2].mult_plain, 20000u);
  EXPECT_EQ(mnist.layers[4].mult_plain, 8000u);
  EXPECT_EQ(mnist.layers[1].square, 720u);
  EXPECT_EQ(mnist.layers[3].square, 800u);

  auto cifar = count_ops(NetworkSpec::cifar10());
  EXPECT_EQ(cifar.mult_plain, 6952332u);
  EXPECT_EQ(cifar.square, 57344u);
  EXPECT_EQ(cifar.layers[0].mult_plain, 589824u);
  EXPECT_EQ(cifar.layers[3].mult_plain, 2594048u);
  EXPECT_EQ(cifar.layers[6].mult_plain, 3308544u);
  EXPECT_EQ(cifar.layers[9].mult_plain, 457398u);
  EXPECT_EQ(cifar.layers[10].mult_plain, 2518u);

  NetworkSpec single;
  single.input = {4, 4, 50};
  LayerSpec f;
  f.kind = LayerKind::FullyConnected;
  f.outputs = 10;
  single.layers = {f};
  EXPECT_EQ(count_ops(single).mult_plain, 8000u);
}

TEST(Oracle, ConvMatchesNaiveSlidingWindow) {
  ring::Prng prng(21);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t groups = 1 + prng.uniform(2);
    const Shape in{3 + prng.uniform(6), 3 + prng.uniform(6), groups * (1 + prng.uniform(2))};
    const std::size_t k = 1 + prng.uniform(std::min<std::size_t>(3, std::min(in.height, in.width)));
    LayerSpec l = conv_layer(groups * (1 + prng.uniform(3)), k, 1 + prng.uniform(2), prng.uniform(2) == 1, groups);
    const Shape out = l.output_shape(in);
    std::vector<int64_t> x(in.size()), w(l.weight_count(in));
    IntTensor t(in);
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] = static_cast<int64_t>(prng.uniform(41)) - 20;
      t.values[i] = static_cast<long>(x[i]);
    }
    for (auto& v : w) v = static_cast<int64_t>(prng.uniform(31)) - 15;
    auto got = conv2d(t, l, w);
    auto expect = naive_conv(x, in, l, w, out);
    ASSERT_EQ(got.shape, out);
    for (std::size_t i = 0; i < expect.size(); ++i) ASSERT_EQ(got.values[i], expect[i]) << "trial " << trial;
  }
}

TEST(Oracle, ElementaryLayers) {
  IntTensor x({2, 2, 1}, 4);
  x.values = {1, 2, 3, 4};
  LayerSpec id = conv_layer(1, 1, 1, false);
  auto y = conv2d(x, id, {15});
  EXPECT_EQ(y.values, (std::vector<mpz_class>{15, 30, 45, 60}));
  EXPECT_EQ(y.scale, 60);

  LayerSpec pool;
  pool.kind = LayerKind::AvgPool;
  pool.extent = pool.pool_stride = 2;
  auto p = avg_pool(x, pool);
  EXPECT_EQ(p.values, (std::vector<mpz_class>{10}));
  EXPECT_EQ(p.scale, 16);
  EXPECT_EQ(pool.output_shape({32, 32, 32}), (Shape{16, 16, 32}));

  IntTensor s({1, 1, 2}, 60);
  s.values = {2, -3};
  auto sq = square_layer(s);
  EXPECT_EQ(sq.values, (std::vector<mpz_class>{4, 9}));
  EXPECT_EQ(sq.scale, 3600);

  EXPECT_EQ(classify(std::vector<mpz_class>{3, 7, 7, -1}), 1u);
  EXPECT_THROW(conv2d(x, id, {1, 2}), ShapeError);
}

TEST(Oracle, PixelIntegerization) {
  auto t = integerize_image({0, 31, 32, 255}, {1, 4, 1}, 4);
  EXPECT_EQ(t.values, (std::vector<mpz_class>{0, 0, 1, 4}));
}

TEST(Oracle, FixtureModelGoldenLogits) {
  auto model = load_model(kFixtures + "/mnist_4bit_model.json");
  auto images = read_idx_images(kFixtures + "/mnist_subset_test-images.idx3-ubyte", 100);
  auto labels = read_idx_labels(kFixtures + "/mnist_subset_test-labels.idx1-ubyte", 100);
  ASSERT_EQ(images.images.size(), 100u);
  auto logits = forward(model, integerize_image(images.images[0], model.input, model.input_scale));
  const std::vector<mpz_class> golden{mpz_class("-7307916940"), mpz_class("-10552132497"), mpz_class("-2006250809"),
                                      mpz_class("-5332005011"), mpz_class("-2124651798"), mpz_class("-12701547079"),
                                      mpz_class("-6501177173"), mpz_class("8538691431"), mpz_class("370804561"),
                                      mpz_class("15432284367")};
  EXPECT_EQ(logits.values, golden);
  EXPECT_EQ(classify(logits), 9u);
  EXPECT_EQ(labels[0], 9);
  int correct = 0;
  for (std::size_t i = 0; i < 100; ++i) {
    correct += classify(forward(model, integerize_image(images.images[i], model.input, model.input_scale))) == labels[i];
  }
  EXPECT_EQ(correct, 96);

  IntTensor zero(model.input, model.input_scale);
  auto z = forward(model, zero);
  for (const auto& v : z.values) EXPECT_EQ(v, 0);
  EXPECT_EQ(classify(z), 0u);

  auto ops = count_ops(model);
  EXPECT_EQ(ops.mult_plain, 30378u);
  EXPECT_EQ(ops.square, 1520u);
}

TEST(Model, SerializationRoundTripAndValidation) {
  auto model = load_model(kFixtures + "/mnist_4bit_model.json");
  const std::string text = serialize_model(model);
  EXPECT_EQ(serialize_model(parse_model(text)), text);

  ring::Prng prng(4);
  auto toy = random_model(NetworkSpec::toy(), 4, prng);
  EXPECT_EQ(serialize_model(parse_model(serialize_model(toy))), serialize_model(toy));
  toy.layers[0].weights.pop_back();
  EXPECT_THROW(toy.validate(), ShapeError);
  EXPECT_THROW(parse_model("{\"format\": \"hefir-model\", \"version\": 1"), FormatError);
  auto bad = model;
  bad.layers[0].weights[0] = 16;
  EXPECT_THROW(bad.validate(), ShapeError);
}

TEST(Tracker, FixtureBoundBelowPrecisionLimit) {
  auto model = load_model(kFixtures + "/mnist_4bit_model.json");
  const mpz_class t("5522259017729");
  auto tracker = track_model(model, t, model.input_scale);
  const mpz_class limit = mpz_class(1) << 43;
  EXPECT_LT(tracker.bound(), limit);
  auto images = read_idx_images(kFixtures + "/mnist_subset_test-images.idx3-ubyte", 50);
  for (const auto& img : images.images) {
    ForwardTrace trace;
    forward(model, integerize_image(img, model.input, model.input_scale), &trace);
    for (std::size_t l = 0; l < trace.layer_max.size(); ++l) {
      ASSERT_LE(trace.layer_max[l], tracker.layer_bounds()[l + 1]);
    }
  }
  EXPECT_EQ(tracker.scale(), mpz_class(4 * 15) * (4 * 15) * 15 * (4 * 15) * (4 * 15) * 15 * 15);
  EXPECT_THROW(track_model(model, mpz_class(1) << 30, 4), CapacityError);
}
