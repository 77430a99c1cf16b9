#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "commands.hpp"
#include "hefir/nn/model.hpp"
#include "hefir/nn/network.hpp"

using namespace hefir;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

void put_be32(std::ofstream& f, uint32_t v) {
  const char b[4] = {char(v >> 24), char(v >> 16), char(v >> 8), char(v)};
  f.write(b, 4);
}

class CliTest : public ::testing::Test {
 protected:
  fs::path dir;

  void SetUp() override {
    dir = fs::temp_directory_path() / ("hefir_cli_" + std::to_string(::getpid()) + "_" +
                                       ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir);
    fs::create_directories(dir);
    ring::Prng prng(99);
    nn::save_model(nn::random_model(nn::NetworkSpec::toy(), 4, prng), dir / "toy.json");
    std::ofstream img(dir / "images.idx", std::ios::binary), lab(dir / "labels.idx", std::ios::binary);
    put_be32(img, 0x803);
    put_be32(img, 12);
    put_be32(img, 8);
    put_be32(img, 8);
    for (int i = 0; i < 12 * 64; ++i) img.put(static_cast<char>(prng.uniform(256)));
    put_be32(lab, 0x801);
    put_be32(lab, 12);
    for (int i = 0; i < 12; ++i) lab.put(static_cast<char>(prng.uniform(3)));
  }
  void TearDown() override { fs::remove_all(dir); }

  std::string p(const std::string& name) const { return (dir / name).string(); }

  static std::string image_lines(const std::string& s) {
    std::istringstream in(s);
    std::string line, out;
    while (std::getline(in, line)) {
      if (line.rfind("image ", 0) == 0) out += line + "\n";
    }
    return out;
  }
};

}  // namespace

TEST_F(CliTest, ToyPipelineMatchesOracle) {
  ASSERT_EQ(run({"keygen", "--preset", "toy", "--out", p("keys"), "--seed", "1"}).code, 0);
  auto enc = run({"encrypt", "--images", p("images.idx"), "--keys", p("keys/keys.json"), "--model", p("toy.json"),
                  "--batch", "10", "--offset", "2", "--out", p("in"), "--seed", "2"});
  ASSERT_EQ(enc.code, 0) << enc.err;
  auto inf = run({"infer", "--in", p("in/ciphertexts.json"), "--model", p("toy.json"), "--keys",
                  p("keys/keys.json"), "--out", p("out"), "--workers", "2", "--mem-budget-mb", "64"});
  ASSERT_EQ(inf.code, 0) << inf.err;
  auto dec = run({"decrypt", "--in", p("out/logits.json"), "--keys", p("keys/keys.json"), "--labels",
                  p("labels.idx"), "--out", p("pred.json")});
  ASSERT_EQ(dec.code, 0) << dec.err;
  auto orc = run({"oracle", "--images", p("images.idx"), "--model", p("toy.json"), "--batch", "10", "--offset", "2",
                  "--labels", p("labels.idx")});
  ASSERT_EQ(orc.code, 0) << orc.err;
  EXPECT_EQ(image_lines(dec.out), image_lines(orc.out));
  EXPECT_NE(image_lines(dec.out).find("image 11 "), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "pred.json"));
}

TEST_F(CliTest, CrtChannelsAsSeparateJobs) {
  ASSERT_EQ(run({"keygen", "--preset", "toy-crt", "--out", p("keys"), "--seed", "3"}).code, 0);
  ASSERT_EQ(run({"encrypt", "--images", p("images.idx"), "--keys", p("keys/keys.json"), "--model", p("toy.json"),
                 "--batch", "4", "--out", p("in")})
                .code,
            0);
  for (std::string ch : {"0", "1"}) {
    auto r = run({"infer", "--in", p("in/ciphertexts.json"), "--model", p("toy.json"), "--keys", p("keys/keys.json"),
                  "--out", p("out" + ch), "--channel", ch, "--workers", "1"});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  auto missing = run({"decrypt", "--in", p("out0/logits.json"), "--keys", p("keys/keys.json")});
  EXPECT_EQ(missing.code, 3);
  EXPECT_NE(missing.err.find("missing"), std::string::npos);
  EXPECT_EQ(image_lines(missing.out), "");

  auto dec = run({"decrypt", "--in", p("out0/logits.json"), "--in", p("out1/logits.json"), "--keys",
                  p("keys/keys.json")});
  ASSERT_EQ(dec.code, 0) << dec.err;
  auto orc = run({"oracle", "--images", p("images.idx"), "--model", p("toy.json"), "--batch", "4"});
  EXPECT_EQ(image_lines(dec.out), image_lines(orc.out));
}

TEST_F(CliTest, MismatchedArtifactsAreRejected) {
  ASSERT_EQ(run({"keygen", "--preset", "toy", "--out", p("a"), "--seed", "1"}).code, 0);
  ASSERT_EQ(run({"keygen", "--preset", "toy", "--out", p("b"), "--seed", "2"}).code, 0);
  ASSERT_EQ(run({"keygen", "--preset", "toy-crt", "--out", p("c"), "--seed", "2"}).code, 0);
  ASSERT_EQ(run({"encrypt", "--images", p("images.idx"), "--keys", p("a/keys.json"), "--model", p("toy.json"),
                 "--batch", "1", "--out", p("in")})
                .code,
            0);
  EXPECT_EQ(run({"encrypt", "--images", p("images.idx"), "--keys", p("a/keys.json"), "--preset", "1", "--model",
                 p("toy.json"), "--out", p("x")})
                .code,
            3);
  // other keys with the same N, q and t evaluate fine but decrypt to noise; different t is a mismatch
  auto r = run({"infer", "--in", p("in/ciphertexts.json"), "--model", p("toy.json"), "--keys", p("c/keys.json"),
                "--out", p("out")});
  EXPECT_EQ(r.code, 3);
  // swapped relinearization key file with a different plaintext modulus
  fs::copy_file(dir / "c/ch0.rlk", dir / "a/ch0.rlk", fs::copy_options::overwrite_existing);
  r = run({"infer", "--in", p("in/ciphertexts.json"), "--model", p("toy.json"), "--keys", p("a/keys.json"), "--out",
           p("out")});
  EXPECT_EQ(r.code, 3) << r.err;
  // truncated ciphertext file
  std::string bytes;
  {
    std::ifstream f(dir / "in/ch0.ct", std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(f), {});
  }
  std::ofstream(dir / "in/ch0.ct", std::ios::binary | std::ios::trunc).write(bytes.data(), 1000);
  r = run({"infer", "--in", p("in/ciphertexts.json"), "--model", p("toy.json"), "--keys", p("b/keys.json"), "--out",
           p("out")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("byte offset"), std::string::npos);
}

TEST_F(CliTest, CapacityErrors) {
  ASSERT_EQ(run({"keygen", "--preset", "toy", "--out", p("keys"), "--seed", "1"}).code, 0);
  EXPECT_EQ(run({"encrypt", "--images", p("images.idx"), "--keys", p("keys/keys.json"), "--model", p("toy.json"),
                 "--batch", "5000", "--out", p("in")})
                .code,
            4);
  // a model whose values overflow t is rejected before evaluation
  ASSERT_EQ(run({"encrypt", "--images", p("images.idx"), "--keys", p("keys/keys.json"), "--model", p("toy.json"),
                 "--batch", "1", "--out", p("in")})
                .code,
            0);
  auto model = nn::load_model(dir / "toy.json");
  for (auto& l : model.layers) {
    if (!l.spec.has_weights()) continue;
    l.spec.weight_scale = 1000000;
    for (auto& w : l.weights) w = 1000000;
  }
  nn::save_model(model, dir / "big.json");
  EXPECT_EQ(run({"infer", "--in", p("in/ciphertexts.json"), "--model", p("big.json"), "--keys", p("keys/keys.json"),
                 "--out", p("out")})
                .code,
            4);
}

TEST_F(CliTest, AuditAndPresets) {
  auto a = run({"audit", "--arch", "mnist"});
  ASSERT_EQ(a.code, 0);
  EXPECT_NE(a.out.find("total              46000      1520"), std::string::npos) << a.out;
  a = run({"audit", "--arch", "cifar10"});
  EXPECT_NE(a.out.find("6952332"), std::string::npos);
  EXPECT_NE(a.out.find("57344"), std::string::npos);
  a = run({"audit", "--model", HEFIR_FIXTURE_DIR "/mnist_4bit_model.json"});
  EXPECT_NE(a.out.find("30378"), std::string::npos);
  EXPECT_EQ(run({"audit", "--arch", "resnet"}).code, 3);

  ASSERT_EQ(run({"presets", "export", "--out", p("presets.json")}).code, 0);
  ::setenv("HEFIR_PRESET_PATH", p("presets.json").c_str(), 1);
  auto l = run({"presets", "list"});
  ::unsetenv("HEFIR_PRESET_PATH");
  EXPECT_NE(l.out.find("5: N=8192 log q=300 moduli=10 depth=7 lambda=91"), std::string::npos) << l.out;
  EXPECT_EQ(run({"keygen", "--preset", "nope", "--out", p("k")}).code, 3);
  EXPECT_NE(run({"bogus"}).code, 0);
}

TEST_F(CliTest, BenchReportsOrdering) {
  auto r = run({"bench", "--preset", "toy", "--iterations", "30", "--seed", "1", "--out", p("bench.json")});
  EXPECT_EQ(r.code, 0) << r.out << r.err;
  for (const char* name : {"KeyGen", "Enc", "Dec", "HAdd", "HSquare", "HMultPlain", "HMult"}) {
    EXPECT_NE(r.out.find(name), std::string::npos);
  }
  EXPECT_NE(r.out.find("ordering HMultPlain < HSquare <= HMult: ok"), std::string::npos);
  EXPECT_EQ(run({"bench", "--preset", "toy", "--iterations", "5"}).code, 3);
}
