#include "hefir/presets/presets.hpp"

#include <cstdlib>
#include <fstream>
#include <map>
#include <mutex>
#include <nlohmann/json.hpp>
#include <sstream>
#include <tuple>

#include "hefir/common/errors.hpp"
#include "hefir/ring/modarith.hpp"

namespace hefir::presets {

using json = nlohmann::json;

std::string to_string(SecurityClass c) { return c == SecurityClass::Production ? "production" : "toy-insecure"; }

namespace {

SecurityClass security_class_from_string(const std::string& s) {
  if (s == "production") return SecurityClass::Production;
  if (s == "toy-insecure") return SecurityClass::ToyInsecure;
  throw FormatError("unknown security class '" + s + "'");
}

Preset make(std::string id, std::size_t n, int log_q, int prime_bits, std::vector<uint64_t> t, int depth,
            int security, SecurityClass cls, std::string description) {
  Preset p;
  p.id = std::move(id);
  p.n = n;
  p.log_q = log_q;
  p.prime_bits = prime_bits;
  p.prime_count = static_cast<std::size_t>(log_q / prime_bits);
  p.plain_moduli = std::move(t);
  p.depth = depth;
  p.security = security;
  p.security_class = cls;
  p.description = std::move(description);
  return p;
}

}  // namespace

uint64_t Preset::plain_product_bits() const {
  mpz_class prod = 1;
  for (uint64_t t : plain_moduli) prod *= static_cast<unsigned long>(t);
  return mpz_sizeinbase(prod.get_mpz_t(), 2);
}

void validate(const Preset& p) {
  if (p.n < 2 || (p.n & (p.n - 1)) != 0) throw ParameterError("preset " + p.id + ": N must be a power of two");
  if (p.plain_moduli.empty()) throw ParameterError("preset " + p.id + ": no plaintext moduli");
  if (p.prime_bits < 20 || p.prime_bits > 62 || p.prime_count == 0) {
    throw ParameterError("preset " + p.id + ": ciphertext primes must be 20..62 bits");
  }
  for (uint64_t t : p.plain_moduli) {
    if (!ring::is_prime(t) || (t - 1) % (2 * p.n) != 0) {
      throw UnsupportedParameters("preset " + p.id + ": plaintext modulus " + std::to_string(t) +
                                  " is not a prime congruent to 1 mod 2N");
    }
  }
}

const std::vector<Preset>& builtin_presets() {
  static const std::vector<Preset> presets = [] {
    constexpr uint64_t kMnistT = 5522259017729ULL;
    std::vector<Preset> v;
    v.push_back(make("1", 8192, 330, 55, {kMnistT}, 4, 82, SecurityClass::Production, "MNIST, N=2^13"));
    v.push_back(make("2", 8192, 360, 60, {kMnistT}, 5, 76, SecurityClass::Production, "MNIST, N=2^13, extra level"));
    v.push_back(make("3", 16384, 330, 55, {kMnistT}, 4, 175, SecurityClass::Production, "MNIST, N=2^14"));
    v.push_back(make("4", 16384, 360, 60, {kMnistT}, 5, 159, SecurityClass::Production, "MNIST, N=2^14, extra level"));
    v.push_back(make("5", 8192, 300, 60,
                     {2424833, 2654209, 2752513, 3604481, 3735553, 4423681, 4620289, 4816897, 4882433, 5308417}, 7,
                     91, SecurityClass::Production, "CIFAR-10, ten plaintext CRT channels"));
    v.push_back(make("toy", 4096, 310, 62, {kMnistT}, 4, 0, SecurityClass::ToyInsecure, "insecure test set"));
    v.push_back(make("toy-crt", 4096, 310, 62, {40961, 65537}, 4, 0, SecurityClass::ToyInsecure,
                     "insecure two-channel test set"));
    for (const auto& p : v) validate(p);
    return v;
  }();
  return presets;
}

std::vector<Preset> available_presets() {
  if (const char* path = std::getenv("HEFIR_PRESET_PATH"); path && *path) return read_presets(path);
  return builtin_presets();
}

Preset load_preset(const std::string& id) {
  for (const auto& p : available_presets()) {
    if (p.id == id) {
      validate(p);
      return p;
    }
  }
  throw ParameterError("unknown preset '" + id + "'");
}

std::vector<uint64_t> ciphertext_primes(const Preset& p) {
  static std::mutex mu;
  static std::map<std::tuple<int, std::size_t, std::size_t>, std::vector<uint64_t>> cache;
  const auto key = std::make_tuple(p.prime_bits, p.prime_count, p.n);
  std::lock_guard lock(mu);
  auto it = cache.find(key);
  if (it == cache.end()) it = cache.emplace(key, ring::generate_ntt_primes(p.prime_bits, p.prime_count, p.n)).first;
  return it->second;
}

bfv::ParamsPtr build_context(const Preset& p, std::size_t t_index) {
  validate(p);
  if (t_index >= p.plain_moduli.size()) {
    throw ParameterError("preset " + p.id + " has " + std::to_string(p.plain_moduli.size()) +
                         " plaintext moduli; index " + std::to_string(t_index) + " requested");
  }
  return bfv::BfvParams::create(p.n, ciphertext_primes(p), p.plain_moduli[t_index], p.depth, p.security);
}

std::string export_presets(const std::vector<Preset>& presets) {
  json arr = json::array();
  for (const auto& p : presets) {
    arr.push_back({{"id", p.id},
                   {"n", p.n},
                   {"log_q", p.log_q},
                   {"prime_bits", p.prime_bits},
                   {"prime_count", p.prime_count},
                   {"plain_moduli", p.plain_moduli},
                   {"depth", p.depth},
                   {"security", p.security},
                   {"security_class", to_string(p.security_class)},
                   {"description", p.description}});
  }
  return json{{"format", "hefir-presets"}, {"version", 1}, {"presets", arr}}.dump(2) + "\n";
}

std::vector<Preset> parse_presets(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("preset file: ") + e.what(), e.byte);
  }
  try {
    if (doc.at("format") != "hefir-presets") throw FormatError("not a hefir preset file");
    if (doc.at("version") != 1) throw FormatError("unsupported preset file version");
    std::vector<Preset> out;
    for (const auto& j : doc.at("presets")) {
      Preset p;
      p.id = j.at("id").get<std::string>();
      p.n = j.at("n").get<std::size_t>();
      p.log_q = j.at("log_q").get<int>();
      p.prime_bits = j.at("prime_bits").get<int>();
      p.prime_count = j.value("prime_count", p.prime_bits > 0 ? static_cast<std::size_t>(p.log_q / p.prime_bits) : 0);
      p.plain_moduli = j.at("plain_moduli").get<std::vector<uint64_t>>();
      p.depth = j.at("depth").get<int>();
      p.security = j.value("security", 0);
      p.security_class = security_class_from_string(j.value("security_class", std::string("production")));
      p.description = j.value("description", std::string());
      validate(p);
      out.push_back(std::move(p));
    }
    return out;
  } catch (const json::exception& e) {
    throw FormatError(std::string("preset file: ") + e.what());
  }
}

std::vector<Preset> read_presets(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open preset file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_presets(ss.str());
}

std::vector<int> depth_probe(const bfv::ParamsPtr& params, int squarings, ring::Prng& prng) {
  const auto keys = bfv::keygen(params, prng);
  const uint64_t t = params->plain_modulus();
  uint64_t value = 3 % t;
  bfv::Ciphertext ct = bfv::encrypt(keys.public_key, bfv::Plaintext::constant(params->degree(), value), prng);
  std::vector<int> budgets{bfv::noise_budget(keys.secret, ct)};
  for (int i = 0; i < squarings; ++i) {
    ct = bfv::hsquare(ct, keys.relin);
    value = ring::mul_mod(value, value, t);
    const auto pt = bfv::decrypt(keys.secret, ct);
    budgets.push_back(pt.coeffs[0] == value ? bfv::noise_budget(keys.secret, ct) : 0);
  }
  return budgets;
}

}  // namespace hefir::presets
