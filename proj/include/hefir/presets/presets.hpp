#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hefir/bfv/bfv.hpp"

namespace hefir::presets {

enum class SecurityClass { Production, ToyInsecure };

std::string to_string(SecurityClass c);

struct Preset {
  std::string id;
  std::size_t n = 0;
  int log_q = 0;  // target; realized as prime_count primes of prime_bits bits
  int prime_bits = 0;
  std::size_t prime_count = 0;
  std::vector<uint64_t> plain_moduli;
  int depth = 0;
  int security = 0;  // advertised lambda in bits; 0 for insecure sets
  SecurityClass security_class = SecurityClass::Production;
  std::string description;

  uint64_t plain_product_bits() const;
};

// Throws UnsupportedParameters unless every plaintext modulus is prime and 1 mod 2N,
// and ParameterError on inconsistent sizes.
void validate(const Preset& preset);

// Built-in sets: "1".."5" (production sizes), "toy" and "toy-crt" (insecure, for tests).
const std::vector<Preset>& builtin_presets();

// Presets from HEFIR_PRESET_PATH when set, otherwise the built-in list.
std::vector<Preset> available_presets();
Preset load_preset(const std::string& id);

std::vector<uint64_t> ciphertext_primes(const Preset& preset);
bfv::ParamsPtr build_context(const Preset& preset, std::size_t t_index = 0);

std::string export_presets(const std::vector<Preset>& presets);
std::vector<Preset> parse_presets(const std::string& json_text);
std::vector<Preset> read_presets(const std::filesystem::path& path);

// Squares a fresh encryption `squarings` times; returns the noise budget after
// encryption followed by the budget after each squaring.
std::vector<int> depth_probe(const bfv::ParamsPtr& params, int squarings, ring::Prng& prng);

}  // namespace hefir::presets
