#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "hefir/bfv/bfv.hpp"
#include "hefir/engine/engine.hpp"

namespace hefir::io {

// Binary layout, all integers little-endian:
//   "HFIR" | u16 version | u8 kind | u32 N | u16 k | u64 primes[k] | u64 t | payload
// Ring elements are written as coefficient residues, prime-major.
enum class ObjectKind : uint8_t { SecretKey = 1, PublicKey = 2, RelinKey = 3, CipherBatch = 4 };

inline constexpr uint16_t kFormatVersion = 1;

struct Header {
  ObjectKind kind = ObjectKind::SecretKey;
  std::size_t n = 0;
  std::vector<uint64_t> primes;
  uint64_t t = 0;
};

/// Encrypted feature map plus the number of packed images.
struct CipherBatch {
  engine::CipherTensor tensor;
  std::size_t batch = 0;
};

std::string serialize(const bfv::SecretKey& sk);
std::string serialize(const bfv::PublicKey& pk);
std::string serialize(const bfv::RelinKey& rlk);
std::string serialize(const CipherBatch& batch);

Header read_header(std::string_view bytes);

// Parameters are rebuilt from the header and shared between objects with equal headers.
bfv::SecretKey deserialize_secret_key(std::string_view bytes);
bfv::PublicKey deserialize_public_key(std::string_view bytes);
bfv::RelinKey deserialize_relin_key(std::string_view bytes);
CipherBatch deserialize_cipher_batch(std::string_view bytes);

bfv::ParamsPtr params_for(std::size_t n, const std::vector<uint64_t>& primes, uint64_t t);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace hefir::io
