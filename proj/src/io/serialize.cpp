#include "hefir/io/serialize.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <mutex>

#include "hefir/common/errors.hpp"

namespace hefir::io {

namespace {

constexpr char kMagic[4] = {'H', 'F', 'I', 'R'};
constexpr std::size_t kMaxDegree = 1u << 17;
constexpr std::size_t kMaxPrimes = 64;

class Writer {
 public:
  void bytes(const void* p, std::size_t len) { buf_.append(static_cast<const char*>(p), len); }
  template <typename T>
  void le(T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) buf_.push_back(static_cast<char>((static_cast<uint64_t>(v) >> (8 * i)) & 0xff));
  }
  void words(std::span<const uint64_t> w) {
    if constexpr (std::endian::native == std::endian::little) {
      bytes(w.data(), w.size() * 8);
    } else {
      for (uint64_t x : w) le(x);
    }
  }
  std::string take() { return std::move(buf_); }

 private:
  std::string buf_;
};

class Reader {
 public:
  explicit Reader(std::string_view data) : data_(data) {}

  std::size_t offset() const noexcept { return pos_; }
  void need(std::size_t len, const char* what) const {
    if (data_.size() - pos_ < len) {
      throw FormatError(std::string("truncated input while reading ") + what, pos_);
    }
  }
  template <typename T>
  T le(const char* what) {
    need(sizeof(T), what);
    uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<uint64_t>(static_cast<uint8_t>(data_[pos_ + i])) << (8 * i);
    pos_ += sizeof(T);
    return static_cast<T>(v);
  }
  void words(std::span<uint64_t> out, const char* what) {
    need(out.size() * 8, what);
    if constexpr (std::endian::native == std::endian::little) {
      std::memcpy(out.data(), data_.data() + pos_, out.size() * 8);
      pos_ += out.size() * 8;
    } else {
      for (auto& x : out) x = le<uint64_t>(what);
    }
  }
  std::string_view take(std::size_t len, const char* what) {
    need(len, what);
    auto s = data_.substr(pos_, len);
    pos_ += len;
    return s;
  }
  void finish() const {
    if (pos_ != data_.size()) throw FormatError("trailing bytes after object", pos_);
  }

 private:
  std::string_view data_;
  std::size_t pos_ = 0;
};

void write_header(Writer& w, ObjectKind kind, const bfv::BfvParams& params) {
  w.bytes(kMagic, 4);
  w.le<uint16_t>(kFormatVersion);
  w.le<uint8_t>(static_cast<uint8_t>(kind));
  w.le<uint32_t>(static_cast<uint32_t>(params.degree()));
  const auto& primes = params.context()->prime_values();
  w.le<uint16_t>(static_cast<uint16_t>(primes.size()));
  for (uint64_t p : primes) w.le<uint64_t>(p);
  w.le<uint64_t>(params.plain_modulus());
}

Header parse_header(Reader& r) {
  const auto magic = r.take(4, "magic");
  if (std::memcmp(magic.data(), kMagic, 4) != 0) throw FormatError("not an HFIR file", 0);
  const auto version = r.le<uint16_t>("version");
  if (version != kFormatVersion) throw FormatError("unsupported HFIR version " + std::to_string(version), 4);
  Header h;
  const std::size_t kind_at = r.offset();
  const auto kind = r.le<uint8_t>("object kind");
  if (kind < 1 || kind > 4) throw FormatError("unknown object kind " + std::to_string(kind), kind_at);
  h.kind = static_cast<ObjectKind>(kind);
  const std::size_t n_at = r.offset();
  h.n = r.le<uint32_t>("degree");
  if (h.n < 2 || h.n > kMaxDegree || (h.n & (h.n - 1)) != 0) throw FormatError("invalid ring degree", n_at);
  const std::size_t k_at = r.offset();
  const std::size_t k = r.le<uint16_t>("prime count");
  if (k == 0 || k > kMaxPrimes) throw FormatError("invalid prime count", k_at);
  for (std::size_t i = 0; i < k; ++i) h.primes.push_back(r.le<uint64_t>("prime"));
  h.t = r.le<uint64_t>("plaintext modulus");
  return h;
}

bfv::ParamsPtr params_from(const Header& h, std::size_t offset) {
  try {
    return params_for(h.n, h.primes, h.t);
  } catch (const FormatError&) {
    throw;
  } catch (const Error& e) {
    throw FormatError(std::string("header describes invalid parameters: ") + e.what(), offset);
  }
}

Header expect(Reader& r, ObjectKind kind, bfv::ParamsPtr& params) {
  Header h = parse_header(r);
  if (h.kind != kind) {
    throw FormatError("object kind " + std::to_string(static_cast<int>(h.kind)) + " where " +
                          std::to_string(static_cast<int>(kind)) + " was expected",
                      6);
  }
  params = params_from(h, 7);
  return h;
}

void write_elem(Writer& w, const ring::RingElem& e) {
  if (e.domain() == ring::Domain::Ntt) {
    w.words(ring::ntt_inverse(e).data());
  } else {
    w.words(e.data());
  }
}

ring::RingElem read_elem(Reader& r, const ring::ContextPtr& ctx, ring::Domain domain, const char* what) {
  ring::RingElem e(ctx, ring::Domain::Coefficient);
  const std::size_t at = r.offset();
  r.words(e.data(), what);
  for (std::size_t i = 0; i < ctx->prime_count(); ++i) {
    const uint64_t q = ctx->prime(i).value;
    for (uint64_t x : e.residues(i)) {
      if (x >= q) throw FormatError(std::string("residue out of range in ") + what, at);
    }
  }
  if (domain == ring::Domain::Ntt) e.to_ntt();
  return e;
}

}  // namespace

bfv::ParamsPtr params_for(std::size_t n, const std::vector<uint64_t>& primes, uint64_t t) {
  static std::mutex mu;
  static std::map<std::tuple<std::size_t, std::vector<uint64_t>, uint64_t>, bfv::ParamsPtr> cache;
  std::lock_guard lock(mu);
  auto key = std::make_tuple(n, primes, t);
  auto it = cache.find(key);
  if (it == cache.end()) it = cache.emplace(key, bfv::BfvParams::create(n, primes, t)).first;
  return it->second;
}

std::string serialize(const bfv::SecretKey& sk) {
  Writer w;
  write_header(w, ObjectKind::SecretKey, *sk.params);
  write_elem(w, sk.s);
  return w.take();
}

std::string serialize(const bfv::PublicKey& pk) {
  Writer w;
  write_header(w, ObjectKind::PublicKey, *pk.params);
  write_elem(w, pk.b);
  write_elem(w, pk.a);
  return w.take();
}

std::string serialize(const bfv::RelinKey& rlk) {
  if (!rlk.params) throw KeyError("empty relinearization key");
  Writer w;
  write_header(w, ObjectKind::RelinKey, *rlk.params);
  w.le<uint32_t>(static_cast<uint32_t>(rlk.params->relin_base_bits()));
  w.le<uint32_t>(static_cast<uint32_t>(rlk.parts.size()));
  for (const auto& [b, a] : rlk.parts) {
    write_elem(w, b);
    write_elem(w, a);
  }
  return w.take();
}

std::string serialize(const CipherBatch& cb) {
  const auto& t = cb.tensor;
  if (t.cts.empty()) throw ShapeError("cannot serialize an empty cipher tensor");
  Writer w;
  write_header(w, ObjectKind::CipherBatch, *t.cts[0].params);
  w.le<uint32_t>(static_cast<uint32_t>(t.shape.height));
  w.le<uint32_t>(static_cast<uint32_t>(t.shape.width));
  w.le<uint32_t>(static_cast<uint32_t>(t.shape.channels));
  w.le<uint32_t>(static_cast<uint32_t>(cb.batch));
  w.le<uint32_t>(static_cast<uint32_t>(t.channel));
  if (sgn(t.scale) <= 0) throw EncodingError("tensor scale must be positive");
  std::size_t count = 0;
  std::string scale((mpz_sizeinbase(t.scale.get_mpz_t(), 2) + 7) / 8, '\0');
  mpz_export(scale.data(), &count, -1, 1, -1, 0, t.scale.get_mpz_t());
  scale.resize(count);
  w.le<uint32_t>(static_cast<uint32_t>(scale.size()));
  w.bytes(scale.data(), scale.size());
  const uint64_t fp = t.cts[0].params->fingerprint();
  for (const auto& ct : t.cts) {
    if (ct.params->fingerprint() != fp) throw ParameterError("cipher tensor mixes parameter sets");
    w.le<uint8_t>(static_cast<uint8_t>(ct.parts.size()));
    w.le<uint8_t>(ct.is_product ? 1 : 0);
    for (const auto& p : ct.parts) write_elem(w, p);
  }
  return w.take();
}

Header read_header(std::string_view bytes) {
  Reader r(bytes);
  return parse_header(r);
}

bfv::SecretKey deserialize_secret_key(std::string_view bytes) {
  Reader r(bytes);
  bfv::ParamsPtr params;
  expect(r, ObjectKind::SecretKey, params);
  auto s = read_elem(r, params->context(), ring::Domain::Coefficient, "secret key");
  r.finish();
  return bfv::make_secret_key(params, s);
}

bfv::PublicKey deserialize_public_key(std::string_view bytes) {
  Reader r(bytes);
  bfv::PublicKey pk;
  expect(r, ObjectKind::PublicKey, pk.params);
  pk.b = read_elem(r, pk.params->context(), ring::Domain::Ntt, "public key");
  pk.a = read_elem(r, pk.params->context(), ring::Domain::Ntt, "public key");
  r.finish();
  return pk;
}

bfv::RelinKey deserialize_relin_key(std::string_view bytes) {
  Reader r(bytes);
  bfv::RelinKey rlk;
  expect(r, ObjectKind::RelinKey, rlk.params);
  const std::size_t base_at = r.offset();
  if (r.le<uint32_t>("relinearization base") != static_cast<uint32_t>(rlk.params->relin_base_bits())) {
    throw FormatError("unsupported relinearization base", base_at);
  }
  const std::size_t count_at = r.offset();
  const std::size_t parts = r.le<uint32_t>("relinearization part count");
  if (parts != rlk.params->relin_length() + 1) throw FormatError("relinearization key has wrong length", count_at);
  for (std::size_t i = 0; i < parts; ++i) {
    auto b = read_elem(r, rlk.params->context(), ring::Domain::Ntt, "relinearization key");
    auto a = read_elem(r, rlk.params->context(), ring::Domain::Ntt, "relinearization key");
    rlk.parts.emplace_back(std::move(b), std::move(a));
  }
  r.finish();
  return rlk;
}

CipherBatch deserialize_cipher_batch(std::string_view bytes) {
  Reader r(bytes);
  bfv::ParamsPtr params;
  expect(r, ObjectKind::CipherBatch, params);
  CipherBatch cb;
  auto& t = cb.tensor;
  const std::size_t shape_at = r.offset();
  t.shape.height = r.le<uint32_t>("shape");
  t.shape.width = r.le<uint32_t>("shape");
  t.shape.channels = r.le<uint32_t>("shape");
  if (t.shape.size() == 0 || t.shape.size() > (1u << 24)) throw FormatError("invalid tensor shape", shape_at);
  const std::size_t batch_at = r.offset();
  cb.batch = r.le<uint32_t>("batch size");
  if (cb.batch == 0 || cb.batch > params->degree()) throw FormatError("invalid batch size", batch_at);
  t.channel = r.le<uint32_t>("channel");
  const std::size_t scale_len = r.le<uint32_t>("scale length");
  const auto scale = r.take(scale_len, "scale");
  mpz_import(t.scale.get_mpz_t(), scale.size(), -1, 1, -1, 0, scale.data());
  t.cts.reserve(t.shape.size());
  for (std::size_t i = 0; i < t.shape.size(); ++i) {
    const std::size_t parts_at = r.offset();
    const std::size_t parts = r.le<uint8_t>("ciphertext size");
    if (parts < 2 || parts > 3) throw FormatError("ciphertext must have 2 or 3 parts", parts_at);
    bfv::Ciphertext ct;
    ct.params = params;
    ct.is_product = r.le<uint8_t>("ciphertext flags") != 0;
    for (std::size_t p = 0; p < parts; ++p) {
      ct.parts.push_back(read_elem(r, params->context(), ring::Domain::Coefficient, "ciphertext"));
    }
    t.cts.push_back(std::move(ct));
  }
  r.finish();
  return cb;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("short write to " + path.string());
}

}  // namespace hefir::io
