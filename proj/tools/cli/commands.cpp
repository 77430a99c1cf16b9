#include "commands.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <nlohmann/json.hpp>
#include <numeric>
#include <optional>
#include <thread>

#include "hefir/batching/slot_encoder.hpp"
#include "hefir/common/errors.hpp"
#include "hefir/engine/engine.hpp"
#include "hefir/io/serialize.hpp"
#include "hefir/nn/idx.hpp"
#include "hefir/nn/model.hpp"
#include "hefir/nn/oracle.hpp"
#include "hefir/presets/presets.hpp"

namespace hefir::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const FormatError*>(&e)) return kFormat;
  if (dynamic_cast<const ParameterError*>(&e) || dynamic_cast<const IncompleteResult*>(&e) ||
      dynamic_cast<const ShapeError*>(&e) || dynamic_cast<const KeyError*>(&e)) {
    return kMismatch;
  }
  if (dynamic_cast<const CapacityError*>(&e) || dynamic_cast<const VerificationError*>(&e) ||
      dynamic_cast<const EncodingError*>(&e)) {
    return kCapacity;
  }
  return kFailure;
}

namespace {

json read_json(const fs::path& path) {
  const std::string text = io::read_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what(), e.byte);
  }
}

void write_json(const fs::path& path, const json& j) { io::write_file(path, j.dump(2) + "\n"); }

template <typename T>
T field(const json& j, const char* key, const fs::path& path) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": field '" + key + "': " + e.what());
  }
}

ring::Prng make_prng(const std::optional<uint64_t>& seed, const std::string& purpose, std::size_t index = 0) {
  if (!seed) return ring::Prng();
  const std::string label = purpose + "/" + std::to_string(*seed) + "/" + std::to_string(index);
  return ring::Prng(std::span<const uint8_t>(reinterpret_cast<const uint8_t*>(label.data()), label.size()));
}

std::size_t default_workers() { return std::max(1u, std::thread::hardware_concurrency()); }

// ---- manifests ----

struct KeyEntry {
  std::size_t index = 0;
  uint64_t t = 0;
  fs::path secret, public_key, relin;
};

struct KeyManifest {
  std::string preset;
  std::vector<uint64_t> moduli;
  std::vector<KeyEntry> channels;

  const KeyEntry& channel(std::size_t index) const {
    for (const auto& c : channels) {
      if (c.index == index) return c;
    }
    throw IncompleteResult("key set has no channel " + std::to_string(index));
  }
};

KeyManifest read_key_manifest(const fs::path& path) {
  const json j = read_json(path);
  if (j.value("format", "") != "hefir-keys") throw FormatError(path.string() + " is not a key manifest");
  const fs::path dir = path.parent_path();
  KeyManifest m;
  m.preset = field<std::string>(j, "preset", path);
  m.moduli = field<std::vector<uint64_t>>(j, "moduli", path);
  for (const auto& c : field<json>(j, "channels", path)) {
    KeyEntry e;
    e.index = field<std::size_t>(c, "index", path);
    e.t = field<uint64_t>(c, "t", path);
    e.secret = dir / field<std::string>(c, "secret", path);
    e.public_key = dir / field<std::string>(c, "public", path);
    e.relin = dir / field<std::string>(c, "relin", path);
    if (e.index >= m.moduli.size() || m.moduli[e.index] != e.t) {
      throw ParameterError(path.string() + ": channel " + std::to_string(e.index) + " does not match the moduli list");
    }
    m.channels.push_back(std::move(e));
  }
  return m;
}

struct CipherEntry {
  std::size_t index = 0;
  uint64_t t = 0;
  fs::path file;
};

struct CipherManifest {
  std::string kind;  // "input" or "logits"
  std::string preset;
  std::vector<uint64_t> moduli;
  std::size_t batch = 0;
  std::size_t offset = 0;  // index of the first packed image in the source file
  std::vector<CipherEntry> channels;
};

CipherManifest read_cipher_manifest(const fs::path& path) {
  const json j = read_json(path);
  if (j.value("format", "") != "hefir-ciphertexts") throw FormatError(path.string() + " is not a ciphertext manifest");
  const fs::path dir = path.parent_path();
  CipherManifest m;
  m.kind = field<std::string>(j, "kind", path);
  m.preset = field<std::string>(j, "preset", path);
  m.moduli = field<std::vector<uint64_t>>(j, "moduli", path);
  m.batch = field<std::size_t>(j, "batch", path);
  m.offset = j.value("offset", std::size_t{0});
  for (const auto& c : field<json>(j, "channels", path)) {
    CipherEntry e;
    e.index = field<std::size_t>(c, "index", path);
    e.t = field<uint64_t>(c, "t", path);
    e.file = dir / field<std::string>(c, "file", path);
    if (e.index >= m.moduli.size() || m.moduli[e.index] != e.t) {
      throw ParameterError(path.string() + ": channel " + std::to_string(e.index) + " does not match the moduli list");
    }
    m.channels.push_back(std::move(e));
  }
  return m;
}

void write_cipher_manifest(const fs::path& path, const CipherManifest& m) {
  json channels = json::array();
  for (const auto& c : m.channels) {
    channels.push_back({{"index", c.index}, {"t", c.t}, {"file", c.file.filename().string()}});
  }
  write_json(path, {{"format", "hefir-ciphertexts"},
                    {"version", 1},
                    {"kind", m.kind},
                    {"preset", m.preset},
                    {"moduli", m.moduli},
                    {"batch", m.batch},
                    {"offset", m.offset},
                    {"channels", channels}});
}

std::vector<std::size_t> selected_channels(std::size_t count, const std::optional<std::size_t>& channel) {
  if (!channel) {
    std::vector<std::size_t> all(count);
    std::iota(all.begin(), all.end(), 0);
    return all;
  }
  if (*channel >= count) {
    throw ParameterError("channel " + std::to_string(*channel) + " out of range; the set has " +
                         std::to_string(count) + " plaintext moduli");
  }
  return {*channel};
}

void require_header(const io::Header& h, uint64_t t, const fs::path& path) {
  if (h.t != t) {
    throw ParameterError(path.string() + ": plaintext modulus " + std::to_string(h.t) + " where " +
                         std::to_string(t) + " was expected");
  }
}

void require_same_params(const bfv::ParamsPtr& a, const bfv::ParamsPtr& b, const fs::path& what) {
  if (a->fingerprint() != b->fingerprint()) {
    throw ParameterError(what.string() + ": N, q or t differ from the other artifacts (N=" +
                         std::to_string(b->degree()) + " vs " + std::to_string(a->degree()) + ", t=" +
                         std::to_string(b->plain_modulus()) + " vs " + std::to_string(a->plain_modulus()) + ")");
  }
}

// ---- images ----

struct ImageSet {
  std::vector<nn::IntTensor> images;
  std::size_t offset = 0;
};

ImageSet load_images(const fs::path& path, std::size_t offset, std::optional<std::size_t> count, const nn::Shape& shape,
                     int64_t scale, std::size_t max_count) {
  const std::size_t want = count.value_or(max_count);
  if (want == 0) throw CapacityError("batch must hold at least one image");
  if (want > max_count) {
    throw CapacityError("batch of " + std::to_string(want) + " images exceeds the " + std::to_string(max_count) +
                        " available slots");
  }
  auto idx = nn::read_idx_images(path, offset + want);
  if (idx.rows != shape.height || idx.cols != shape.width || shape.channels != 1) {
    throw ShapeError("images are " + std::to_string(idx.rows) + "x" + std::to_string(idx.cols) +
                     " but the model expects " + nn::to_string(shape));
  }
  if (idx.images.size() <= offset) throw CapacityError("offset is past the end of the image file");
  if (count && idx.images.size() < offset + *count) {
    throw CapacityError("image file holds only " + std::to_string(idx.images.size()) + " images");
  }
  ImageSet set;
  set.offset = offset;
  for (std::size_t i = offset; i < idx.images.size(); ++i) set.images.push_back(nn::integerize_image(idx.images[i], shape, scale));
  return set;
}

void print_predictions(std::ostream& out, const std::vector<std::vector<mpz_class>>& logits, std::size_t offset,
                       const std::optional<fs::path>& labels_path) {
  std::vector<uint8_t> labels;
  if (labels_path) labels = nn::read_idx_labels(*labels_path, offset + logits.size());
  std::size_t correct = 0;
  for (std::size_t j = 0; j < logits.size(); ++j) {
    const std::size_t label = nn::classify(logits[j]);
    out << "image " << offset + j << " label " << label << " logits";
    for (const auto& v : logits[j]) out << ' ' << v.get_str();
    out << '\n';
    if (offset + j < labels.size() && labels[offset + j] == label) ++correct;
  }
  if (labels_path) {
    out << "accuracy " << correct << "/" << logits.size() << '\n';
  }
}

void write_predictions(const fs::path& path, const std::vector<std::vector<mpz_class>>& logits, std::size_t offset) {
  json images = json::array();
  for (std::size_t j = 0; j < logits.size(); ++j) {
    std::vector<std::string> l;
    for (const auto& v : logits[j]) l.push_back(v.get_str());
    images.push_back({{"image", offset + j}, {"label", nn::classify(logits[j])}, {"logits", l}});
  }
  write_json(path, {{"format", "hefir-predictions"}, {"version", 1}, {"images", images}});
}

// ---- commands ----

struct KeygenArgs {
  std::string preset;
  fs::path out;
  std::optional<uint64_t> seed;
  std::optional<std::size_t> channel;
};

void cmd_keygen(const KeygenArgs& a, std::ostream& out) {
  const auto preset = presets::load_preset(a.preset);
  fs::create_directories(a.out);
  json channels = json::array();
  for (std::size_t i : selected_channels(preset.plain_moduli.size(), a.channel)) {
    const auto params = presets::build_context(preset, i);
    auto prng = make_prng(a.seed, "keygen", i);
    const auto keys = bfv::keygen(params, prng);
    const std::string stem = "ch" + std::to_string(i);
    io::write_file(a.out / (stem + ".sk"), io::serialize(keys.secret));
    io::write_file(a.out / (stem + ".pk"), io::serialize(keys.public_key));
    io::write_file(a.out / (stem + ".rlk"), io::serialize(keys.relin));
    channels.push_back({{"index", i},
                        {"t", preset.plain_moduli[i]},
                        {"secret", stem + ".sk"},
                        {"public", stem + ".pk"},
                        {"relin", stem + ".rlk"}});
    out << "channel " << i << " t=" << preset.plain_moduli[i] << " keys written\n";
  }
  write_json(a.out / "keys.json", {{"format", "hefir-keys"},
                                   {"version", 1},
                                   {"preset", preset.id},
                                   {"moduli", preset.plain_moduli},
                                   {"channels", channels}});
  if (preset.security_class == presets::SecurityClass::ToyInsecure) out << "warning: preset " << preset.id << " is insecure\n";
}

struct EncryptArgs {
  fs::path images;
  fs::path keys;
  fs::path out;
  std::optional<std::string> preset;
  std::optional<fs::path> model;
  std::optional<int64_t> input_scale;
  std::optional<std::size_t> batch;
  std::size_t offset = 0;
  std::optional<uint64_t> seed;
  std::optional<std::size_t> channel;
};

void cmd_encrypt(const EncryptArgs& a, std::ostream& out) {
  const auto km = read_key_manifest(a.keys);
  if (a.preset && *a.preset != km.preset) {
    throw ParameterError("keys were generated for preset " + km.preset + ", not " + *a.preset);
  }
  nn::Shape shape{0, 0, 1};
  int64_t scale = a.input_scale.value_or(0);
  if (a.model) {
    const auto model = nn::load_model(*a.model);
    shape = model.input;
    if (!a.input_scale) scale = model.input_scale;
  } else {
    const auto idx = nn::read_idx_images(a.images, 1);
    shape = {idx.rows, idx.cols, 1};
  }
  if (scale <= 0) throw ParameterError("an input scale is required: pass --model or --input-scale");

  fs::create_directories(a.out);
  CipherManifest m;
  m.kind = "input";
  m.preset = km.preset;
  m.moduli = km.moduli;
  std::optional<ImageSet> set;
  for (std::size_t i : selected_channels(km.moduli.size(), a.channel)) {
    const auto& entry = km.channel(i);
    const auto pk = io::deserialize_public_key(io::read_file(entry.public_key));
    require_header(io::read_header(io::read_file(entry.public_key)), entry.t, entry.public_key);
    if (!set) {
      const engine::PackingLayout probe(pk.params, 1);
      set = load_images(a.images, a.offset, a.batch, shape, scale, probe.capacity());
    }
    const engine::PackingLayout layout(pk.params, set->images.size());
    auto prng = make_prng(a.seed, "encrypt", i);
    io::CipherBatch cb{engine::pack_images(set->images, layout, pk, prng, i), layout.batch()};
    const fs::path file = a.out / ("ch" + std::to_string(i) + ".ct");
    io::write_file(file, io::serialize(cb));
    m.channels.push_back({i, entry.t, file});
    out << "channel " << i << ": " << cb.tensor.cts.size() << " ciphertexts, " << cb.batch << " images\n";
  }
  m.batch = set->images.size();
  m.offset = set->offset;
  write_cipher_manifest(a.out / "ciphertexts.json", m);
}

struct InferArgs {
  fs::path in;
  fs::path model;
  fs::path keys;
  fs::path out;
  std::size_t workers = 0;
  std::size_t mem_budget_mb = 4096;
  std::optional<std::size_t> channel;
};

void cmd_infer(const InferArgs& a, std::ostream& out) {
  const auto cm = read_cipher_manifest(a.in);
  if (cm.kind != "input") throw ParameterError(a.in.string() + " does not hold encrypted inputs");
  const auto km = read_key_manifest(a.keys);
  if (km.moduli != cm.moduli) throw ParameterError("ciphertexts and keys use different plaintext moduli");
  const auto model = nn::load_model(a.model);
  model.validate();

  // reject models whose values cannot fit the composite plaintext modulus
  mpz_class big_t = 1;
  for (uint64_t t : cm.moduli) big_t *= static_cast<unsigned long>(t);
  nn::track_model(model, big_t, model.input_scale);

  engine::EngineOptions opts;
  opts.workers = a.workers ? a.workers : default_workers();
  opts.mem_budget_mb = a.mem_budget_mb;

  fs::create_directories(a.out);
  CipherManifest result = cm;
  result.kind = "logits";
  result.channels.clear();
  for (const auto& entry : cm.channels) {
    if (a.channel && entry.index != *a.channel) continue;
    const auto cb = io::deserialize_cipher_batch(io::read_file(entry.file));
    require_header(io::read_header(io::read_file(entry.file)), entry.t, entry.file);
    const auto& key = km.channel(entry.index);
    const auto rlk = io::deserialize_relin_key(io::read_file(key.relin));
    require_same_params(cb.tensor.cts[0].params, rlk.params, key.relin);
    if (cb.batch != cm.batch) throw ParameterError(entry.file.string() + ": batch size differs from the manifest");

    engine::OpCounters counters;
    const auto start = std::chrono::steady_clock::now();
    io::CipherBatch logits{engine::eval_network(cb.tensor, model, rlk, opts, &counters), cb.batch};
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const fs::path file = a.out / ("ch" + std::to_string(entry.index) + ".logits.ct");
    io::write_file(file, io::serialize(logits));
    result.channels.push_back({entry.index, entry.t, file});
    out << "channel " << entry.index << ": " << std::fixed << std::setprecision(2) << secs << " s, "
        << counters.mult_plain.load() << " mult_plain, " << counters.square.load() << " square, "
        << counters.add.load() << " add\n";
    out.unsetf(std::ios::fixed);
  }
  if (result.channels.empty()) throw ParameterError("no channel selected");
  write_cipher_manifest(a.out / "logits.json", result);
}

struct DecryptArgs {
  std::vector<fs::path> in;
  fs::path keys;
  std::optional<fs::path> labels;
  std::optional<fs::path> out;
};

void cmd_decrypt(const DecryptArgs& a, std::ostream& out) {
  const auto km = read_key_manifest(a.keys);
  std::optional<CipherManifest> merged;
  for (const auto& path : a.in) {
    auto m = read_cipher_manifest(path);
    if (m.kind != "logits") throw ParameterError(path.string() + " does not hold logits");
    if (m.moduli != km.moduli) throw ParameterError(path.string() + ": plaintext moduli differ from the key set");
    if (!merged) {
      merged = std::move(m);
      continue;
    }
    if (m.batch != merged->batch || m.offset != merged->offset) {
      throw ParameterError(path.string() + ": batch differs from the other manifests");
    }
    for (auto& c : m.channels) merged->channels.push_back(std::move(c));
  }
  if (!merged) throw ParameterError("no logit manifests given");

  engine::ChannelResult result;
  result.batch = merged->batch;
  int min_budget = INT32_MAX;
  for (std::size_t i = 0; i < km.moduli.size(); ++i) {
    auto it = std::find_if(merged->channels.begin(), merged->channels.end(),
                           [i](const CipherEntry& c) { return c.index == i; });
    if (it == merged->channels.end()) {
      throw IncompleteResult("logits for channel " + std::to_string(i) + " (t=" + std::to_string(km.moduli[i]) +
                             ") are missing; refusing to reconstruct");
    }
    const auto cb = io::deserialize_cipher_batch(io::read_file(it->file));
    const auto sk = io::deserialize_secret_key(io::read_file(km.channel(i).secret));
    require_same_params(sk.params, cb.tensor.cts[0].params, it->file);
    for (const auto& ct : cb.tensor.cts) min_budget = std::min(min_budget, bfv::noise_budget(sk, ct));
    const engine::PackingLayout layout(sk.params, cb.batch);
    result.moduli.push_back(km.moduli[i]);
    result.logits.push_back(engine::decrypt_tensor(cb.tensor, sk, layout));
  }
  out << "noise budget " << min_budget << " bits\n";
  if (min_budget <= 0) throw VerificationError("noise budget exhausted; decrypted logits are unreliable");
  const auto logits = engine::reconstruct_logits(result, codec::CrtSystem(km.moduli));
  print_predictions(out, logits, merged->offset, a.labels);
  if (a.out) write_predictions(*a.out, logits, merged->offset);
}

struct OracleArgs {
  fs::path images;
  fs::path model;
  std::optional<std::size_t> batch;
  std::size_t offset = 0;
  std::optional<fs::path> labels;
  std::optional<fs::path> out;
};

void cmd_oracle(const OracleArgs& a, std::ostream& out) {
  const auto model = nn::load_model(a.model);
  model.validate();
  const auto set = load_images(a.images, a.offset, a.batch, model.input, model.input_scale, SIZE_MAX);
  std::vector<std::vector<mpz_class>> logits;
  mpz_class peak = 0;
  for (const auto& img : set.images) {
    nn::ForwardTrace trace;
    logits.push_back(nn::forward(model, img, &trace).values);
    for (const auto& m : trace.layer_max) peak = std::max(peak, m);
  }
  print_predictions(out, logits, set.offset, a.labels);
  out << "max intermediate " << peak.get_str() << " (" << mpz_sizeinbase(peak.get_mpz_t(), 2) << " bits)\n";
  if (a.out) write_predictions(*a.out, logits, set.offset);
}

struct BenchArgs {
  std::string preset;
  std::size_t iterations = 30;
  std::size_t channel = 0;
  std::optional<uint64_t> seed;
  std::optional<fs::path> out;
};

struct Timing {
  std::string name;
  double mean_ms = 0;
  double median_ms = 0;
};

template <typename F>
Timing time_op(const std::string& name, std::size_t iterations, F&& op) {
  for (int i = 0; i < 3; ++i) op();
  std::vector<double> ms;
  for (std::size_t i = 0; i < iterations; ++i) {
    const auto start = std::chrono::steady_clock::now();
    op();
    ms.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count());
  }
  Timing t{name};
  t.mean_ms = std::accumulate(ms.begin(), ms.end(), 0.0) / static_cast<double>(ms.size());
  std::sort(ms.begin(), ms.end());
  t.median_ms = ms.size() % 2 ? ms[ms.size() / 2] : (ms[ms.size() / 2 - 1] + ms[ms.size() / 2]) / 2;
  return t;
}

void cmd_bench(const BenchArgs& a, std::ostream& out) {
  if (a.iterations < 30) throw ParameterError("benchmarks need at least 30 iterations");
  const auto preset = presets::load_preset(a.preset);
  const auto params = presets::build_context(preset, a.channel);
  auto prng = make_prng(a.seed, "bench");
  const auto keys = bfv::keygen(params, prng);
  auto random_plain = [&] {
    bfv::Plaintext pt;
    pt.coeffs.resize(params->degree());
    for (auto& c : pt.coeffs) c = prng.uniform(params->plain_modulus());
    return pt;
  };
  const auto pt = random_plain();
  const auto weight = random_plain();
  const auto c1 = bfv::encrypt(keys.public_key, pt, prng);
  const auto c2 = bfv::encrypt(keys.public_key, random_plain(), prng);
  volatile std::size_t sink = 0;

  std::vector<Timing> rows;
  const std::size_t n = a.iterations;
  rows.push_back(time_op("KeyGen", n, [&] { sink = sink + bfv::keygen(params, prng).relin.parts.size(); }));
  rows.push_back(time_op("Enc", n, [&] { sink = sink + bfv::encrypt(keys.public_key, pt, prng).size(); }));
  rows.push_back(time_op("Dec", n, [&] { sink = sink + bfv::decrypt(keys.secret, c1).coeffs[0]; }));
  rows.push_back(time_op("HAdd", n, [&] { sink = sink + bfv::hadd(c1, c2).size(); }));
  rows.push_back(time_op("HSquare", n, [&] { sink = sink + bfv::hsquare(c1, keys.relin).size(); }));
  rows.push_back(time_op("HMultPlain", n, [&] { sink = sink + bfv::hmult_plain(c1, weight).size(); }));
  rows.push_back(time_op("HMult", n, [&] { sink = sink + bfv::hmult(c1, c2, keys.relin).size(); }));

  out << "preset " << preset.id << " N=" << preset.n << " log q=" << preset.log_q
      << " t=" << preset.plain_moduli[a.channel] << " iterations=" << n << " warm-up=3\n";
  out << std::left << std::setw(12) << "primitive" << std::right << std::setw(12) << "mean_ms" << std::setw(12)
      << "median_ms" << '\n';
  json j = json::array();
  for (const auto& r : rows) {
    out << std::left << std::setw(12) << r.name << std::right << std::fixed << std::setprecision(3) << std::setw(12)
        << r.mean_ms << std::setw(12) << r.median_ms << '\n';
    j.push_back({{"primitive", r.name}, {"mean_ms", r.mean_ms}, {"median_ms", r.median_ms}});
  }
  out.unsetf(std::ios::fixed);
  auto mean = [&](const std::string& name) {
    return std::find_if(rows.begin(), rows.end(), [&](const Timing& t) { return t.name == name; })->mean_ms;
  };
  const bool ordered = mean("HMultPlain") < mean("HSquare") && mean("HSquare") <= mean("HMult");
  out << "ordering HMultPlain < HSquare <= HMult: " << (ordered ? "ok" : "VIOLATED") << '\n';
  if (a.out) {
    write_json(*a.out, {{"preset", preset.id}, {"iterations", n}, {"results", j}, {"ordered", ordered}});
  }
  if (!ordered) throw VerificationError("primitive latency ordering violated");
}

struct AuditArgs {
  std::optional<fs::path> model;
  std::optional<std::string> arch;
};

void cmd_audit(const AuditArgs& a, std::ostream& out) {
  nn::OpCount ops;
  if (a.model) {
    const auto model = nn::load_model(*a.model);
    model.validate();
    ops = nn::count_ops(model);
    out << "model " << a.model->filename().string() << " (" << model.architecture << ", nonzero weights)\n";
  } else {
    const auto spec = nn::NetworkSpec::by_name(a.arch.value_or(""));
    if (!spec) throw ParameterError("unknown architecture '" + a.arch.value_or("") + "'");
    ops = nn::count_ops(*spec);
    out << "architecture " << spec->name << '\n';
  }
  out << std::left << std::setw(10) << "layer" << std::right << std::setw(14) << "mult_plain" << std::setw(10)
      << "square" << '\n';
  for (const auto& l : ops.layers) {
    out << std::left << std::setw(10) << l.name << std::right << std::setw(14) << l.mult_plain << std::setw(10)
        << l.square << '\n';
  }
  out << std::left << std::setw(10) << "total" << std::right << std::setw(14) << ops.mult_plain << std::setw(10)
      << ops.square << '\n';
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Homomorphic CNN inference over BFV"};
  app.require_subcommand(1);

  KeygenArgs kg;
  auto* keygen = app.add_subcommand("keygen", "Generate keys for every plaintext modulus of a preset");
  keygen->add_option("--preset", kg.preset, "Parameter set id")->required();
  keygen->add_option("--out", kg.out, "Output directory")->required();
  keygen->add_option("--seed", kg.seed, "Deterministic seed");
  keygen->add_option("--channel", kg.channel, "Only this plaintext modulus index");

  EncryptArgs en;
  auto* encrypt = app.add_subcommand("encrypt", "Integerize, pack and encrypt a batch of IDX images");
  encrypt->add_option("--images", en.images, "IDX image file")->required()->check(CLI::ExistingFile);
  encrypt->add_option("--keys", en.keys, "Key manifest (keys.json)")->required()->check(CLI::ExistingFile);
  encrypt->add_option("--out", en.out, "Output directory")->required();
  encrypt->add_option("--preset", en.preset, "Expected preset id");
  encrypt->add_option("--model", en.model, "Model file supplying the input scale")->check(CLI::ExistingFile);
  encrypt->add_option("--input-scale", en.input_scale, "Pixel scale when no model is given");
  encrypt->add_option("--batch", en.batch, "Images to pack (default: as many as fit)");
  encrypt->add_option("--offset", en.offset, "Index of the first image");
  encrypt->add_option("--seed", en.seed, "Deterministic seed");
  encrypt->add_option("--channel", en.channel, "Only this plaintext modulus index");

  InferArgs inf;
  auto* infer = app.add_subcommand("infer", "Evaluate the network on encrypted inputs");
  infer->add_option("--in", inf.in, "Input manifest (ciphertexts.json)")->required()->check(CLI::ExistingFile);
  infer->add_option("--model", inf.model, "Model file")->required()->check(CLI::ExistingFile);
  infer->add_option("--keys", inf.keys, "Key manifest; only relinearization keys are read")
      ->required()
      ->check(CLI::ExistingFile);
  infer->add_option("--out", inf.out, "Output directory")->required();
  infer->add_option("--workers", inf.workers, "Worker threads (default: hardware threads)");
  infer->add_option("--mem-budget-mb", inf.mem_budget_mb, "Memory budget per worker for block planning");
  infer->add_option("--channel", inf.channel, "Only this plaintext modulus index");

  DecryptArgs de;
  auto* decrypt = app.add_subcommand("decrypt", "Decrypt logits, reconstruct over all channels and classify");
  decrypt->add_option("--in", de.in, "Logit manifests (one per channel job)")->required()->check(CLI::ExistingFile);
  decrypt->add_option("--keys", de.keys, "Key manifest (keys.json)")->required()->check(CLI::ExistingFile);
  decrypt->add_option("--labels", de.labels, "IDX label file for accuracy")->check(CLI::ExistingFile);
  decrypt->add_option("--out", de.out, "Write predictions as JSON");

  OracleArgs orc;
  auto* oracle = app.add_subcommand("oracle", "Run the exact plaintext network");
  oracle->add_option("--images", orc.images, "IDX image file")->required()->check(CLI::ExistingFile);
  oracle->add_option("--model", orc.model, "Model file")->required()->check(CLI::ExistingFile);
  oracle->add_option("--batch", orc.batch, "Number of images (default: all)");
  oracle->add_option("--offset", orc.offset, "Index of the first image");
  oracle->add_option("--labels", orc.labels, "IDX label file for accuracy")->check(CLI::ExistingFile);
  oracle->add_option("--out", orc.out, "Write predictions as JSON");

  BenchArgs be;
  auto* bench = app.add_subcommand("bench", "Time the scheme primitives");
  bench->add_option("--preset", be.preset, "Parameter set id")->required();
  bench->add_option("--iterations", be.iterations, "Timed iterations per primitive (>= 30)");
  bench->add_option("--channel", be.channel, "Plaintext modulus index");
  bench->add_option("--seed", be.seed, "Deterministic seed");
  bench->add_option("--out", be.out, "Write results as JSON");

  AuditArgs au;
  auto* audit = app.add_subcommand("audit", "Count homomorphic operations per layer");
  auto* audit_model = audit->add_option("--model", au.model, "Model file (counts nonzero weights)")->check(CLI::ExistingFile);
  audit->add_option("--arch", au.arch, "Architecture name: mnist, cifar10 or toy")->excludes(audit_model);

  std::optional<fs::path> presets_out;
  auto* presets_cmd = app.add_subcommand("presets", "Inspect parameter presets");
  presets_cmd->require_subcommand(1);
  auto* presets_export = presets_cmd->add_subcommand("export", "Write the presets as JSON");
  presets_export->add_option("--out", presets_out, "Output file (default: stdout)");
  auto* presets_list = presets_cmd->add_subcommand("list", "List the presets");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (*keygen) cmd_keygen(kg, out);
    else if (*encrypt) cmd_encrypt(en, out);
    else if (*infer) cmd_infer(inf, out);
    else if (*decrypt) cmd_decrypt(de, out);
    else if (*oracle) cmd_oracle(orc, out);
    else if (*bench) cmd_bench(be, out);
    else if (*audit) {
      if (!au.model && !au.arch) throw ParameterError("audit needs --model or --arch");
      cmd_audit(au, out);
    } else if (*presets_export) {
      const std::string text = presets::export_presets(presets::available_presets());
      if (presets_out) io::write_file(*presets_out, text);
      else out << text;
    } else if (*presets_list) {
      for (const auto& p : presets::available_presets()) {
        out << p.id << ": N=" << p.n << " log q=" << p.log_q << " moduli=" << p.plain_moduli.size()
            << " depth=" << p.depth << " lambda=" << p.security << " (" << presets::to_string(p.security_class)
            << ")\n";
      }
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
  return kOk;
}

}  // namespace hefir::cli
