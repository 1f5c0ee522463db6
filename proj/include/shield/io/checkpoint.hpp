#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "shield/afgan/gan.hpp"
#include "shield/common.hpp"
#include "shield/defense/shield.hpp"
#include "shield/detectors/detector.hpp"

namespace shield::io {

using json = nlohmann::json;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

inline constexpr char kMagic[8] = {'S', 'H', 'L', 'D', 'C', 'K', 'P', '1'};
inline constexpr int kFormatVersion = 1;

struct NamedVector {
  std::string name;
  std::vector<double> values;
};

// Layout: 8-byte magic, u64 LE header length, JSON header, then every vector
// listed in header["vectors"] as raw little-endian f64.
struct Checkpoint {
  std::string kind;
  json header;
  std::vector<NamedVector> vectors;

  const std::vector<double>& vector(const std::string& name) const {
    for (const auto& v : vectors)
      if (v.name == name) return v.values;
    throw invalid_input("checkpoint has no vector '" + name + "'");
  }
};

inline std::string encode_checkpoint(const Checkpoint& c) {
  json h = c.header;
  h["format_version"] = kFormatVersion;
  h["kind"] = c.kind;
  h["vectors"] = json::array();
  for (const auto& v : c.vectors) h["vectors"].push_back({{"name", v.name}, {"size", v.values.size()}});
  const std::string text = h.dump();
  std::string out(kMagic, sizeof kMagic);
  const std::uint64_t len = text.size();
  out.append(reinterpret_cast<const char*>(&len), sizeof len);
  out += text;
  for (const auto& v : c.vectors) out.append(reinterpret_cast<const char*>(v.values.data()), v.values.size() * sizeof(double));
  return out;
}

inline Checkpoint decode_checkpoint(const std::string& bytes, const std::string& name = "checkpoint") {
  const auto bad = [&](const std::string& why) { return invalid_input(name + ": " + why); };
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) throw bad("not a checkpoint file");
  std::uint64_t len = 0;
  std::memcpy(&len, bytes.data() + 8, sizeof len);
  if (len > bytes.size() - 16) throw bad("truncated header");
  Checkpoint c;
  try {
    c.header = json::parse(bytes.substr(16, len));
  } catch (const json::exception& e) {
    throw bad(std::string("corrupt header: ") + e.what());
  }
  if (c.header.value("format_version", 0) != kFormatVersion) throw bad("unsupported format version");
  c.kind = c.header.value("kind", "");
  std::size_t off = 16 + len;
  for (const auto& v : c.header.at("vectors")) {
    const auto n = v.at("size").get<std::size_t>();
    if (n > (bytes.size() - off) / sizeof(double)) throw bad("truncated payload");
    NamedVector nv{v.at("name").get<std::string>(), std::vector<double>(n)};
    std::memcpy(nv.values.data(), bytes.data() + off, n * sizeof(double));
    off += n * sizeof(double);
    c.vectors.push_back(std::move(nv));
  }
  if (off != bytes.size()) throw bad("trailing bytes after payload");
  return c;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw missing_dependency("cannot open " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_bytes(const std::filesystem::path& p, const std::string& bytes) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw invalid_input("cannot write " + p.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw invalid_input("write failed: " + p.string());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& p, const std::string& expected_kind) {
  if (!std::filesystem::exists(p)) throw missing_dependency("missing checkpoint " + p.string());
  auto c = decode_checkpoint(read_file(p), p.string());
  if (c.kind != expected_kind) throw invalid_input(p.string() + ": expected a " + expected_kind + " checkpoint, found " + c.kind);
  return c;
}

inline std::string config_hash_of(const Checkpoint& c) { return c.header.value("config_hash", ""); }

inline void check_size(const std::vector<double>& v, std::size_t expected, const std::string& what) {
  if (v.size() != expected)
    throw invalid_input(what + " has " + std::to_string(v.size()) + " parameters, architecture expects " + std::to_string(expected));
}

// ---- detectors ----

inline json to_json(const dsp::MelConfig& m) {
  return {{"n_mels", m.n_mels}, {"win", m.win}, {"hop", m.hop}, {"sample_rate_hz", m.sample_rate_hz}, {"floor", m.floor}};
}
inline dsp::MelConfig mel_from_json(const json& j) {
  dsp::MelConfig m;
  m.n_mels = j.at("n_mels");
  m.win = j.at("win");
  m.hop = j.at("hop");
  m.sample_rate_hz = j.at("sample_rate_hz");
  m.floor = j.at("floor");
  return m;
}

inline json to_json(const detectors::DetectorConfig& c) {
  return {{"arch", detectors::to_string(c.arch)}, {"input_length", c.input_length}, {"widths", c.widths},
          {"first_kernel", c.first_kernel}, {"first_stride", c.first_stride}, {"kernel", c.kernel}, {"mel", to_json(c.mel)}};
}
inline detectors::DetectorConfig detector_config_from_json(const json& j) {
  detectors::DetectorConfig c;
  const auto arch = detectors::parse_arch(j.at("arch").get<std::string>());
  if (!arch) throw invalid_input("unknown detector arch in checkpoint");
  c.arch = *arch;
  c.input_length = j.at("input_length");
  c.widths = j.at("widths").get<std::vector<int>>();
  c.first_kernel = j.at("first_kernel");
  c.first_stride = j.at("first_stride");
  c.kernel = j.at("kernel");
  c.mel = mel_from_json(j.at("mel"));
  return c;
}

inline std::string encode_detector(const detectors::DetectorModel& m, const std::string& config_hash) {
  Checkpoint c;
  c.kind = "detector";
  c.header = {{"config", to_json(m.config)}, {"seed", m.seed}, {"trained", m.trained}, {"config_hash", config_hash}};
  c.vectors.push_back({"params", m.params});
  return encode_checkpoint(c);
}

inline detectors::DetectorModel load_detector(const std::filesystem::path& p, std::string* config_hash = nullptr) {
  const auto c = load_checkpoint(p, "detector");
  auto m = detectors::build_detector_from(detector_config_from_json(c.header.at("config")), c.header.at("seed").get<std::uint64_t>());
  check_size(c.vector("params"), m.params.size(), p.string());
  m.params = c.vector("params");
  m.trained = c.header.at("trained");
  if (config_hash) *config_hash = config_hash_of(c);
  return m;
}

// ---- GANs ----

inline json to_json(const afgan::GeneratorConfig& g) {
  return {{"id", afgan::to_string(g.id)}, {"length", g.length}, {"widths", g.widths}, {"kernel", g.kernel},
          {"noise_channels", g.noise_channels}, {"res_channels", g.res_channels}, {"res_blocks", g.res_blocks},
          {"res_kernel", g.res_kernel}};
}
inline json to_json(const afgan::DiscriminatorConfig& d) {
  return {{"length", d.length}, {"widths", d.widths}, {"kernels", d.kernels}, {"strides", d.strides}};
}
inline afgan::GeneratorConfig generator_config_from_json(const json& j) {
  afgan::GeneratorConfig g;
  const auto id = afgan::parse_gen_id(j.at("id").get<std::string>());
  if (!id) throw invalid_input("unknown generator id in checkpoint");
  g.id = *id;
  g.length = j.at("length");
  g.widths = j.at("widths").get<std::vector<int>>();
  g.kernel = j.at("kernel");
  g.noise_channels = j.at("noise_channels");
  g.res_channels = j.at("res_channels");
  g.res_blocks = j.at("res_blocks");
  g.res_kernel = j.at("res_kernel");
  return g;
}
inline afgan::DiscriminatorConfig discriminator_config_from_json(const json& j) {
  afgan::DiscriminatorConfig d;
  d.length = j.at("length");
  d.widths = j.at("widths").get<std::vector<int>>();
  d.kernels = j.at("kernels").get<std::vector<int>>();
  d.strides = j.at("strides").get<std::vector<int>>();
  return d;
}

inline std::string encode_gan(const afgan::GanBundle& g, const std::string& config_hash) {
  Checkpoint c;
  c.kind = "gan";
  c.header = {{"generator", to_json(g.gen_config)}, {"discriminator", to_json(g.disc_config)}, {"seed", g.seed},
              {"trained", g.trained}, {"config_hash", config_hash}};
  c.vectors.push_back({"generator", g.gen_params});
  c.vectors.push_back({"discriminator", g.disc_params});
  return encode_checkpoint(c);
}

inline afgan::GanBundle load_gan(const std::filesystem::path& p, std::string* config_hash = nullptr) {
  const auto c = load_checkpoint(p, "gan");
  auto g = afgan::build_gan_from(generator_config_from_json(c.header.at("generator")),
                                 discriminator_config_from_json(c.header.at("discriminator")), c.header.at("seed").get<std::uint64_t>());
  check_size(c.vector("generator"), g.gen_params.size(), p.string() + " generator");
  check_size(c.vector("discriminator"), g.disc_params.size(), p.string() + " discriminator");
  g.gen_params = c.vector("generator");
  g.disc_params = c.vector("discriminator");
  g.trained = c.header.at("trained");
  if (config_hash) *config_hash = config_hash_of(c);
  return g;
}

// ---- shield models ----

inline json to_json(const defense::ShieldConfig& s) {
  return {{"clip_length", s.clip_length},
          {"axis", s.axis == defense::PairAxis::time ? "time" : "channel"},
          {"widths", s.widths},
          {"first_kernel", s.first_kernel},
          {"first_stride", s.first_stride},
          {"kernel", s.kernel},
          {"segments", s.segments},
          {"embed_dim", s.embed_dim},
          {"margin", s.margin},
          {"y", s.y},
          {"distance", s.distance == defense::DistanceKind::squared_euclidean ? "squared" : "euclidean"}};
}
inline defense::ShieldConfig shield_config_from_json(const json& j) {
  defense::ShieldConfig s;
  s.clip_length = j.at("clip_length");
  s.axis = j.at("axis") == "time" ? defense::PairAxis::time : defense::PairAxis::channel;
  s.widths = j.at("widths").get<std::vector<int>>();
  s.first_kernel = j.at("first_kernel");
  s.first_stride = j.at("first_stride");
  s.kernel = j.at("kernel");
  s.segments = j.at("segments");
  s.embed_dim = j.at("embed_dim");
  s.margin = j.at("margin");
  s.y = j.at("y");
  s.distance = j.at("distance") == "squared" ? defense::DistanceKind::squared_euclidean : defense::DistanceKind::euclidean;
  return s;
}

inline std::string encode_shield(const defense::ShieldModel& m, afgan::GenId defense_gen, const std::string& config_hash) {
  Checkpoint c;
  c.kind = "shield";
  c.header = {{"config", to_json(m.config)}, {"seed", m.seed}, {"trained", m.trained},
              {"defense_gen", afgan::to_string(defense_gen)}, {"config_hash", config_hash}};
  c.vectors.push_back({"embedder", m.embedder_params});
  c.vectors.push_back({"head", m.head_params});
  return encode_checkpoint(c);
}

inline defense::ShieldModel load_shield(const std::filesystem::path& p, std::string* config_hash = nullptr) {
  const auto c = load_checkpoint(p, "shield");
  auto m = defense::build_shield(shield_config_from_json(c.header.at("config")), c.header.at("seed").get<std::uint64_t>());
  check_size(c.vector("embedder"), m.embedder_params.size(), p.string() + " embedder");
  check_size(c.vector("head"), m.head_params.size(), p.string() + " head");
  m.embedder_params = c.vector("embedder");
  m.head_params = c.vector("head");
  m.trained = c.header.at("trained");
  if (config_hash) *config_hash = config_hash_of(c);
  return m;
}

}  // namespace shield::io
