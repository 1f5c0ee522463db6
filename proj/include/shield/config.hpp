#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "shield/afgan/gan.hpp"
#include "shield/afgan/losses.hpp"
#include "shield/audio/waveform.hpp"
#include "shield/common.hpp"
#include "shield/defense/shield.hpp"
#include "shield/train_config.hpp"

namespace shield {

inline constexpr int kConfigSchemaVersion = 1;

struct StageConfig {
  int epochs = 10;
  int batch_size = 32;
  double learning_rate = 1e-4;

  TrainConfig train(std::uint64_t seed) const { return {epochs, batch_size, learning_rate, seed, Optimizer::adam}; }
};

// Every knob of a run. Serialized as one flat JSON object of dotted keys.
struct RunConfig {
  std::uint64_t seed = 2024;

  // Synthetic corpus, or an external manifest when corpus_manifest is set.
  std::size_t n_real = 1000;
  std::size_t n_fake = 1000;
  std::size_t clip_length = audio::kDefaultClipLength;
  int sample_rate_hz = audio::kDefaultSampleRate;
  std::string corpus_manifest;
  std::string corpus_root;

  StageConfig detector{10, 32, 1e-3};

  StageConfig gan{5, 32, 1e-3};
  std::size_t gan_train_fakes = 400;  // 0: all training fakes
  std::string gan_surrogates = "victims";  // or "independent": separately seeded detectors
  afgan::DiscriminatorLossForm d_loss_form = afgan::DiscriminatorLossForm::standard;
  double w_perceptual = 1.0;
  double w_adversarial = 1.0;
  double w_surrogate = 1.0;

  StageConfig shield{3, 32, 1e-3};
  std::size_t shield_triplets_per_epoch = 800;
  int shield_head_epochs = 30;
  double shield_head_learning_rate = 1e-3;
  int shield_embed_dim = 128;
  double shield_margin = 0.0;
  std::string shield_distance = "squared";
  std::string shield_axis = "time";
  bool include_plain_fakes = false;

  std::vector<afgan::GenId> gens = {afgan::GenId::G1, afgan::GenId::G2, afgan::GenId::G3};

  void validate() const {
    require(n_real >= 2 && n_fake >= 2, "corpus.n_real and corpus.n_fake must be >= 2");
    require(clip_length >= 64 && clip_length % 16 == 0, "corpus.clip_length must be a multiple of 16 and >= 64");
    require(sample_rate_hz >= 8000, "corpus.sample_rate_hz must be >= 8000");
    for (const auto* s : {&detector, &gan, &shield}) train_stage_check(*s);
    require(shield_head_epochs >= 0 && shield_head_learning_rate > 0, "invalid shield head settings");
    require(shield_embed_dim >= 1, "shield.embed_dim must be >= 1");
    require(shield_margin >= 0, "shield.margin must be >= 0");
    require(shield_distance == "squared" || shield_distance == "euclidean", "shield.distance must be squared or euclidean");
    require(gan_surrogates == "victims" || gan_surrogates == "independent", "gan.surrogates must be victims or independent");
    require(shield_axis == "time" || shield_axis == "channel", "shield.axis must be time or channel");
    require(!gens.empty(), "gens must list at least one generator");
    std::set<afgan::GenId> seen(gens.begin(), gens.end());
    require(seen.size() == gens.size(), "gens must not repeat");
    if (!corpus_manifest.empty() && !std::filesystem::exists(corpus_manifest))
      throw invalid_input("corpus.manifest does not exist: " + corpus_manifest);
    if (!corpus_root.empty() && !std::filesystem::is_directory(corpus_root))
      throw invalid_input("corpus.root is not a directory: " + corpus_root);
  }

  static void train_stage_check(const StageConfig& s) { s.train(0).validate(); }

  defense::ShieldConfig shield_model() const {
    defense::ShieldConfig c;
    c.clip_length = clip_length;
    c.embed_dim = shield_embed_dim;
    c.margin = shield_margin;
    c.distance = shield_distance == "squared" ? defense::DistanceKind::squared_euclidean : defense::DistanceKind::euclidean;
    c.axis = shield_axis == "time" ? defense::PairAxis::time : defense::PairAxis::channel;
    return c;
  }
};

inline nlohmann::json to_json(const RunConfig& c) {
  std::string gens;
  for (auto g : c.gens) gens += (gens.empty() ? "" : ",") + afgan::to_string(g);
  return {
      {"schema_version", kConfigSchemaVersion},
      {"seed", c.seed},
      {"corpus.n_real", c.n_real},
      {"corpus.n_fake", c.n_fake},
      {"corpus.clip_length", c.clip_length},
      {"corpus.sample_rate_hz", c.sample_rate_hz},
      {"corpus.manifest", c.corpus_manifest},
      {"corpus.root", c.corpus_root},
      {"detector.epochs", c.detector.epochs},
      {"detector.batch_size", c.detector.batch_size},
      {"detector.learning_rate", c.detector.learning_rate},
      {"gan.epochs", c.gan.epochs},
      {"gan.batch_size", c.gan.batch_size},
      {"gan.learning_rate", c.gan.learning_rate},
      {"gan.train_fakes", c.gan_train_fakes},
      {"gan.d_loss_form", afgan::to_string(c.d_loss_form)},
      {"gan.surrogates", c.gan_surrogates},
      {"gan.w_perceptual", c.w_perceptual},
      {"gan.w_adversarial", c.w_adversarial},
      {"gan.w_surrogate", c.w_surrogate},
      {"shield.epochs", c.shield.epochs},
      {"shield.batch_size", c.shield.batch_size},
      {"shield.learning_rate", c.shield.learning_rate},
      {"shield.triplets_per_epoch", c.shield_triplets_per_epoch},
      {"shield.head_epochs", c.shield_head_epochs},
      {"shield.head_learning_rate", c.shield_head_learning_rate},
      {"shield.embed_dim", c.shield_embed_dim},
      {"shield.margin", c.shield_margin},
      {"shield.distance", c.shield_distance},
      {"shield.axis", c.shield_axis},
      {"shield.include_plain_fakes", c.include_plain_fakes},
      {"gens", gens},
  };
}

inline std::vector<afgan::GenId> parse_gen_list(const std::string& s) {
  std::vector<afgan::GenId> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto end = s.find(',', start);
    const auto tok = s.substr(start, end == std::string::npos ? std::string::npos : end - start);
    const auto id = afgan::parse_gen_id(tok);
    if (!id) throw invalid_input("unknown generator '" + tok + "' (expected G1, G2 or G3)");
    out.push_back(*id);
    if (end == std::string::npos) break;
    start = end + 1;
  }
  return out;
}

// Applies the keys present in `j` on top of `c`. Unknown keys and wrong
// types are errors.
inline void apply_json(RunConfig& c, const nlohmann::json& j) {
  if (!j.is_object()) throw invalid_input("config must be a JSON object");
  if (j.contains("schema_version") && j.at("schema_version") != kConfigSchemaVersion)
    throw invalid_input("unsupported config schema_version " + j.at("schema_version").dump());
  const auto defaults = to_json(RunConfig{});
  for (const auto& [key, value] : j.items()) {
    if (!defaults.contains(key)) throw invalid_input("unknown config key '" + key + "'");
    const auto& d = defaults.at(key);
    const bool number_ok = d.is_number() && value.is_number() && (d.is_number_float() || value.is_number_integer());
    if (d.type() != value.type() && !number_ok) throw invalid_input("config key '" + key + "' has the wrong type");
    if (d.is_number_unsigned() && value.is_number_integer() && value.get<std::int64_t>() < 0)
      throw invalid_input("config key '" + key + "' must be non-negative");
  }
  const auto get = [&](const char* k, auto& dst) {
    if (j.contains(k)) dst = j.at(k).get<std::decay_t<decltype(dst)>>();
  };
  get("seed", c.seed);
  get("corpus.n_real", c.n_real);
  get("corpus.n_fake", c.n_fake);
  get("corpus.clip_length", c.clip_length);
  get("corpus.sample_rate_hz", c.sample_rate_hz);
  get("corpus.manifest", c.corpus_manifest);
  get("corpus.root", c.corpus_root);
  get("detector.epochs", c.detector.epochs);
  get("detector.batch_size", c.detector.batch_size);
  get("detector.learning_rate", c.detector.learning_rate);
  get("gan.epochs", c.gan.epochs);
  get("gan.batch_size", c.gan.batch_size);
  get("gan.learning_rate", c.gan.learning_rate);
  get("gan.train_fakes", c.gan_train_fakes);
  if (j.contains("gan.d_loss_form")) {
    const auto f = afgan::parse_d_loss_form(j.at("gan.d_loss_form").get<std::string>());
    if (!f) throw invalid_input("gan.d_loss_form must be standard or as_printed");
    c.d_loss_form = *f;
  }
  get("gan.surrogates", c.gan_surrogates);
  get("gan.w_perceptual", c.w_perceptual);
  get("gan.w_adversarial", c.w_adversarial);
  get("gan.w_surrogate", c.w_surrogate);
  get("shield.epochs", c.shield.epochs);
  get("shield.batch_size", c.shield.batch_size);
  get("shield.learning_rate", c.shield.learning_rate);
  get("shield.triplets_per_epoch", c.shield_triplets_per_epoch);
  get("shield.head_epochs", c.shield_head_epochs);
  get("shield.head_learning_rate", c.shield_head_learning_rate);
  get("shield.embed_dim", c.shield_embed_dim);
  get("shield.margin", c.shield_margin);
  get("shield.distance", c.shield_distance);
  get("shield.axis", c.shield_axis);
  get("shield.include_plain_fakes", c.include_plain_fakes);
  if (j.contains("gens")) c.gens = parse_gen_list(j.at("gens").get<std::string>());
}

inline RunConfig parse_config(const std::string& text, const std::string& name = "config") {
  RunConfig c;
  try {
    apply_json(c, nlohmann::json::parse(text));
  } catch (const nlohmann::json::exception& e) {
    throw invalid_input(name + ": " + e.what());
  }
  return c;
}

inline std::string config_text(const RunConfig& c) { return to_json(c).dump(2) + "\n"; }

// Hash of the canonical serialization; recorded in every checkpoint.
inline std::string config_hash(const RunConfig& c) {
  Fnv1a h;
  h.add(to_json(c).dump());
  return hex64(h.value());
}

}  // namespace shield
