#pragma once

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "shield/afgan/train.hpp"
#include "shield/audio/manifest.hpp"
#include "shield/audio/synth.hpp"
#include "shield/audio/wav_io.hpp"
#include "shield/config.hpp"
#include "shield/defense/analysis.hpp"
#include "shield/defense/shield.hpp"
#include "shield/detectors/detector.hpp"
#include "shield/dsp/mel.hpp"
#include "shield/dsp/plot.hpp"
#include "shield/eval/grids.hpp"
#include "shield/eval/splits.hpp"
#include "shield/io/checkpoint.hpp"

namespace shield::cli {

namespace fs = std::filesystem;

enum class TrainStage { detector, attack, defense, shield };
enum class EvalGrid { baseline, attack, defense, correlation };
enum class ExportKind { spectrogram, embeddings };

struct Options {
  RunConfig config;
  fs::path out = "run";
  int jobs = 1;
  std::vector<afgan::GenId> gens;          // --gen; empty means config.gens
  std::vector<afgan::GenId> attack_gens;   // --attack-gen
  std::vector<afgan::GenId> defense_gens;  // --defense-gen
  eval::DefenseSettings settings = eval::DefenseSettings::both;
  bool allow_mixed = false;
  std::vector<std::string> clips;  // export spectrogram: clip ids
  std::ostream* log = &std::cerr;
  std::ostream* table = &std::cout;
};

// Relative output directories resolve under SHIELD_OUT_ROOT when it is set.
inline fs::path resolve_out(const fs::path& out) {
  if (out.is_absolute()) return out;
  if (const char* root = std::getenv("SHIELD_OUT_ROOT"); root && *root) return fs::path(root) / out;
  return out;
}

// Fixed layout below the output directory.
struct Layout {
  fs::path root;

  fs::path corpus_dir() const { return root / "corpus"; }
  fs::path manifest() const { return corpus_dir() / "manifest.csv"; }
  fs::path checkpoint(const std::string& name) const { return root / "checkpoints" / (name + ".ckpt"); }
  fs::path history(const std::string& name) const { return root / "history" / (name + ".csv"); }
  fs::path report(const std::string& name) const { return root / "reports" / name; }
  fs::path exports() const { return root / "exports"; }
  fs::path config_copy(const std::string& command) const { return root / "config" / (command + ".json"); }
};

inline std::string victim_name(detectors::DetectorArch a) { return "victim_" + detectors::to_string(a); }
inline std::string surrogate_name(detectors::DetectorArch a) { return "surrogate_" + detectors::to_string(a); }
inline std::string gan_name(afgan::GenId g) { return "gan_" + afgan::to_string(g); }
inline std::string defense_name(afgan::GenId g) { return "defense_" + afgan::to_string(g); }
inline std::string shield_name(afgan::GenId g) { return "shield_" + afgan::to_string(g); }

inline const std::vector<detectors::DetectorArch>& archs() {
  static const std::vector<detectors::DetectorArch> a = {detectors::DetectorArch::raw_cnn, detectors::DetectorArch::spec_cnn};
  return a;
}

class Context {
 public:
  explicit Context(const Options& o) : opts_(o), layout_{resolve_out(o.out)}, hash_(config_hash(o.config)) {}

  const Options& opts() const { return opts_; }
  const RunConfig& cfg() const { return opts_.config; }
  const Layout& layout() const { return layout_; }
  const std::string& hash() const { return hash_; }
  std::ostream& log() const { return *opts_.log; }

  void write_config(const std::string& command) const {
    io::write_bytes(layout_.config_copy(command), config_text(cfg()));
  }

  std::vector<afgan::GenId> gens(const std::vector<afgan::GenId>& flag) const { return flag.empty() ? cfg().gens : flag; }

  fs::path manifest_path() const {
    return cfg().corpus_manifest.empty() ? layout_.manifest() : fs::path(cfg().corpus_manifest);
  }
  fs::path corpus_root() const {
    if (!cfg().corpus_root.empty()) return cfg().corpus_root;
    return cfg().corpus_manifest.empty() ? layout_.corpus_dir() : fs::path(cfg().corpus_manifest).parent_path();
  }

  // Real and fake clips of the corpus; attacked rows of external manifests
  // are not part of the clean corpus.
  const std::vector<audio::LabeledClip>& corpus() {
    if (!corpus_) {
      const auto path = manifest_path();
      if (!fs::exists(path)) throw missing_dependency("corpus manifest " + path.string() + " not found; run gen-corpus first");
      audio::LoadOptions lo;
      lo.sample_rate_hz = cfg().sample_rate_hz;
      lo.clip_length = cfg().clip_length;
      auto clips = audio::load_manifest(corpus_root(), path, lo);
      std::vector<audio::LabeledClip> kept;
      for (auto& c : clips)
        if (c.label != audio::Label::attacked) kept.push_back(std::move(c));
      corpus_ = std::move(kept);
    }
    return *corpus_;
  }

  const eval::SplitSet& splits() {
    if (!splits_) splits_ = eval::split_clips(corpus(), cfg().seed);
    return *splits_;
  }

  std::vector<eval::Corpus> held_out_corpora() { return eval::group_by_source(splits().held_out()); }

  void note_hash(const std::string& what, const std::string& h) { hashes_[what] = h; }

  void check_hashes() const {
    std::set<std::string> distinct;
    for (const auto& [what, h] : hashes_) distinct.insert(h);
    if (distinct.size() > 1 && !opts_.allow_mixed) {
      std::string msg = "checkpoints come from different configs (pass --allow-mixed to override):";
      for (const auto& [what, h] : hashes_) msg += " " + what + "=" + h;
      throw invalid_input(msg);
    }
  }
  const std::map<std::string, std::string>& hashes() const { return hashes_; }

  detectors::DetectorModel load_detector(const std::string& name) {
    std::string h;
    auto m = io::load_detector(layout_.checkpoint(name), &h);
    note_hash(name, h);
    return m;
  }
  afgan::GanBundle load_gan(const std::string& name) {
    std::string h;
    auto g = io::load_gan(layout_.checkpoint(name), &h);
    note_hash(name, h);
    return g;
  }
  defense::ShieldModel load_shield(const std::string& name) {
    std::string h;
    auto m = io::load_shield(layout_.checkpoint(name), &h);
    note_hash(name, h);
    return m;
  }

 private:
  Options opts_;
  Layout layout_;
  std::string hash_;
  std::optional<std::vector<audio::LabeledClip>> corpus_;
  std::optional<eval::SplitSet> splits_;
  std::map<std::string, std::string> hashes_;
};

inline std::string timestamp_utc() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// ---- gen-corpus ----

inline void cmd_gen_corpus(const Options& o) {
  o.config.validate();
  Context ctx(o);
  const auto& L = ctx.layout();
  fs::create_directories(L.corpus_dir() / "real");
  fs::create_directories(L.corpus_dir() / "fake");
  audio::SynthConfig sc;
  sc.clip_length = ctx.cfg().clip_length;
  sc.sample_rate_hz = ctx.cfg().sample_rate_hz;
  const auto reals = audio::synth_real(derive_seed(ctx.cfg().seed, "corpus-real"), ctx.cfg().n_real, sc);
  const auto fakes = audio::synth_fake(derive_seed(ctx.cfg().seed, "corpus-fake"), ctx.cfg().n_fake, sc);
  std::vector<audio::ManifestEntry> entries;
  char name[64];
  for (std::size_t i = 0; i < reals.size(); ++i) {
    std::snprintf(name, sizeof name, "real/real_%05zu.wav", i);
    audio::write_wav(L.corpus_dir() / name, reals[i].waveform);
    entries.push_back({name, audio::Label::real, "synthetic"});
  }
  for (std::size_t i = 0; i < fakes.size(); ++i) {
    std::snprintf(name, sizeof name, "fake/fake_%05zu.wav", i);
    audio::write_wav(L.corpus_dir() / name, fakes[i].waveform);
    entries.push_back({name, audio::Label::fake, "synthetic"});
  }
  io::write_bytes(L.manifest(), audio::format_manifest(entries));
  ctx.write_config("gen-corpus");
  ctx.log() << "gen-corpus: wrote " << entries.size() << " clips to " << L.corpus_dir().string() << '\n';
}

// ---- train ----

inline std::string epoch_history_csv(const std::vector<double>& losses) {
  std::ostringstream os;
  os.precision(17);
  os << "epoch,loss\n";
  for (std::size_t i = 0; i < losses.size(); ++i) os << i << ',' << losses[i] << '\n';
  return os.str();
}

inline detectors::DetectorConfig detector_config(const RunConfig& cfg, detectors::DetectorArch arch) {
  auto dc = detectors::default_detector_config(arch);
  dc.input_length = cfg.clip_length;
  dc.mel.sample_rate_hz = cfg.sample_rate_hz;
  return dc;
}

// Victims always; separately seeded surrogates only when the config asks
// for them.
inline void train_detectors(Context& ctx) {
  const auto& train = ctx.splits().train;
  std::vector<std::string> roles = {"victim"};
  if (ctx.cfg().gan_surrogates == "independent") roles.push_back("surrogate");
  for (const auto& role : roles) {
    for (auto arch : archs()) {
      const std::string name = role + "_" + detectors::to_string(arch);
      const auto seed = derive_seed(ctx.cfg().seed, name);
      detectors::DetectorTrainLog log;
      auto m = detectors::train_detector(detectors::build_detector_from(detector_config(ctx.cfg(), arch), seed), train, ctx.cfg().detector.train(seed), &log,
                                         [&](int e, double l) { ctx.log() << "  " << name << " epoch " << e << " loss " << l << '\n'; });
      io::write_bytes(ctx.layout().checkpoint(name), io::encode_detector(m, ctx.hash()));
      io::write_bytes(ctx.layout().history(name), epoch_history_csv(log.epoch_loss));
    }
  }
}

inline std::vector<detectors::DetectorModel> load_surrogates(Context& ctx) {
  std::vector<detectors::DetectorModel> out;
  const bool own = ctx.cfg().gan_surrogates == "independent";
  for (auto arch : archs()) out.push_back(ctx.load_detector(own ? surrogate_name(arch) : victim_name(arch)));
  return out;
}

inline void train_attacks(Context& ctx, const std::vector<afgan::GenId>& gens) {
  const auto surrogates = load_surrogates(ctx);
  const auto reals = eval::with_label(ctx.splits().train, audio::Label::real);
  auto fakes = eval::with_label(ctx.splits().train, audio::Label::fake);
  if (ctx.cfg().gan_train_fakes > 0 && fakes.size() > ctx.cfg().gan_train_fakes) fakes.resize(ctx.cfg().gan_train_fakes);
  afgan::AttackOptions ao;
  ao.weights = {ctx.cfg().w_perceptual, ctx.cfg().w_adversarial, ctx.cfg().w_surrogate};
  ao.d_loss_form = ctx.cfg().d_loss_form;
  for (auto id : gens) {
    const std::string name = gan_name(id);
    const auto seed = derive_seed(ctx.cfg().seed, name);
    auto gan = afgan::build_gan(id, seed, ctx.cfg().clip_length);
    auto result = afgan::train_attack(std::move(gan), reals, fakes, surrogates, ctx.cfg().gan.train(seed), ao,
                                      [&](const afgan::AttackLossReport& r) {
                                        ctx.log() << "  " << name << " epoch " << r.epoch << " p " << r.p_loss << " a " << r.a_loss
                                                  << " s " << r.s_loss << " d " << r.d_loss << '\n';
                                      });
    io::write_bytes(ctx.layout().checkpoint(name), io::encode_gan(result.gan, ctx.hash()));
    io::write_bytes(ctx.layout().history(name), afgan::loss_history_csv(result.steps));
  }
}

// The defense generator reuses the attack-trained GAN of the same id.
inline void train_defenses(Context& ctx, const std::vector<afgan::GenId>& gens) {
  for (auto id : gens) {
    const auto src = ctx.layout().checkpoint(gan_name(id));
    if (!fs::exists(src)) throw missing_dependency("defense " + afgan::to_string(id) + " needs " + src.string() + "; run train attack first");
    const auto gan = ctx.load_gan(gan_name(id));
    io::write_bytes(ctx.layout().checkpoint(defense_name(id)), io::encode_gan(gan, ctx.hash()));
  }
}

inline std::vector<defense::PairedClip> build_pairs(const std::vector<audio::LabeledClip>& reals,
                                                    const std::vector<audio::LabeledClip>& attacked,
                                                    const std::vector<audio::LabeledClip>& plain_fakes,
                                                    const afgan::GanBundle& defense_gan) {
  std::vector<defense::PairedClip> pairs;
  defense::PairPolicy policy{true};
  for (const auto* set : {&reals, &attacked, &plain_fakes})
    for (const auto& c : *set) pairs.push_back(defense::make_pair(c, defense_gan, policy));
  return pairs;
}

inline void train_shields(Context& ctx, const std::vector<afgan::GenId>& gens) {
  for (auto id : gens) {
    const auto defense_path = ctx.layout().checkpoint(defense_name(id));
    if (!fs::exists(defense_path))
      throw missing_dependency("shield " + afgan::to_string(id) + " needs defense checkpoint " + defense_path.string());
    const auto gd = ctx.load_gan(defense_name(id));
    const auto& train = ctx.splits().train;
    const auto reals = eval::with_label(train, audio::Label::real);
    const auto fakes = eval::with_label(train, audio::Label::fake);
    const auto attacked = eval::attack_all(gd, fakes);
    const auto pairs = build_pairs(reals, attacked, ctx.cfg().include_plain_fakes ? fakes : std::vector<audio::LabeledClip>{}, gd);

    const std::string name = shield_name(id);
    const auto seed = derive_seed(ctx.cfg().seed, name);
    defense::ShieldTrainOptions so;
    so.triplets_per_epoch = ctx.cfg().shield_triplets_per_epoch;
    so.head_epochs = ctx.cfg().shield_head_epochs;
    so.head_learning_rate = ctx.cfg().shield_head_learning_rate;
    defense::ShieldTrainLog log;
    auto m = defense::train_shield(defense::build_shield(ctx.cfg().shield_model(), seed), pairs, ctx.cfg().shield.train(seed), so, &log,
                                   [&](const std::string& stage, int e, double l) {
                                     if (stage == "triplet" || (e + 1) % 10 == 0)
                                       ctx.log() << "  " << name << ' ' << stage << " epoch " << e << " loss " << l << '\n';
                                   });
    io::write_bytes(ctx.layout().checkpoint(name), io::encode_shield(m, id, ctx.hash()));
    std::ostringstream os;
    os.precision(17);
    os << "stage,epoch,loss\n";
    for (std::size_t e = 0; e < log.triplet_loss.size(); ++e) os << "triplet," << e << ',' << log.triplet_loss[e] << '\n';
    for (std::size_t e = 0; e < log.head_loss.size(); ++e) os << "head," << e << ',' << log.head_loss[e] << '\n';
    io::write_bytes(ctx.layout().history(name), os.str());
  }
}

inline std::string stage_name(TrainStage s) {
  switch (s) {
    case TrainStage::detector: return "detector";
    case TrainStage::attack: return "attack";
    case TrainStage::defense: return "defense";
    case TrainStage::shield: return "shield";
  }
  return "?";
}

inline void cmd_train(TrainStage stage, const Options& o) {
  o.config.validate();
  Context ctx(o);
  const auto t0 = std::chrono::steady_clock::now();
  switch (stage) {
    case TrainStage::detector: train_detectors(ctx); break;
    case TrainStage::attack: train_attacks(ctx, ctx.gens(o.gens.empty() ? o.attack_gens : o.gens)); break;
    case TrainStage::defense: train_defenses(ctx, ctx.gens(o.gens.empty() ? o.defense_gens : o.gens)); break;
    case TrainStage::shield: train_shields(ctx, ctx.gens(o.gens.empty() ? o.defense_gens : o.gens)); break;
  }
  ctx.write_config("train-" + stage_name(stage));
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  ctx.log() << "train " << stage_name(stage) << ": done in " << secs << " s\n";
}

// ---- eval ----

inline std::string grid_name(EvalGrid g) {
  switch (g) {
    case EvalGrid::baseline: return "baseline";
    case EvalGrid::attack: return "attack";
    case EvalGrid::defense: return "defense";
    case EvalGrid::correlation: return "correlation";
  }
  return "?";
}

inline void write_report(Context& ctx, const eval::EvalReport& r, const std::string& name) {
  io::write_bytes(ctx.layout().report(name + ".csv"), eval::report_csv(r));
  nlohmann::json meta;
  meta["kind"] = r.kind;
  meta["metadata"] = r.metadata;
  meta["config_hash"] = ctx.hash();
  meta["seed"] = ctx.cfg().seed;
  meta["checkpoint_hashes"] = ctx.hashes();
  meta["rows"] = r.rows.size();
  meta["timestamp"] = timestamp_utc();
  io::write_bytes(ctx.layout().report(name + ".json"), meta.dump(2) + "\n");
}

inline std::vector<eval::NamedDetector> named(const std::vector<detectors::DetectorModel>& ms) {
  std::vector<eval::NamedDetector> out;
  for (const auto& m : ms) out.push_back({victim_name(m.config.arch), &m});
  return out;
}

inline eval::EvalReport cmd_eval(EvalGrid grid, const Options& o) {
  o.config.validate();
  Context ctx(o);
  eval::EvalReport report;
  std::vector<detectors::DetectorModel> victims;
  std::map<afgan::GenId, afgan::GanBundle> gans;
  std::map<afgan::GenId, defense::ShieldModel> shields;
  // Load and check every dependency before evaluating anything.
  if (grid == EvalGrid::baseline || grid == EvalGrid::attack)
    for (auto arch : archs()) victims.push_back(ctx.load_detector(victim_name(arch)));
  const auto attack_gens = ctx.gens(o.attack_gens.empty() ? o.gens : o.attack_gens);
  const auto defense_gens = ctx.gens(o.defense_gens.empty() ? o.gens : o.defense_gens);
  if (grid == EvalGrid::attack)
    for (auto g : attack_gens) gans.emplace(g, ctx.load_gan(gan_name(g)));
  if (grid == EvalGrid::defense) {
    std::set<afgan::GenId> all(attack_gens.begin(), attack_gens.end());
    all.insert(defense_gens.begin(), defense_gens.end());
    for (auto g : all) gans.emplace(g, ctx.load_gan(defense_name(g)));
    for (auto g : all) shields.emplace(g, ctx.load_shield(shield_name(g)));
  }
  if (grid == EvalGrid::correlation)
    for (auto g : defense_gens) gans.emplace(g, ctx.load_gan(defense_name(g)));
  ctx.check_hashes();

  const auto corpora = ctx.held_out_corpora();
  switch (grid) {
    case EvalGrid::baseline: report = eval::run_baseline_grid(named(victims), corpora, o.jobs); break;
    case EvalGrid::attack: {
      std::vector<const afgan::GanBundle*> gp;
      for (auto g : attack_gens) gp.push_back(&gans.at(g));
      report = eval::run_attack_grid(named(victims), gp, corpora, o.jobs);
      break;
    }
    case EvalGrid::defense: {
      std::map<afgan::GenId, const afgan::GanBundle*> gp;
      std::map<afgan::GenId, const defense::ShieldModel*> sp;
      for (auto& [g, b] : gans) gp[g] = &b;
      for (auto& [g, s] : shields) sp[g] = &s;
      report = eval::run_defense_grid(sp, gp, corpora, o.settings, o.jobs);
      break;
    }
    case EvalGrid::correlation: {
      report.kind = "correlation";
      std::vector<std::string> warnings;
      for (const auto& corpus : corpora) {
        const auto reals = eval::with_label(corpus.clips, audio::Label::real);
        const auto fakes = eval::with_label(corpus.clips, audio::Label::fake);
        for (auto g : defense_gens) {
          // Clips attacked by the same generator that reconstructs them unless
          // --attack-gen picks another one.
          const auto attack_id = o.attack_gens.empty() ? g : o.attack_gens.front();
          const auto attacker = attack_id == g ? gans.at(g) : ctx.load_gan(gan_name(attack_id));
          const auto attacked = eval::attack_all(attacker, fakes);
          eval::merge_into(report, eval::run_correlation_report(gans.at(g), reals, attacked, eval::setting_name(attack_id, g),
                                                                corpus.name, &warnings));
        }
      }
      for (const auto& w : warnings) ctx.log() << "warning: " << w << '\n';
      ctx.check_hashes();
      break;
    }
  }
  write_report(ctx, report, grid_name(grid));
  ctx.write_config("eval-" + grid_name(grid));
  *o.table << eval::report_table(report);
  return report;
}

// ---- export ----

inline void cmd_export(ExportKind kind, const Options& o) {
  o.config.validate();
  Context ctx(o);
  const auto held = ctx.splits().held_out();
  if (kind == ExportKind::spectrogram) {
    std::vector<audio::LabeledClip> picked;
    if (o.clips.empty()) {
      for (auto label : {audio::Label::real, audio::Label::fake})
        for (const auto& c : held)
          if (c.label == label) {
            picked.push_back(c);
            break;
          }
    } else {
      for (const auto& id : o.clips) {
        const auto it = std::find_if(ctx.corpus().begin(), ctx.corpus().end(), [&](const audio::LabeledClip& c) { return c.id == id; });
        if (it == ctx.corpus().end()) throw invalid_input("no clip with id '" + id + "' in the corpus");
        picked.push_back(*it);
      }
    }
    for (auto g : o.attack_gens) {
      const auto gan = ctx.load_gan(gan_name(g));
      for (std::size_t i = 0, n = picked.size(); i < n; ++i)
        if (picked[i].label == audio::Label::fake) {
          auto a = picked[i];
          a.waveform = afgan::apply_attack(gan, a.waveform);
          a.label = audio::Label::attacked;
          a.id += "@" + afgan::to_string(g);
          picked.push_back(std::move(a));
        }
    }
    dsp::MelConfig mc;
    mc.sample_rate_hz = ctx.cfg().sample_rate_hz;
    for (const auto& c : picked) {
      std::string stem = c.id;
      for (char& ch : stem)
        if (ch == '/' || ch == '@' || ch == '.') ch = '_';
      const auto files = dsp::export_spectrogram_plot(dsp::log_mel_spectrogram(c.waveform, mc),
                                                      ctx.layout().exports() / "spectrograms" / (stem + ".bmp"));
      ctx.log() << "export: " << files.image.string() << '\n';
    }
  } else {
    for (auto g : ctx.gens(o.defense_gens.empty() ? o.gens : o.defense_gens)) {
      const auto model = ctx.load_shield(shield_name(g));
      const auto gd = ctx.load_gan(defense_name(g));
      const auto attack_id = o.attack_gens.empty() ? g : o.attack_gens.front();
      const auto attacker = attack_id == g ? gd : ctx.load_gan(gan_name(attack_id));
      ctx.check_hashes();
      const auto pairs = build_pairs(eval::with_label(held, audio::Label::real),
                                     eval::attack_all(attacker, eval::with_label(held, audio::Label::fake)), {}, gd);
      const auto emb = defense::embed_all(model, pairs);
      const auto sep = defense::separation(emb);
      const std::string stem = "embeddings_" + eval::setting_name(attack_id, g);
      std::string file = stem;
      for (char& ch : file)
        if (ch == '>') ch = '_';
      io::write_bytes(ctx.layout().exports() / (file + ".csv"), defense::embeddings_csv(emb));
      nlohmann::json meta = {{"setting", eval::setting_name(attack_id, g)}, {"n", sep.n},
                             {"silhouette", sep.silhouette}, {"mean_intra", sep.mean_intra},
                             {"mean_inter", sep.mean_inter}, {"config_hash", ctx.hash()}};
      io::write_bytes(ctx.layout().exports() / (file + ".json"), meta.dump(2) + "\n");
      ctx.log() << "export: " << file << ".csv silhouette " << sep.silhouette << '\n';
    }
  }
  ctx.write_config(kind == ExportKind::spectrogram ? "export-spectrogram" : "export-embeddings");
}

}  // namespace shield::cli
