#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "shield/afgan/gan.hpp"
#include "shield/audio/waveform.hpp"
#include "shield/defense/shield.hpp"
#include "shield/detectors/detector.hpp"
#include "shield/dsp/correlation.hpp"
#include "shield/eval/parallel.hpp"
#include "shield/eval/report.hpp"
#include "shield/eval/splits.hpp"

namespace shield::eval {

struct NamedDetector {
  std::string name;
  const detectors::DetectorModel* model = nullptr;
};

enum class DefenseSettings { match, mismatch, both };

inline std::string to_string(DefenseSettings s) {
  switch (s) {
    case DefenseSettings::match: return "match";
    case DefenseSettings::mismatch: return "mismatch";
    case DefenseSettings::both: return "both";
  }
  return "?";
}
inline std::optional<DefenseSettings> parse_settings(const std::string& s) {
  if (s == "match") return DefenseSettings::match;
  if (s == "mismatch") return DefenseSettings::mismatch;
  if (s == "both") return DefenseSettings::both;
  return std::nullopt;
}

inline std::string setting_name(afgan::GenId attack, afgan::GenId defense) {
  return afgan::to_string(attack) + "->" + afgan::to_string(defense);
}

inline std::vector<audio::LabeledClip> attack_all(const afgan::GanBundle& gan, const std::vector<audio::LabeledClip>& fakes) {
  std::vector<audio::LabeledClip> out;
  out.reserve(fakes.size());
  for (const auto& c : fakes) {
    audio::LabeledClip a = c;
    a.waveform = afgan::apply_attack(gan, c.waveform);
    a.label = audio::Label::attacked;
    a.source = c.source;
    out.push_back(std::move(a));
  }
  return out;
}

inline void add_class_rows(EvalReport& r, const std::string& setting, const std::string& corpus, const ClassCounts& c,
                           const std::string& other_name) {
  r.add(setting, corpus, "acc_joint", c.joint(), c.total());
  r.add(setting, corpus, "recall_real", c.recall_real(), c.real_total);
  r.add(setting, corpus, "recall_" + other_name, c.recall_other(), c.other_total);
}

// Appends an "average" row for every (corpus, metric) over the given member
// settings. n is the summed sample count of the members.
inline void add_average_rows(EvalReport& r, const std::vector<std::string>& members, const std::string& avg_setting,
                             const std::vector<std::string>& metrics, const std::string& avg_metric_prefix = "") {
  std::map<std::pair<std::string, std::string>, std::pair<std::vector<double>, std::size_t>> acc;
  for (const auto& row : r.rows) {
    if (std::find(members.begin(), members.end(), row.setting) == members.end()) continue;
    if (std::find(metrics.begin(), metrics.end(), row.metric) == metrics.end()) continue;
    auto& slot = acc[{row.corpus, row.metric}];
    slot.first.push_back(row.value);
    slot.second += row.n;
  }
  for (const auto& [key, vals] : acc) r.add(avg_setting, key.first, avg_metric_prefix + key.second, mean_of(vals.first), vals.second);
}

inline void require_trained(const detectors::DetectorModel* m, const std::string& name) {
  if (!m) throw missing_dependency("detector '" + name + "' is missing");
  if (!m->trained) throw invalid_input("detector '" + name + "' is untrained");
}

// Accuracy of every detector on every corpus (real + fake) plus a per-corpus
// average row.
inline EvalReport run_baseline_grid(const std::vector<NamedDetector>& dets, const std::vector<Corpus>& corpora, int jobs = 1) {
  if (dets.empty() || corpora.empty()) throw invalid_input("baseline grid needs detectors and corpora");
  for (const auto& d : dets) require_trained(d.model, d.name);
  std::vector<std::pair<std::size_t, std::size_t>> cells;
  for (std::size_t d = 0; d < dets.size(); ++d)
    for (std::size_t c = 0; c < corpora.size(); ++c) cells.emplace_back(d, c);
  std::vector<ClassCounts> counts(cells.size());
  parallel_for(cells.size(), jobs, [&](std::size_t k) {
    const auto& [d, c] = cells[k];
    for (const auto& clip : corpora[c].clips)
      counts[k].add(clip.label == audio::Label::real, detectors::predicts_real(detectors::detect(*dets[d].model, clip.waveform)));
  });
  EvalReport r;
  r.kind = "baseline";
  std::vector<std::string> names;
  for (std::size_t k = 0; k < cells.size(); ++k) {
    const auto& [d, c] = cells[k];
    add_class_rows(r, dets[d].name, corpora[c].name, counts[k], "fake");
  }
  for (const auto& d : dets) names.push_back(d.name);
  add_average_rows(r, names, "average", {"acc_joint", "recall_real", "recall_fake"});
  r.sort_rows();
  check_report(r);
  return r;
}

// Victim accuracy before and after each attack. Per (detector, gan, corpus):
// acc_baseline on real+fake, acc_joint on real+attacked, acc_fake and
// acc_attacked on the fake clips alone, and the two deltas.
inline EvalReport run_attack_grid(const std::vector<NamedDetector>& dets, const std::vector<const afgan::GanBundle*>& gans,
                                  const std::vector<Corpus>& corpora, int jobs = 1) {
  if (dets.empty() || gans.empty() || corpora.empty()) throw invalid_input("attack grid needs detectors, gans and corpora");
  for (const auto& d : dets) require_trained(d.model, d.name);
  for (const auto* g : gans) {
    if (!g) throw missing_dependency("attack gan is missing");
    if (!g->trained) throw invalid_input("gan " + afgan::to_string(g->id) + " is untrained");
  }
  // Attacked copies are shared by all detectors.
  std::vector<std::vector<audio::LabeledClip>> attacked(gans.size() * corpora.size());
  parallel_for(attacked.size(), jobs, [&](std::size_t k) {
    const auto& corpus = corpora[k % corpora.size()];
    attacked[k] = attack_all(*gans[k / corpora.size()], with_label(corpus.clips, audio::Label::fake));
  });

  struct Cell {
    std::size_t d, c;
    ClassCounts base;
    std::vector<bool> real_ok;  // per real clip, reused for every gan
  };
  std::vector<Cell> base(dets.size() * corpora.size());
  parallel_for(base.size(), jobs, [&](std::size_t k) {
    auto& cell = base[k];
    cell.d = k / corpora.size();
    cell.c = k % corpora.size();
    for (const auto& clip : corpora[cell.c].clips) {
      const bool is_real = clip.label == audio::Label::real;
      const bool said_real = detectors::predicts_real(detectors::detect(*dets[cell.d].model, clip.waveform));
      cell.base.add(is_real, said_real);
      if (is_real) cell.real_ok.push_back(said_real);
    }
  });
  std::vector<ClassCounts> att(dets.size() * gans.size() * corpora.size());
  parallel_for(att.size(), jobs, [&](std::size_t k) {
    const std::size_t c = k % corpora.size(), gi = (k / corpora.size()) % gans.size(), d = k / (corpora.size() * gans.size());
    const auto& cell = base[d * corpora.size() + c];
    for (bool ok : cell.real_ok) att[k].add(true, ok);
    for (const auto& clip : attacked[gi * corpora.size() + c])
      att[k].add(false, detectors::predicts_real(detectors::detect(*dets[d].model, clip.waveform)));
  });

  EvalReport r;
  r.kind = "attack";
  std::map<std::string, std::vector<std::string>> by_gan;
  for (std::size_t k = 0; k < att.size(); ++k) {
    const std::size_t c = k % corpora.size(), gi = (k / corpora.size()) % gans.size(), d = k / (corpora.size() * gans.size());
    const auto& b = base[d * corpora.size() + c].base;
    const auto& a = att[k];
    const std::string gname = afgan::to_string(gans[gi]->id);
    const std::string setting = dets[d].name + "/" + gname;
    const std::string& corpus = corpora[c].name;
    r.add(setting, corpus, "acc_baseline", b.joint(), b.total());
    r.add(setting, corpus, "acc_joint", a.joint(), a.total());
    r.add(setting, corpus, "delta_joint", b.joint() - a.joint(), a.total());
    r.add(setting, corpus, "acc_fake", b.recall_other(), b.other_total);
    r.add(setting, corpus, "acc_attacked", a.recall_other(), a.other_total);
    r.add(setting, corpus, "delta_attacked", b.recall_other() - a.recall_other(), a.other_total);
    auto& members = by_gan[gname];
    if (std::find(members.begin(), members.end(), setting) == members.end()) members.push_back(setting);
  }
  const std::vector<std::string> metrics = {"acc_baseline", "acc_joint", "delta_joint", "acc_fake", "acc_attacked", "delta_attacked"};
  for (const auto& [gname, members] : by_gan) add_average_rows(r, members, "average/" + gname, metrics);
  r.sort_rows();
  check_report(r);
  return r;
}

inline std::vector<std::pair<afgan::GenId, afgan::GenId>> defense_cells(const std::vector<afgan::GenId>& gens, DefenseSettings s) {
  std::vector<std::pair<afgan::GenId, afgan::GenId>> cells;
  for (auto i : gens)
    for (auto j : gens) {
      const bool match = i == j;
      if ((match && s != DefenseSettings::mismatch) || (!match && s != DefenseSettings::match)) cells.emplace_back(i, j);
    }
  return cells;
}

// SHIELD accuracy for attack G_i and defense G_j: fakes are attacked with G_i,
// every clip is paired through G_j and scored by the shield model trained
// under G_j. All cells are checked before any is evaluated.
inline EvalReport run_defense_grid(const std::map<afgan::GenId, const defense::ShieldModel*>& shields,
                                   const std::map<afgan::GenId, const afgan::GanBundle*>& gans, const std::vector<Corpus>& corpora,
                                   DefenseSettings settings, int jobs = 1) {
  if (gans.empty() || corpora.empty()) throw invalid_input("defense grid needs gans and corpora");
  std::vector<afgan::GenId> gens;
  for (const auto& [id, g] : gans) gens.push_back(id);
  const auto cells = defense_cells(gens, settings);
  for (const auto& [i, j] : cells) {
    const auto cell = setting_name(i, j);
    const auto gi = gans.find(i), gj = gans.find(j);
    if (gi == gans.end() || !gi->second || !gi->second->trained) throw missing_dependency("cell " + cell + ": attack gan " + afgan::to_string(i) + " missing or untrained");
    if (gj == gans.end() || !gj->second || !gj->second->trained) throw missing_dependency("cell " + cell + ": defense gan " + afgan::to_string(j) + " missing or untrained");
    const auto s = shields.find(j);
    if (s == shields.end() || !s->second || !s->second->trained) throw missing_dependency("cell " + cell + ": shield model for defense " + afgan::to_string(j) + " missing or untrained");
  }

  std::map<std::pair<afgan::GenId, std::size_t>, std::vector<audio::LabeledClip>> attacked;
  {
    std::vector<std::pair<afgan::GenId, std::size_t>> keys;
    for (auto i : gens)
      for (std::size_t c = 0; c < corpora.size(); ++c) keys.emplace_back(i, c);
    std::vector<std::vector<audio::LabeledClip>> out(keys.size());
    parallel_for(keys.size(), jobs, [&](std::size_t k) {
      out[k] = attack_all(*gans.at(keys[k].first), with_label(corpora[keys[k].second].clips, audio::Label::fake));
    });
    for (std::size_t k = 0; k < keys.size(); ++k) attacked[keys[k]] = std::move(out[k]);
  }
  std::vector<ClassCounts> counts(cells.size() * corpora.size());
  parallel_for(counts.size(), jobs, [&](std::size_t k) {
    const auto& [i, j] = cells[k / corpora.size()];
    const std::size_t c = k % corpora.size();
    const auto& model = *shields.at(j);
    const auto& gd = *gans.at(j);
    for (const auto& clip : with_label(corpora[c].clips, audio::Label::real))
      counts[k].add(true, detectors::predicts_real(defense::shield_detect(model, gd, clip.waveform)));
    for (const auto& clip : attacked.at({i, c}))
      counts[k].add(false, detectors::predicts_real(defense::shield_detect(model, gd, clip.waveform)));
  });

  EvalReport r;
  r.kind = "defense";
  std::vector<std::string> match_members, mismatch_members;
  std::map<afgan::GenId, std::vector<std::string>> mismatch_by_attack;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    const auto& [i, j] = cells[k / corpora.size()];
    const auto name = setting_name(i, j);
    add_class_rows(r, name, corpora[k % corpora.size()].name, counts[k], "attacked");
    auto& group = i == j ? match_members : mismatch_members;
    if (std::find(group.begin(), group.end(), name) == group.end()) group.push_back(name);
    if (i != j) {
      auto& m = mismatch_by_attack[i];
      if (std::find(m.begin(), m.end(), name) == m.end()) m.push_back(name);
    }
  }
  const std::vector<std::string> metrics = {"acc_joint", "recall_attacked", "recall_real"};
  if (!match_members.empty()) add_average_rows(r, match_members, "average/match", metrics);
  if (!mismatch_members.empty()) add_average_rows(r, mismatch_members, "average/mismatch", metrics);
  for (const auto& [i, members] : mismatch_by_attack) add_average_rows(r, members, "average/" + afgan::to_string(i) + "->*", metrics);
  r.sort_rows();
  check_report(r);
  r.metadata["settings"] = to_string(settings);
  return r;
}

struct CorrelationStats {
  double mean = 0.0;
  double stddev = 0.0;
  std::size_t n = 0;
  std::size_t skipped = 0;
};

inline CorrelationStats correlation_stats(const afgan::GanBundle& defense, const std::vector<audio::LabeledClip>& clips,
                                          std::vector<std::string>* warnings = nullptr) {
  CorrelationStats s;
  std::vector<double> rs;
  for (const auto& c : clips) {
    const auto recon = defense::apply_defense_generator(defense, c.waveform);
    try {
      rs.push_back(dsp::pearson_correlation(c.waveform, recon));
    } catch (const Error& e) {
      ++s.skipped;
      if (warnings) warnings->push_back("skipped " + c.id + ": " + e.what());
    }
  }
  s.n = rs.size();
  if (rs.empty()) throw invalid_input("correlation: every clip was constant");
  s.mean = mean_of(rs);
  double var = 0.0;
  for (double r : rs) var += (r - s.mean) * (r - s.mean);
  s.stddev = rs.size() > 1 ? std::sqrt(var / static_cast<double>(rs.size() - 1)) : 0.0;
  return s;
}

// Mean Pearson r between each clip and its defense reconstruction, per class,
// plus a verdict row (1 when the attacked mean exceeds the real mean).
inline EvalReport run_correlation_report(const afgan::GanBundle& defense, const std::vector<audio::LabeledClip>& reals,
                                         const std::vector<audio::LabeledClip>& attacked, const std::string& setting = "",
                                         const std::string& corpus = "synthetic", std::vector<std::string>* warnings = nullptr) {
  if (reals.empty() || attacked.empty()) throw invalid_input("correlation report needs real and attacked clips");
  const auto sr = correlation_stats(defense, reals, warnings);
  const auto sa = correlation_stats(defense, attacked, warnings);
  const std::string prefix = setting.empty() ? afgan::to_string(defense.id) + "/" : setting + "/";
  EvalReport r;
  r.kind = "correlation";
  r.add(prefix + "real", corpus, "pearson_mean", sr.mean, sr.n);
  r.add(prefix + "attacked", corpus, "pearson_mean", sa.mean, sa.n);
  r.add(prefix + "verdict", corpus, "attacked_gt_real", sa.mean > sr.mean ? 1.0 : 0.0, sr.n + sa.n);
  r.metadata[prefix + "real.stddev"] = format_value(sr.stddev);
  r.metadata[prefix + "attacked.stddev"] = format_value(sa.stddev);
  r.metadata[prefix + "gap"] = format_value(sa.mean - sr.mean);
  r.metadata[prefix + "skipped"] = std::to_string(sr.skipped + sa.skipped);
  r.sort_rows();
  check_report(r);
  return r;
}

inline void merge_into(EvalReport& dst, const EvalReport& src) {
  dst.rows.insert(dst.rows.end(), src.rows.begin(), src.rows.end());
  for (const auto& [k, v] : src.metadata) dst.metadata[k] = v;
  dst.sort_rows();
}

}  // namespace shield::eval
