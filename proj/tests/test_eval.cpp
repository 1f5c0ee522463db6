#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "shield/audio/synth.hpp"
#include "shield/eval/grids.hpp"
#include "shield/eval/parallel.hpp"
#include "test_util.hpp"

using namespace shield;
using namespace shield::eval;
using afgan::GenId;

namespace {

constexpr std::size_t kT = 256;

afgan::GanBundle tiny_gan(GenId id, unsigned seed) {
  auto g = afgan::default_generator_config(id, kT);
  g.widths = {2, 3};
  g.res_channels = 2;
  g.res_blocks = 2;
  afgan::DiscriminatorConfig d;
  d.length = kT;
  auto gan = afgan::build_gan_from(g, d, seed);
  gan.gen_params = shield::testing::random_vector(gan.gen_params.size(), seed, -0.3, 0.3);
  gan.trained = true;
  return gan;
}

defense::ShieldModel tiny_shield(unsigned seed) {
  defense::ShieldConfig c;
  c.clip_length = kT;
  c.widths = {2, 2, 2, 2};
  c.embed_dim = 4;
  auto m = defense::build_shield(c, seed);
  m.trained = true;
  return m;
}

detectors::DetectorModel tiny_detector(unsigned seed) {
  auto cfg = detectors::default_detector_config(detectors::DetectorArch::raw_cnn);
  cfg.input_length = kT;
  cfg.widths = {2, 2, 2};
  auto m = detectors::build_detector_from(cfg, seed);
  m.trained = true;
  return m;
}

std::vector<Corpus> tiny_corpora() {
  audio::SynthConfig cfg;
  cfg.clip_length = kT;
  std::vector<Corpus> out;
  for (std::uint64_t s : {1u, 2u}) {
    Corpus c{"corpus" + std::to_string(s), audio::synth_real(s, 5, cfg)};
    const auto f = audio::synth_fake(s + 10, 4, cfg);
    c.clips.insert(c.clips.end(), f.begin(), f.end());
    out.push_back(std::move(c));
  }
  return out;
}

// Every average row equals the plain mean of the member rows it names.
void expect_averages_consistent(const EvalReport& r, const std::string& avg, const std::vector<std::string>& members,
                                const std::string& corpus, const std::string& metric) {
  std::vector<double> v;
  std::size_t n = 0;
  for (const auto& m : members) {
    const auto* row = r.find(m, corpus, metric);
    ASSERT_NE(row, nullptr) << m;
    v.push_back(row->value);
    n += row->n;
  }
  const auto* a = r.find(avg, corpus, metric);
  ASSERT_NE(a, nullptr) << avg;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  EXPECT_NEAR(a->value, mean, 1e-9);
  EXPECT_EQ(a->n, n);
}

}  // namespace

TEST(Report, CsvSortAndChecks) {
  EvalReport r;
  r.add("b", "c", "acc_joint", 0.5, 4);
  r.add("a", "c", "acc_joint", 0.25, 8);
  r.add("a", "b", "gap", -3.0, 2);
  r.sort_rows();
  EXPECT_EQ(report_csv(r), "setting,corpus,metric,value,n\na,b,gap,-3,2\na,c,acc_joint,0.25,8\nb,c,acc_joint,0.5,4\n");
  EXPECT_EQ(r.value("b", "c", "acc_joint"), 0.5);
  EXPECT_THROW(r.value("z", "c", "acc_joint"), Error);
  EXPECT_NO_THROW(check_report(r));
  r.add("x", "c", "acc_joint", 1.5, 1);
  EXPECT_THROW(check_report(r), Error);
  EvalReport nan;
  nan.add("x", "c", "gap", std::nan(""), 1);
  EXPECT_THROW(check_report(nan), Error);
  EXPECT_EQ(format_value(0.1), "0.10000000000000001");
  EXPECT_NE(report_table(r).find("setting"), std::string::npos);
}

TEST(Report, ClassCounts) {
  ClassCounts c;
  c.add(true, true);
  c.add(true, false);
  c.add(false, false);
  c.add(false, false);
  c.add(false, true);
  EXPECT_DOUBLE_EQ(c.joint(), 3.0 / 5.0);
  EXPECT_DOUBLE_EQ(c.recall_real(), 0.5);
  EXPECT_DOUBLE_EQ(c.recall_other(), 2.0 / 3.0);
  EXPECT_THROW(ClassCounts{}.joint(), Error);
}

TEST(Splits, ProportionsDeterminismAndHeldOut) {
  std::size_t counts[3] = {0, 0, 0};
  for (int i = 0; i < 20000; ++i) ++counts[static_cast<int>(split_of("clip" + std::to_string(i), 5))];
  EXPECT_NEAR(counts[0] / 20000.0, 0.8, 0.01);
  EXPECT_NEAR(counts[1] / 20000.0, 0.1, 0.01);
  EXPECT_NEAR(counts[2] / 20000.0, 0.1, 0.01);
  EXPECT_EQ(split_of("abc", 5), split_of("abc", 5));

  const auto clips = audio::synth_real(3, 50, audio::SynthConfig{16000, 256});
  const auto s = split_clips(clips, 9);
  EXPECT_EQ(s.train.size() + s.val.size() + s.test.size(), 50u);
  EXPECT_EQ(s.held_out().size(), s.val.size() + s.test.size());
  std::set<std::string> ids;
  for (const auto* part : {&s.train, &s.val, &s.test})
    for (const auto& c : *part) EXPECT_TRUE(ids.insert(c.id).second);
}

TEST(Splits, GroupBySource) {
  std::vector<audio::LabeledClip> clips(3);
  clips[0].source = "b";
  clips[1].source = "a";
  clips[2].source = "";
  const auto g = group_by_source(clips);
  ASSERT_EQ(g.size(), 3u);
  EXPECT_EQ(g[0].name, "a");
  EXPECT_EQ(g[1].name, "b");
  EXPECT_EQ(g[2].name, "default");
}

TEST(Parallel, CoversEveryIndexAndRethrows) {
  for (int jobs : {1, 3}) {
    std::vector<int> hit(17, 0);
    parallel_for(hit.size(), jobs, [&](std::size_t i) { hit[i] += 1; });
    for (int h : hit) EXPECT_EQ(h, 1);
    EXPECT_THROW(parallel_for(5, jobs, [](std::size_t i) {
                   if (i == 3) throw invalid_input("boom");
                 }),
                 Error);
  }
}

TEST(Grids, BaselineRowsAndAverages) {
  const auto d1 = tiny_detector(1), d2 = tiny_detector(2);
  const auto corpora = tiny_corpora();
  const auto r = run_baseline_grid({{"d1", &d1}, {"d2", &d2}}, corpora);
  EXPECT_EQ(r.rows.size(), 2u * 2u * 3u + 2u * 3u);
  for (const auto& row : r.rows) EXPECT_GT(row.n, 0u);
  for (const auto& c : corpora)
    for (const auto* m : {"acc_joint", "recall_real", "recall_fake"}) expect_averages_consistent(r, "average", {"d1", "d2"}, c.name, m);
  EXPECT_EQ(r.find("d1", "corpus1", "acc_joint")->n, 9u);
  EXPECT_EQ(report_csv(r), report_csv(run_baseline_grid({{"d1", &d1}, {"d2", &d2}}, corpora, 2)));

  auto untrained = tiny_detector(3);
  untrained.trained = false;
  EXPECT_THROW(run_baseline_grid({{"u", &untrained}}, corpora), Error);
}

TEST(Grids, AttackRowsDeltasAndCounts) {
  const auto d1 = tiny_detector(1);
  const auto g1 = tiny_gan(GenId::G1, 1), g3 = tiny_gan(GenId::G3, 3);
  const auto corpora = tiny_corpora();
  const auto r = run_attack_grid({{"d1", &d1}}, {&g1, &g3}, corpora);
  for (const auto& c : corpora) {
    for (const auto* s : {"d1/G1", "d1/G3"}) {
      EXPECT_NEAR(r.value(s, c.name, "delta_joint"), r.value(s, c.name, "acc_baseline") - r.value(s, c.name, "acc_joint"), 1e-12);
      EXPECT_NEAR(r.value(s, c.name, "delta_attacked"), r.value(s, c.name, "acc_fake") - r.value(s, c.name, "acc_attacked"), 1e-12);
      EXPECT_EQ(r.find(s, c.name, "acc_attacked")->n, r.find(s, c.name, "acc_fake")->n);
      EXPECT_EQ(r.find(s, c.name, "acc_attacked")->n, 4u);
    }
    expect_averages_consistent(r, "average/G1", {"d1/G1"}, c.name, "acc_attacked");
  }
  for (const auto& row : r.rows) EXPECT_GT(row.n, 0u);
  auto raw = tiny_gan(GenId::G2, 2);
  raw.trained = false;
  EXPECT_THROW(run_attack_grid({{"d1", &d1}}, {&raw}, corpora), Error);
}

TEST(Grids, DefenseGridHasThreeMatchAndSixMismatchCells) {
  const auto g1 = tiny_gan(GenId::G1, 1), g2 = tiny_gan(GenId::G2, 2), g3 = tiny_gan(GenId::G3, 3);
  const auto s1 = tiny_shield(1), s2 = tiny_shield(2), s3 = tiny_shield(3);
  const std::map<GenId, const afgan::GanBundle*> gans{{GenId::G1, &g1}, {GenId::G2, &g2}, {GenId::G3, &g3}};
  const std::map<GenId, const defense::ShieldModel*> shields{{GenId::G1, &s1}, {GenId::G2, &s2}, {GenId::G3, &s3}};
  const auto corpora = tiny_corpora();

  EXPECT_EQ(defense_cells({GenId::G1, GenId::G2, GenId::G3}, DefenseSettings::match).size(), 3u);
  EXPECT_EQ(defense_cells({GenId::G1, GenId::G2, GenId::G3}, DefenseSettings::mismatch).size(), 6u);

  const auto r = run_defense_grid(shields, gans, corpora, DefenseSettings::both, 2);
  std::vector<std::string> match, mismatch;
  for (const auto& c : corpora) {
    std::set<std::string> m, mm;
    for (const auto& row : r.rows) {
      if (row.corpus != c.name || row.setting.rfind("average", 0) == 0) continue;
      (row.setting[1] == row.setting[5] ? m : mm).insert(row.setting);
    }
    EXPECT_EQ(m.size(), 3u);
    EXPECT_EQ(mm.size(), 6u);
    match.assign(m.begin(), m.end());
    mismatch.assign(mm.begin(), mm.end());
    for (const auto* metric : {"acc_joint", "recall_real", "recall_attacked"}) {
      expect_averages_consistent(r, "average/match", match, c.name, metric);
      expect_averages_consistent(r, "average/mismatch", mismatch, c.name, metric);
      expect_averages_consistent(r, "average/G1->*", {"G1->G2", "G1->G3"}, c.name, metric);
    }
    EXPECT_EQ(r.find("G1->G2", c.name, "acc_joint")->n, 9u);
  }
  for (const auto& row : r.rows) EXPECT_GT(row.n, 0u);
  EXPECT_EQ(report_csv(r), report_csv(run_defense_grid(shields, gans, corpora, DefenseSettings::both, 1)));

  const auto only_match = run_defense_grid(shields, gans, corpora, DefenseSettings::match);
  EXPECT_EQ(only_match.find("G1->G2", "corpus1", "acc_joint"), nullptr);
  EXPECT_NE(only_match.find("G2->G2", "corpus1", "acc_joint"), nullptr);
}

TEST(Grids, MissingCellIsNamed) {
  const auto g1 = tiny_gan(GenId::G1, 1), g2 = tiny_gan(GenId::G2, 2);
  const auto s1 = tiny_shield(1);
  try {
    run_defense_grid({{GenId::G1, &s1}}, {{GenId::G1, &g1}, {GenId::G2, &g2}}, tiny_corpora(), DefenseSettings::both);
    FAIL() << "expected a missing-cell error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::missing_dependency);
    EXPECT_NE(std::string(e.what()).find("->G2"), std::string::npos) << e.what();
  }
}

TEST(Grids, CorrelationReport) {
  const auto g = tiny_gan(GenId::G1, 1);
  const auto corpora = tiny_corpora();
  const auto reals = with_label(corpora[0].clips, audio::Label::real);
  auto attacked = attack_all(g, with_label(corpora[0].clips, audio::Label::fake));
  EXPECT_EQ(attacked.size(), 4u);
  audio::LabeledClip flat = attacked[0];
  flat.id = "flat";
  flat.waveform.samples.assign(kT, 0.25);
  attacked.push_back(flat);
  std::vector<std::string> warnings;
  const auto r = run_correlation_report(g, reals, attacked, "G1->G1", "corpus1", &warnings);
  ASSERT_EQ(r.rows.size(), 3u);
  const double real = r.value("G1->G1/real", "corpus1", "pearson_mean");
  const double att = r.value("G1->G1/attacked", "corpus1", "pearson_mean");
  EXPECT_GE(real, -1.0);
  EXPECT_LE(real, 1.0);
  EXPECT_GE(att, -1.0);
  EXPECT_LE(att, 1.0);
  EXPECT_EQ(r.find("G1->G1/attacked", "corpus1", "pearson_mean")->n, 4u);
  EXPECT_EQ(r.value("G1->G1/verdict", "corpus1", "attacked_gt_real"), att > real ? 1.0 : 0.0);
  ASSERT_EQ(warnings.size(), 1u);
  EXPECT_NE(warnings[0].find("flat"), std::string::npos);
  EXPECT_EQ(r.metadata.at("G1->G1/skipped"), "1");
  EXPECT_THROW(run_correlation_report(g, {}, attacked), Error);
}
