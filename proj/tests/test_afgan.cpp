#include <gtest/gtest.h>

#include <cmath>

#include "shield/afgan/train.hpp"
#include "shield/audio/synth.hpp"
#include "test_util.hpp"

using namespace shield;
using namespace shield::afgan;

namespace {

constexpr std::size_t kTiny = 64;

GanBundle tiny_gan(GenId id, std::uint64_t seed) {
  GeneratorConfig g = default_generator_config(id, kTiny);
  g.widths = {2, 3};
  g.kernel = 3;
  g.noise_channels = 1;
  g.res_channels = 2;
  g.res_blocks = 2;
  DiscriminatorConfig d;
  d.length = kTiny;
  d.widths = {2};
  d.kernels = {8};
  d.strides = {4};
  return build_gan_from(g, d, seed);
}

detectors::DetectorModel tiny_surrogate(std::uint64_t seed) {
  auto cfg = detectors::default_detector_config(detectors::DetectorArch::raw_cnn);
  cfg.input_length = kTiny;
  cfg.widths = {2, 2};
  auto m = detectors::build_detector_from(cfg, seed);
  m.trained = true;
  return m;
}

std::vector<audio::LabeledClip> clips(audio::Label label, std::size_t length, std::size_t n, std::uint64_t seed) {
  audio::SynthConfig cfg;
  cfg.clip_length = length;
  return label == audio::Label::real ? audio::synth_real(seed, n, cfg) : audio::synth_fake(seed, n, cfg);
}

}  // namespace

TEST(AfganLosses, Perceptual) {
  EXPECT_NEAR(perceptual_loss(std::vector<double>{1, 0, -1, 0}, std::vector<double>{0, 0, 0, 0}), 0.5, 1e-12);
  const auto a = shield::testing::random_vector(777, 1), b = shield::testing::random_vector(777, 2);
  EXPECT_EQ(perceptual_loss(a, a), 0.0);
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += std::fabs(a[i] - b[i]);
  EXPECT_NEAR(perceptual_loss(a, b), sum / 777.0, 1e-12);
  EXPECT_THROW(perceptual_loss(a, std::vector<double>(3, 0.0)), Error);
}

TEST(AfganLosses, Adversarial) {
  EXPECT_NEAR(adversarial_loss(0.5), -0.693147, 1e-6);
  EXPECT_NEAR(adversarial_loss(0.0), 0.0, 1e-12);
  EXPECT_NEAR(adversarial_loss(1.0), std::log(1e-7), 1e-12);
  EXPECT_NEAR(adversarial_loss(1.0), -16.118, 1e-3);
}

TEST(AfganLosses, Surrogate) {
  EXPECT_NEAR(surrogate_loss(std::vector<double>{1.0, 1.0}), 0.0, 1e-12);
  EXPECT_NEAR(surrogate_loss(std::vector<double>{0.5}), 0.693147, 1e-6);
  EXPECT_NEAR(surrogate_loss(std::vector<double>{0.5, 0.25}), 1.039721, 1e-6);
  EXPECT_THROW(surrogate_loss(std::vector<double>{}), Error);
}

TEST(AfganLosses, Discriminator) {
  EXPECT_NEAR(discriminator_loss(1.0, 0.0, DiscriminatorLossForm::standard), 0.0, 1e-12);
  EXPECT_NEAR(discriminator_loss(0.5, 0.5, DiscriminatorLossForm::standard), 1.386294, 1e-6);
  EXPECT_NEAR(discriminator_loss(0.5, 0.5, DiscriminatorLossForm::as_printed), -1.386294, 1e-6);
}

TEST(AfganLosses, GraphFormsMatchScalarForms) {
  for (double d : {0.0, 0.2, 0.5, 0.9, 1.0}) {
    nn::Graph g;
    EXPECT_DOUBLE_EQ(g.scalar(graph::adversarial_loss(g, g.constant({d}, {1}))), adversarial_loss(d));
    for (auto form : {DiscriminatorLossForm::standard, DiscriminatorLossForm::as_printed})
      EXPECT_DOUBLE_EQ(g.scalar(graph::discriminator_loss(g, g.constant({d}, {1}), g.constant({1 - d}, {1}), form)),
                       discriminator_loss(d, 1 - d, form));
  }
  nn::Graph g;
  EXPECT_NEAR(g.scalar(graph::surrogate_loss(g, {g.constant({0.5}, {1}), g.constant({0.25}, {1})})), 1.039721, 1e-6);
}

TEST(AfganModel, ShapePreservingNearIdentityAtInit) {
  const auto clip = audio::synth_fake(9, 1)[0].waveform;
  for (auto id : all_gen_ids()) {
    const auto gan = build_gan(id, 4);
    EXPECT_EQ(gan.gen_params, build_gan(id, 4).gen_params);
    EXPECT_EQ(gan.disc_params, build_gan(id, 4).disc_params);
    const auto out = apply_attack(gan, clip);
    ASSERT_EQ(out.size(), 16000u);
    for (double s : out.samples) ASSERT_LE(std::abs(s), 1.0);
    EXPECT_LT(perceptual_loss(clip, out), 0.5) << to_string(id);
    const double d = discriminate(gan, clip);
    EXPECT_GT(d, 0.0);
    EXPECT_LT(d, 1.0);
  }
}

TEST(AfganModel, ShapePreservingForOtherLengths) {
  for (std::size_t len : {std::size_t{8192}, std::size_t{4096}}) {
    audio::Waveform w;
    w.samples = shield::testing::random_vector(len, 3, -0.5, 0.5);
    for (auto id : all_gen_ids()) {
      auto gan = build_gan(id, 2, len);
      gan.gen_params = shield::testing::random_vector(gan.gen_params.size(), 4, -0.3, 0.3);
      EXPECT_EQ(apply_attack(gan, w).size(), len);
    }
  }
}

TEST(AfganModel, LengthMismatchIsAnError) {
  const auto gan = build_gan(GenId::G1, 1);
  audio::Waveform w;
  w.samples.assign(8000, 0.1);
  EXPECT_THROW(apply_attack(gan, w), Error);
}

TEST(AfganModel, AttackIsAPureFunction) {
  for (auto id : all_gen_ids()) {
    auto gan = build_gan(id, 6);
    gan.gen_params = shield::testing::random_vector(gan.gen_params.size(), 5, -0.2, 0.2);
    const auto clip = audio::synth_fake(2, 1)[0].waveform;
    EXPECT_EQ(apply_attack(gan, clip).samples, apply_attack(gan, clip).samples) << to_string(id);
  }
}

TEST(AfganModel, GeneratorLossGradient) {
  const auto surrogates = std::vector<detectors::DetectorModel>{tiny_surrogate(1), tiny_surrogate(2)};
  const std::vector<const detectors::DetectorModel*> surr{&surrogates[0], &surrogates[1]};
  audio::Waveform fake;
  fake.samples = shield::testing::random_vector(kTiny, 11, -0.8, 0.8);
  for (auto id : all_gen_ids()) {
    auto gan = tiny_gan(id, 3);
    ASSERT_LE(gan.gen_params.size(), 1000u) << to_string(id);
    // Random parameters so the zero-initialized head passes gradient through.
    gan.gen_params = shield::testing::random_vector(gan.gen_params.size(), 12, -0.5, 0.5);
    const auto loss = [&](const std::vector<double>& p, std::vector<double>* grad) {
      nn::Graph g;
      std::vector<double> sink(p.size(), 0.0);
      nn::Binding gen(g, p, sink);
      const auto terms = generator_loss_graph(gan, gen, gan.disc_params, surr, g.constant(fake.samples, {1, static_cast<int>(kTiny)}));
      g.backward(terms.g);
      if (grad) *grad = sink;
      return g.scalar(terms.g);
    };
    std::vector<double> analytic;
    loss(gan.gen_params, &analytic);
    const auto r = shield::testing::check_gradient([&](const std::vector<double>& p) { return loss(p, nullptr); }, gan.gen_params, analytic);
    EXPECT_LT(r.max_rel, 1e-4) << to_string(id) << " worst index " << r.worst;
  }
}

TEST(AfganTraining, LossIdentityFreezeAndDeterminism) {
  const auto reals = clips(audio::Label::real, kTiny, 6, 1);
  const auto fakes = clips(audio::Label::fake, kTiny, 6, 2);
  const std::vector<detectors::DetectorModel> surrogates{tiny_surrogate(1), tiny_surrogate(2)};
  const auto before = surrogates;
  TrainConfig cfg{3, 4, 1e-3, 9};
  for (auto id : all_gen_ids()) {
    const auto a = train_attack(tiny_gan(id, 2), reals, fakes, surrogates, cfg);
    const auto b = train_attack(tiny_gan(id, 2), reals, fakes, surrogates, cfg);
    ASSERT_EQ(a.steps.size(), 6u);
    ASSERT_EQ(a.epochs.size(), 3u);
    for (const auto& s : a.steps) EXPECT_EQ(s.g_loss, s.p_loss + s.a_loss + s.s_loss);
    for (const auto& s : a.epochs) EXPECT_EQ(s.g_loss, s.p_loss + s.a_loss + s.s_loss);
    EXPECT_EQ(a.gan.gen_params, b.gan.gen_params);
    EXPECT_EQ(a.gan.disc_params, b.gan.disc_params);
    EXPECT_EQ(loss_history_csv(a.steps), loss_history_csv(b.steps));
    EXPECT_TRUE(a.gan.trained);
    EXPECT_NE(a.gan.gen_params, tiny_gan(id, 2).gen_params);
  }
  for (std::size_t i = 0; i < surrogates.size(); ++i) EXPECT_EQ(surrogates[i].params, before[i].params);
}

TEST(AfganTraining, WeightedLossUsesWeights) {
  const auto reals = clips(audio::Label::real, kTiny, 4, 1);
  const auto fakes = clips(audio::Label::fake, kTiny, 4, 2);
  AttackOptions opts;
  opts.weights = {2.0, 0.5, 3.0};
  opts.d_loss_form = DiscriminatorLossForm::as_printed;
  const auto r = train_attack(tiny_gan(GenId::G1, 2), reals, fakes, {tiny_surrogate(1)}, TrainConfig{1, 2, 1e-3, 1}, opts);
  for (const auto& s : r.steps) EXPECT_EQ(s.g_loss, 2.0 * s.p_loss + 0.5 * s.a_loss + 3.0 * s.s_loss);
}

TEST(AfganTraining, InputErrors) {
  const auto reals = clips(audio::Label::real, kTiny, 2, 1);
  const auto fakes = clips(audio::Label::fake, kTiny, 2, 2);
  const TrainConfig cfg{1, 2, 1e-3, 1};
  EXPECT_THROW(train_attack(tiny_gan(GenId::G1, 1), {}, fakes, {tiny_surrogate(1)}, cfg), Error);
  EXPECT_THROW(train_attack(tiny_gan(GenId::G1, 1), reals, {}, {tiny_surrogate(1)}, cfg), Error);
  EXPECT_THROW(train_attack(tiny_gan(GenId::G1, 1), reals, fakes, {}, cfg), Error);
  auto untrained = tiny_surrogate(1);
  untrained.trained = false;
  EXPECT_THROW(train_attack(tiny_gan(GenId::G1, 1), reals, fakes, {untrained}, cfg), Error);
  EXPECT_THROW(train_attack(tiny_gan(GenId::G1, 1), clips(audio::Label::real, 128, 2, 1), fakes, {tiny_surrogate(1)}, cfg), Error);
}

TEST(AfganModel, ParsesIds) {
  EXPECT_EQ(parse_gen_id("G2"), GenId::G2);
  EXPECT_FALSE(parse_gen_id("G4").has_value());
  EXPECT_EQ(parse_d_loss_form("as_printed"), DiscriminatorLossForm::as_printed);
  EXPECT_FALSE(parse_d_loss_form("x").has_value());
}
