#pragma once

#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "shield/afgan/gan.hpp"
#include "shield/afgan/losses.hpp"
#include "shield/audio/waveform.hpp"
#include "shield/detectors/detector.hpp"
#include "shield/nn/adam.hpp"
#include "shield/train_config.hpp"

namespace shield::afgan {

struct AttackLossReport {
  int epoch = 0;
  int step = 0;
  double p_loss = 0.0;
  double a_loss = 0.0;
  double s_loss = 0.0;
  double g_loss = 0.0;
  double d_loss = 0.0;
};

struct LossWeights {
  double perceptual = 1.0;
  double adversarial = 1.0;
  double surrogate = 1.0;
};

struct AttackOptions {
  LossWeights weights;
  DiscriminatorLossForm d_loss_form = DiscriminatorLossForm::standard;
};

struct AttackTrainResult {
  GanBundle gan;
  std::vector<AttackLossReport> steps;   // one row per mini-batch
  std::vector<AttackLossReport> epochs;  // per-epoch means (step = -1)
};

struct GeneratorLossTerms {
  nn::Id p, a, s, g;
};

// Builds g_loss = wp * P + wa * A + ws * S for one fake clip. The
// discriminator and surrogates are bound frozen, so gradients reach only the
// generator (when `gen` is trainable) and the input node.
inline GeneratorLossTerms generator_loss_graph(const GanBundle& gan, nn::Binding& gen, const std::vector<double>& disc_params,
                                               const std::vector<const detectors::DetectorModel*>& surrogates, nn::Id fake,
                                               const LossWeights& w = {}) {
  auto& g = gen.graph();
  const nn::Id attacked = generator_forward(gan, gen, fake);
  const nn::Id p = nn::mean_abs_diff(g, fake, attacked);
  nn::Binding disc(g, disc_params);
  const nn::Id a = graph::adversarial_loss(g, discriminator_forward(gan, disc, attacked));
  std::vector<nn::Id> p_real;
  for (const auto* s : surrogates) {
    nn::Binding sb(g, s->params);
    p_real.push_back(nn::pick(g, nn::softmax(g, detectors::detector_logits(*s, sb, attacked)), 1));
  }
  const nn::Id s = graph::surrogate_loss(g, p_real);
  const nn::Id total = nn::weighted_sum(g, {p, a, s}, {w.perceptual, w.adversarial, w.surrogate});
  return {p, a, s, total};
}

// Alternating min-max training: per mini-batch one discriminator step on
// (real, attacked) pairs, then one generator step on the combined loss.
// Surrogates are read-only throughout.
inline AttackTrainResult train_attack(GanBundle gan, const std::vector<audio::LabeledClip>& reals,
                                      const std::vector<audio::LabeledClip>& fakes,
                                      const std::vector<detectors::DetectorModel>& surrogates, const TrainConfig& cfg,
                                      const AttackOptions& opts = {},
                                      const std::function<void(const AttackLossReport&)>& on_epoch = {}) {
  cfg.validate();
  if (reals.empty() || fakes.empty()) throw invalid_input("train_attack: reals and fakes must be nonempty");
  if (surrogates.empty()) throw invalid_input("train_attack: at least one surrogate is required");
  for (const auto& s : surrogates)
    if (!s.trained) throw invalid_input("train_attack: surrogates must be trained before attack training");
  for (const auto& c : reals) audio::validate_waveform(c.waveform, gan.length());
  for (const auto& c : fakes) audio::validate_waveform(c.waveform, gan.length());

  std::vector<const detectors::DetectorModel*> surr;
  for (const auto& s : surrogates) surr.push_back(&s);

  AttackTrainResult result;
  nn::Adam gen_opt(gan.gen_params.size(), cfg.adam());
  nn::Adam disc_opt(gan.disc_params.size(), cfg.adam());
  std::vector<double> gen_grad(gan.gen_params.size()), disc_grad(gan.disc_params.size());
  const int T = static_cast<int>(gan.length());
  const auto bs = static_cast<std::size_t>(cfg.batch_size);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto fake_order = detectors::shuffled_indices(fakes.size(), derive_seed(cfg.seed, "attack-fakes", static_cast<std::uint64_t>(epoch)));
    const auto real_order = detectors::shuffled_indices(reals.size(), derive_seed(cfg.seed, "attack-reals", static_cast<std::uint64_t>(epoch)));
    AttackLossReport epoch_sum{epoch, -1};
    int step = 0;
    for (std::size_t start = 0; start < fake_order.size(); start += bs, ++step) {
      const std::size_t end = std::min(fake_order.size(), start + bs);
      const double inv = 1.0 / static_cast<double>(end - start);

      // Discriminator step with the generator frozen.
      std::fill(disc_grad.begin(), disc_grad.end(), 0.0);
      double d_sum = 0.0;
      for (std::size_t i = start; i < end; ++i) {
        const auto& fake = fakes[fake_order[i]].waveform;
        const auto& real = reals[real_order[i % real_order.size()]].waveform;
        const auto attacked = run_generator(gan, fake);
        nn::Graph g;
        nn::Binding disc(g, gan.disc_params, disc_grad);
        const nn::Id d_real = discriminator_forward(gan, disc, g.constant(real.samples, {1, T}));
        const nn::Id d_att = discriminator_forward(gan, disc, g.constant(attacked.samples, {1, T}));
        const nn::Id loss = graph::discriminator_loss(g, d_real, d_att, opts.d_loss_form);
        g.backward(loss);
        d_sum += g.scalar(loss);
      }
      for (double& v : disc_grad) v *= inv;
      disc_opt.step(gan.disc_params, disc_grad);

      // Generator step against the updated discriminator.
      std::fill(gen_grad.begin(), gen_grad.end(), 0.0);
      double p_sum = 0.0, a_sum = 0.0, s_sum = 0.0;
      for (std::size_t i = start; i < end; ++i) {
        const auto& fake = fakes[fake_order[i]].waveform;
        nn::Graph g;
        nn::Binding gen(g, gan.gen_params, gen_grad);
        const auto terms = generator_loss_graph(gan, gen, gan.disc_params, surr, g.constant(fake.samples, {1, T}), opts.weights);
        g.backward(terms.g);
        p_sum += g.scalar(terms.p);
        a_sum += g.scalar(terms.a);
        s_sum += g.scalar(terms.s);
      }
      for (double& v : gen_grad) v *= inv;
      gen_opt.step(gan.gen_params, gen_grad);

      AttackLossReport r{epoch, step, p_sum * inv, a_sum * inv, s_sum * inv, 0.0, d_sum * inv};
      r.g_loss = opts.weights.perceptual * r.p_loss + opts.weights.adversarial * r.a_loss + opts.weights.surrogate * r.s_loss;
      result.steps.push_back(r);
      epoch_sum.p_loss += r.p_loss;
      epoch_sum.a_loss += r.a_loss;
      epoch_sum.s_loss += r.s_loss;
      epoch_sum.d_loss += r.d_loss;
    }
    const double n = step > 0 ? static_cast<double>(step) : 1.0;
    epoch_sum.p_loss /= n;
    epoch_sum.a_loss /= n;
    epoch_sum.s_loss /= n;
    epoch_sum.d_loss /= n;
    epoch_sum.g_loss = opts.weights.perceptual * epoch_sum.p_loss + opts.weights.adversarial * epoch_sum.a_loss +
                       opts.weights.surrogate * epoch_sum.s_loss;
    result.epochs.push_back(epoch_sum);
    if (on_epoch) on_epoch(epoch_sum);
  }
  if (cfg.epochs > 0) gan.trained = true;
  result.gan = std::move(gan);
  return result;
}

inline std::string loss_history_csv(const std::vector<AttackLossReport>& rows) {
  std::ostringstream os;
  os.precision(17);
  os << "epoch,step,p_loss,a_loss,s_loss,g_loss,d_loss\n";
  for (const auto& r : rows)
    os << r.epoch << ',' << r.step << ',' << r.p_loss << ',' << r.a_loss << ',' << r.s_loss << ',' << r.g_loss << ',' << r.d_loss << '\n';
  return os.str();
}

}  // namespace shield::afgan
