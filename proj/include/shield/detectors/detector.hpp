#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "shield/audio/waveform.hpp"
#include "shield/common.hpp"
#include "shield/dsp/mel.hpp"
#include "shield/nn/adam.hpp"
#include "shield/nn/ops.hpp"
#include "shield/nn/params.hpp"
#include "shield/rng.hpp"
#include "shield/train_config.hpp"

namespace shield::detectors {

enum class DetectorArch { raw_cnn, spec_cnn };

inline std::string to_string(DetectorArch a) { return a == DetectorArch::raw_cnn ? "raw_cnn" : "spec_cnn"; }
inline std::optional<DetectorArch> parse_arch(const std::string& s) {
  if (s == "raw_cnn") return DetectorArch::raw_cnn;
  if (s == "spec_cnn") return DetectorArch::spec_cnn;
  return std::nullopt;
}

inline constexpr std::size_t kMaxDetectorParams = 100'000;

struct DetectorConfig {
  DetectorArch arch = DetectorArch::raw_cnn;
  std::size_t input_length = audio::kDefaultClipLength;
  std::vector<int> widths = {8, 16, 16, 16};  // one conv block per entry
  int first_kernel = 16;                      // raw_cnn front-end
  int first_stride = 8;
  int kernel = 5;  // later 1-D blocks; 2-D blocks use kernel x kernel with kernel = 3
  dsp::MelConfig mel;

  bool operator==(const DetectorConfig&) const = default;
};

inline DetectorConfig default_detector_config(DetectorArch arch) {
  DetectorConfig c;
  c.arch = arch;
  if (arch == DetectorArch::spec_cnn) {
    c.widths = {4, 8, 8, 16};
    c.kernel = 3;
  }
  return c;
}

// Parameter layout for either architecture: blocks of conv -> norm -> ReLU ->
// 2x average pool, global average pool, then a 2-way linear classifier.
struct DetectorNet {
  nn::Layout layout;
  std::vector<nn::ConvSlots> convs;
  std::vector<nn::NormSlots> norms;
  nn::LinearSlots head;
  std::shared_ptr<const dsp::MelFrontEnd> mel;  // spec_cnn only
};

inline std::shared_ptr<const DetectorNet> make_detector_net(const DetectorConfig& cfg) {
  require(!cfg.widths.empty(), "detector needs at least one block");
  auto net = std::make_shared<DetectorNet>();
  int in_ch = 1;
  for (std::size_t i = 0; i < cfg.widths.size(); ++i) {
    const int out_ch = cfg.widths[i];
    if (cfg.arch == DetectorArch::raw_cnn) {
      if (i == 0)
        net->convs.push_back(nn::add_conv1d(net->layout, in_ch, out_ch, cfg.first_kernel, cfg.first_stride,
                                            (cfg.first_kernel - cfg.first_stride) / 2));
      else
        net->convs.push_back(nn::add_conv1d(net->layout, in_ch, out_ch, cfg.kernel, 1, cfg.kernel / 2));
    } else {
      net->convs.push_back(nn::add_conv2d(net->layout, in_ch, out_ch, cfg.kernel));
    }
    net->norms.push_back(nn::add_norm(net->layout, out_ch));
    in_ch = out_ch;
  }
  net->head = nn::add_linear(net->layout, in_ch, 2);
  if (cfg.arch == DetectorArch::spec_cnn) net->mel = std::make_shared<dsp::MelFrontEnd>(cfg.mel);
  if (net->layout.total() > kMaxDetectorParams)
    throw invalid_input("detector has " + std::to_string(net->layout.total()) + " parameters (limit 100k)");
  return net;
}

struct DetectorModel {
  DetectorConfig config;
  std::uint64_t seed = 0;
  std::vector<double> params;
  bool trained = false;
  std::shared_ptr<const DetectorNet> net;

  std::size_t parameter_count() const { return params.size(); }
};

inline DetectorModel build_detector_from(const DetectorConfig& cfg, std::uint64_t seed) {
  DetectorModel m;
  m.config = cfg;
  m.seed = seed;
  m.net = make_detector_net(cfg);
  m.params = m.net->layout.initialize(derive_seed(seed, "detector-init", static_cast<std::uint64_t>(cfg.arch)));
  return m;
}

inline DetectorModel build_detector(DetectorArch arch, std::uint64_t seed) {
  return build_detector_from(default_detector_config(arch), seed);
}

// Logits from the network trunk. `input` is (1, T) for raw_cnn and
// (1, n_mels, frames) for spec_cnn.
inline nn::Id detector_trunk(const DetectorModel& m, nn::Binding& bind, nn::Id input) {
  auto& g = bind.graph();
  const auto& net = *m.net;
  nn::Id h = input;
  for (std::size_t i = 0; i < net.convs.size(); ++i) {
    const auto& c = net.convs[i];
    if (m.config.arch == DetectorArch::raw_cnn)
      h = nn::conv1d(g, h, bind(c.weight), bind(c.bias), c.stride, c.pad, c.dilation);
    else
      h = nn::conv2d(g, h, bind(c.weight), bind(c.bias));
    h = nn::layer_norm(g, h, bind(net.norms[i].gamma), bind(net.norms[i].beta));
    h = nn::relu(g, h);
    h = m.config.arch == DetectorArch::raw_cnn ? nn::avg_pool1d(g, h, 2) : nn::avg_pool2d(g, h, 2);
  }
  h = nn::global_avg_pool(g, h);
  return nn::linear(g, h, bind(net.head.weight), bind(net.head.bias));
}

// Logits from a waveform node of shape (1, T); differentiable w.r.t. the
// waveform for both architectures.
inline nn::Id detector_logits(const DetectorModel& m, nn::Binding& bind, nn::Id waveform) {
  auto& g = bind.graph();
  if (g.value(waveform).size() != m.config.input_length)
    throw invalid_input("detector expects " + std::to_string(m.config.input_length) + " samples, got " +
                        std::to_string(g.value(waveform).size()));
  if (m.config.arch == DetectorArch::spec_cnn) return detector_trunk(m, bind, nn::log_mel(g, waveform, m.net->mel));
  return detector_trunk(m, bind, waveform);
}

// The tensor a detector consumes, computed once per clip. Training on cached
// features avoids recomputing spectrograms every epoch.
struct DetectorInput {
  std::vector<double> values;
  nn::Shape shape;
};

inline DetectorInput prepare_input(const DetectorModel& m, const audio::Waveform& w) {
  if (w.size() != m.config.input_length)
    throw invalid_input("detector expects " + std::to_string(m.config.input_length) + " samples, got " + std::to_string(w.size()));
  if (m.config.arch == DetectorArch::raw_cnn) return {w.samples, {1, static_cast<int>(w.size())}};
  auto s = m.net->mel->compute(w.samples);
  return {std::move(s.bins), {1, s.n_mels, s.frames}};
}

// {p(fake/attacked), p(real)}
inline std::array<double, 2> predict_proba(const DetectorModel& m, const DetectorInput& in) {
  nn::Graph g;
  nn::Binding bind(g, m.params);
  const auto logits = detector_trunk(m, bind, g.constant(in.values, in.shape));
  const auto& p = g.value(nn::softmax(g, logits));
  return {p[0], p[1]};
}

inline std::array<double, 2> predict_proba(const DetectorModel& m, const audio::Waveform& w) {
  audio::validate_waveform(w);
  return predict_proba(m, prepare_input(m, w));
}

// Probability that the clip is real; the decision threshold is 0.5.
inline double detect(const DetectorModel& m, const audio::Waveform& w) { return predict_proba(m, w)[1]; }

inline bool predicts_real(double p_real) { return p_real > 0.5; }

inline double accuracy(const DetectorModel& m, const std::vector<audio::LabeledClip>& data) {
  require(!data.empty(), "accuracy: empty data");
  std::size_t correct = 0;
  for (const auto& c : data) {
    const bool said_real = predicts_real(detect(m, c.waveform));
    correct += said_real == (c.label == audio::Label::real) ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

// Per-sample cross-entropy and its gradient, accumulated into `grads`.
inline double accumulate_detector_gradient(const DetectorModel& m, const DetectorInput& in, int target,
                                           std::span<double> grads) {
  nn::Graph g;
  nn::Binding bind(g, m.params, grads);
  const auto loss = nn::softmax_cross_entropy(g, detector_trunk(m, bind, g.constant(in.values, in.shape)), target);
  g.backward(loss);
  return g.scalar(loss);
}

// Deterministic Fisher-Yates permutation of [0, n).
inline std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i - 1)))]);
  return idx;
}

struct DetectorTrainLog {
  std::vector<double> epoch_loss;  // mean cross-entropy per epoch
};

// Mini-batch Adam on cross-entropy; real -> class 1, fake/attacked -> class 0.
inline DetectorModel train_detector(DetectorModel model, const std::vector<audio::LabeledClip>& data, const TrainConfig& cfg,
                                    DetectorTrainLog* log = nullptr,
                                    const std::function<void(int, double)>& on_epoch = {}) {
  cfg.validate();
  bool has_real = false, has_fake = false;
  for (const auto& c : data) (c.label == audio::Label::real ? has_real : has_fake) = true;
  if (!has_real || !has_fake) throw invalid_input("train_detector: data must contain both real and fake/attacked clips");
  if (cfg.epochs == 0) return model;

  std::vector<DetectorInput> inputs;
  inputs.reserve(data.size());
  for (const auto& c : data) {
    audio::validate_waveform(c.waveform, model.config.input_length);
    inputs.push_back(prepare_input(model, c.waveform));
  }

  nn::Adam opt(model.params.size(), cfg.adam());
  std::vector<double> grads(model.params.size());
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto order = shuffled_indices(data.size(), derive_seed(cfg.seed, "detector-epoch", static_cast<std::uint64_t>(epoch)));
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      std::fill(grads.begin(), grads.end(), 0.0);
      for (std::size_t i = start; i < end; ++i) {
        const auto& clip = data[order[i]];
        epoch_loss += accumulate_detector_gradient(model, inputs[order[i]], audio::class_index(clip.label), grads);
      }
      const double inv = 1.0 / static_cast<double>(end - start);
      for (double& v : grads) v *= inv;
      opt.step(model.params, grads);
    }
    epoch_loss /= static_cast<double>(data.size());
    if (log) log->epoch_loss.push_back(epoch_loss);
    if (on_epoch) on_epoch(epoch, epoch_loss);
  }
  model.trained = true;
  return model;
}

}  // namespace shield::detectors
