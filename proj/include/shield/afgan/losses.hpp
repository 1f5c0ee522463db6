#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "shield/audio/waveform.hpp"
#include "shield/common.hpp"
#include "shield/nn/ops.hpp"

namespace shield::afgan {

// Floor applied to every probability before taking its log.
inline constexpr double kLogClamp = 1e-7;

enum class DiscriminatorLossForm { standard, as_printed };

inline std::string to_string(DiscriminatorLossForm f) { return f == DiscriminatorLossForm::standard ? "standard" : "as_printed"; }
inline std::optional<DiscriminatorLossForm> parse_d_loss_form(const std::string& s) {
  if (s == "standard") return DiscriminatorLossForm::standard;
  if (s == "as_printed") return DiscriminatorLossForm::as_printed;
  return std::nullopt;
}

inline double clamped_log(double p) { return std::log(std::clamp(p, kLogClamp, 1.0)); }

// Mean absolute sample difference.
inline double perceptual_loss(std::span<const double> orig, std::span<const double> attacked) {
  require(orig.size() == attacked.size(), "perceptual_loss: length mismatch");
  require(!orig.empty(), "perceptual_loss: empty input");
  double acc = 0.0;
  for (std::size_t i = 0; i < orig.size(); ++i) acc += std::abs(orig[i] - attacked[i]);
  return acc / static_cast<double>(orig.size());
}

inline double perceptual_loss(const audio::Waveform& orig, const audio::Waveform& attacked) {
  return perceptual_loss(orig.samples, attacked.samples);
}

// log(1 - D(attacked)); minimizing pushes the discriminator output to 1.
inline double adversarial_loss(double d_out) { return clamped_log(1.0 - d_out); }

// Mean over surrogates of -log p_i(real | attacked).
inline double surrogate_loss(std::span<const double> p_real) {
  if (p_real.empty()) throw invalid_input("surrogate_loss: no surrogates");
  double acc = 0.0;
  for (double p : p_real) acc -= clamped_log(p);
  return acc / static_cast<double>(p_real.size());
}

inline double discriminator_loss(double d_real, double d_attacked, DiscriminatorLossForm form = DiscriminatorLossForm::standard) {
  if (form == DiscriminatorLossForm::standard) return -clamped_log(d_real) - clamped_log(1.0 - d_attacked);
  return clamped_log(1.0 - d_real) + clamped_log(1.0 - d_attacked);
}

// Graph counterparts. Probabilities enter as scalar nodes.
namespace graph {

inline nn::Id adversarial_loss(nn::Graph& g, nn::Id d_out) {
  return nn::log_clamped(g, nn::affine(g, d_out, -1.0, 1.0), kLogClamp);
}

inline nn::Id surrogate_loss(nn::Graph& g, const std::vector<nn::Id>& p_real) {
  if (p_real.empty()) throw invalid_input("surrogate_loss: no surrogates");
  std::vector<nn::Id> logs;
  for (auto p : p_real) logs.push_back(nn::log_clamped(g, p, kLogClamp));
  return nn::weighted_sum(g, logs, std::vector<double>(logs.size(), -1.0 / static_cast<double>(logs.size())));
}

inline nn::Id discriminator_loss(nn::Graph& g, nn::Id d_real, nn::Id d_attacked, DiscriminatorLossForm form) {
  const auto log_one_minus = [&](nn::Id d) { return nn::log_clamped(g, nn::affine(g, d, -1.0, 1.0), kLogClamp); };
  if (form == DiscriminatorLossForm::standard)
    return nn::weighted_sum(g, {nn::log_clamped(g, d_real, kLogClamp), log_one_minus(d_attacked)}, {-1.0, -1.0});
  return nn::weighted_sum(g, {log_one_minus(d_real), log_one_minus(d_attacked)}, {1.0, 1.0});
}

}  // namespace graph

}  // namespace shield::afgan
