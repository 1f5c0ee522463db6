#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "shield/common.hpp"

namespace shield::audio {

inline constexpr int kDefaultSampleRate = 16000;
inline constexpr std::size_t kDefaultClipLength = 16000;

// Fixed-length mono clip. Samples are kept in double precision so that the
// gradient machinery downstream can run entirely in 64-bit arithmetic.
struct Waveform {
  std::vector<double> samples;
  int sample_rate_hz = kDefaultSampleRate;

  std::size_t size() const { return samples.size(); }
  bool operator==(const Waveform&) const = default;
};

enum class Label { real, fake, attacked };

inline std::string_view to_string(Label l) {
  switch (l) {
    case Label::real: return "real";
    case Label::fake: return "fake";
    case Label::attacked: return "attacked";
  }
  return "?";
}

inline std::optional<Label> parse_label(std::string_view s) {
  if (s == "real") return Label::real;
  if (s == "fake") return Label::fake;
  if (s == "attacked") return Label::attacked;
  return std::nullopt;
}

// Class index convention shared by every classifier: 1 = real, 0 = fake/attacked.
inline int class_index(Label l) { return l == Label::real ? 1 : 0; }

struct LabeledClip {
  std::string id;  // stable identity, used for split assignment and exports
  Waveform waveform;
  Label label = Label::real;
  std::string source;  // corpus name or generator id
};

// Returns a description of the first violated invariant, or nullopt.
inline std::optional<std::string> check_waveform(const Waveform& w, std::size_t expected_length = 0) {
  if (w.sample_rate_hz <= 0) return "non-positive sample rate";
  if (w.samples.empty()) return "empty waveform";
  if (expected_length != 0 && w.samples.size() != expected_length)
    return "length " + std::to_string(w.samples.size()) + " != " + std::to_string(expected_length);
  for (std::size_t i = 0; i < w.samples.size(); ++i) {
    const double s = w.samples[i];
    if (!std::isfinite(s)) return "non-finite sample at " + std::to_string(i);
    if (std::abs(s) > 1.0) return "sample out of [-1,1] at " + std::to_string(i);
  }
  return std::nullopt;
}

inline void validate_waveform(const Waveform& w, std::size_t expected_length = 0) {
  if (auto err = check_waveform(w, expected_length)) throw invalid_input("invalid waveform: " + *err);
}

inline std::optional<std::string> check_clip(const LabeledClip& c, std::size_t expected_length = 0) {
  if (auto err = check_waveform(c.waveform, expected_length)) return err;
  if (c.label == Label::attacked && c.source.empty()) return "attacked clip without generator id";
  return std::nullopt;
}

inline double peak_abs(const Waveform& w) {
  double peak = 0.0;
  for (double s : w.samples) peak = std::max(peak, std::abs(s));
  return peak;
}

// Scales so that max |sample| == 1. Silence passes through unchanged.
inline Waveform peak_normalize(Waveform w) {
  const double peak = peak_abs(w);
  if (peak == 0.0) return w;
  const double gain = 1.0 / peak;
  for (double& s : w.samples) s *= gain;
  // Guard against 1 ulp overshoot after scaling.
  for (double& s : w.samples) s = std::clamp(s, -1.0, 1.0);
  return w;
}

// Truncates or zero-pads to exactly `length` samples.
inline Waveform fit_length(Waveform w, std::size_t length) {
  w.samples.resize(length, 0.0);
  return w;
}

}  // namespace shield::audio
