#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "shield/audio/waveform.hpp"
#include "shield/common.hpp"
#include "shield/dsp/filters.hpp"
#include "shield/rng.hpp"

namespace shield::audio {

struct SynthConfig {
  int sample_rate_hz = kDefaultSampleRate;
  std::size_t clip_length = kDefaultClipLength;
};

namespace detail {

// Smooth random envelope: cosine interpolation between knots every 100 ms.
inline std::vector<double> smooth_envelope(Rng& rng, std::size_t length, int sample_rate_hz) {
  const std::size_t knot_spacing = static_cast<std::size_t>(sample_rate_hz / 10);
  const std::size_t knots = length / knot_spacing + 2;
  std::vector<double> values(knots);
  for (double& v : values) v = rng.uniform(0.2, 1.0);
  std::vector<double> env(length);
  for (std::size_t t = 0; t < length; ++t) {
    const std::size_t k = t / knot_spacing;
    const double frac = static_cast<double>(t % knot_spacing) / static_cast<double>(knot_spacing);
    const double mu = 0.5 - 0.5 * std::cos(std::numbers::pi * frac);
    env[t] = values[k] * (1.0 - mu) + values[k + 1] * mu;
  }
  return env;
}

inline Waveform render_real(std::uint64_t clip_seed, const SynthConfig& cfg) {
  Rng rng(clip_seed);
  const std::size_t T = cfg.clip_length;
  const double sr = cfg.sample_rate_hz;

  const double f0 = rng.uniform(100.0, 300.0);
  const auto harmonics = static_cast<int>(rng.uniform_int(3, 6));
  const double decay = rng.uniform(0.45, 0.8);
  const double vibrato_hz = rng.uniform(3.0, 7.0);
  const double vibrato_depth = rng.uniform(0.0, 0.02);

  std::vector<double> amp(static_cast<std::size_t>(harmonics));
  std::vector<double> phase(static_cast<std::size_t>(harmonics));
  for (int h = 0; h < harmonics; ++h) {
    amp[static_cast<std::size_t>(h)] = std::pow(decay, h);
    phase[static_cast<std::size_t>(h)] = rng.uniform(0.0, 2.0 * std::numbers::pi);
  }

  std::vector<double> tone(T, 0.0);
  double inst_phase = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    const double time = static_cast<double>(t) / sr;
    const double f = f0 * (1.0 + vibrato_depth * std::sin(2.0 * std::numbers::pi * vibrato_hz * time));
    inst_phase += 2.0 * std::numbers::pi * f / sr;
    double acc = 0.0;
    for (int h = 0; h < harmonics; ++h)
      acc += amp[static_cast<std::size_t>(h)] * std::sin((h + 1) * inst_phase + phase[static_cast<std::size_t>(h)]);
    tone[t] = acc;
  }

  std::vector<double> white(T);
  for (double& v : white) v = rng.normal();
  const auto band = dsp::design_bandpass(2000.0, std::min(7000.0, 0.45 * sr), sr);
  auto noise = dsp::fir_filter(white, band);

  auto rms = [](const std::vector<double>& v) {
    double acc = 0.0;
    for (double x : v) acc += x * x;
    return std::sqrt(acc / static_cast<double>(v.size()));
  };
  const double noise_gain = rng.uniform(0.1, 0.3) * rms(tone) / std::max(rms(noise), 1e-12);
  const auto env = smooth_envelope(rng, T, cfg.sample_rate_hz);

  Waveform w;
  w.sample_rate_hz = cfg.sample_rate_hz;
  w.samples.resize(T);
  for (std::size_t t = 0; t < T; ++t) w.samples[t] = env[t] * (tone[t] + noise_gain * noise[t]);
  return peak_normalize(std::move(w));
}

}  // namespace detail

// Nearest point of the signed 6-bit grid {k/32 : k = -32..31}.
inline double quantize_6bit(double x) {
  const double k = std::clamp(std::nearbyint(x * 32.0), -32.0, 31.0);
  return k / 32.0;
}

// The procedural deepfake artifact chain: 6-bit quantization, 3.4 kHz
// low-pass, then a random time jump at every 512-sample frame boundary.
inline Waveform apply_fake_artifacts(const Waveform& src, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> q(src.samples.size());
  for (std::size_t i = 0; i < q.size(); ++i) q[i] = quantize_6bit(src.samples[i]);

  const auto lp = dsp::design_lowpass(3400.0, src.sample_rate_hz);
  const auto filtered = dsp::fir_filter(q, lp);

  constexpr std::size_t kFrame = 512;
  const auto n = static_cast<std::ptrdiff_t>(filtered.size());
  Waveform out;
  out.sample_rate_hz = src.sample_rate_hz;
  out.samples.resize(filtered.size());
  std::ptrdiff_t shift = 0;
  for (std::ptrdiff_t t = 0; t < n; ++t) {
    if (t % static_cast<std::ptrdiff_t>(kFrame) == 0) {
      do {
        shift = rng.uniform_int(-8, 8);
      } while (shift == 0);
    }
    const std::ptrdiff_t s = std::clamp<std::ptrdiff_t>(t + shift, 0, n - 1);
    out.samples[static_cast<std::size_t>(t)] = filtered[static_cast<std::size_t>(s)];
  }
  return peak_normalize(std::move(out));
}

// Deterministic "real" clips. Clip i depends only on (seed, i), so a longer
// corpus extends a shorter one with the same seed.
inline std::vector<LabeledClip> synth_real(std::uint64_t seed, std::size_t n, const SynthConfig& cfg = {}) {
  require(n >= 1, "synth_real: n must be >= 1");
  std::vector<LabeledClip> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    LabeledClip c;
    c.id = "real/" + std::to_string(seed) + "/" + std::to_string(i);
    c.waveform = detail::render_real(derive_seed(seed, "synth-real", i), cfg);
    c.label = Label::real;
    c.source = "synthetic";
    out.push_back(std::move(c));
  }
  return out;
}

// Deterministic "fake" clips: independent real renders pushed through the
// artifact chain.
inline std::vector<LabeledClip> synth_fake(std::uint64_t seed, std::size_t n, const SynthConfig& cfg = {}) {
  require(n >= 1, "synth_fake: n must be >= 1");
  std::vector<LabeledClip> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto base = detail::render_real(derive_seed(seed, "synth-fake-base", i), cfg);
    LabeledClip c;
    c.id = "fake/" + std::to_string(seed) + "/" + std::to_string(i);
    c.waveform = apply_fake_artifacts(base, derive_seed(seed, "synth-fake-chain", i));
    c.label = Label::fake;
    c.source = "synthetic";
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace shield::audio
