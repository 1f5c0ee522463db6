#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <vector>

#include "shield/audio/waveform.hpp"
#include "shield/common.hpp"
#include "shield/dsp/fft.hpp"

namespace shield::dsp {

struct MelConfig {
  int n_mels = 64;
  int win = 1024;  // FFT size == window length
  int hop = 256;
  int sample_rate_hz = 16000;
  double floor = 1e-10;

  bool operator==(const MelConfig&) const = default;
};

// Row-major (mel band, frame) log10 magnitudes.
struct Spectrogram {
  int n_mels = 0;
  int frames = 0;
  int hop = 0;
  int win = 0;
  std::vector<double> bins;

  double at(int mel, int frame) const { return bins[static_cast<std::size_t>(mel) * frames + frame]; }
};

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

inline int frame_count(std::size_t length, int win, int hop) {
  if (length < static_cast<std::size_t>(win)) return 0;
  return static_cast<int>((length - static_cast<std::size_t>(win)) / static_cast<std::size_t>(hop)) + 1;
}

// Center frequencies of the triangular filters, evenly spaced on the HTK mel
// scale between 0 Hz and Nyquist.
inline std::vector<double> mel_center_frequencies(const MelConfig& cfg) {
  const double top = hz_to_mel(cfg.sample_rate_hz / 2.0);
  std::vector<double> centers(static_cast<std::size_t>(cfg.n_mels));
  for (int m = 0; m < cfg.n_mels; ++m) centers[static_cast<std::size_t>(m)] = mel_to_hz(top * (m + 1) / (cfg.n_mels + 1));
  return centers;
}

// STFT magnitude -> triangular mel filterbank -> log10 with floor.
class MelFrontEnd {
 public:
  // Per-call intermediates needed by backward().
  struct Trace {
    std::vector<cplx> spectra;  // frames x (win/2 + 1)
    std::vector<double> mel;    // pre-log energies, n_mels x frames
  };

  explicit MelFrontEnd(MelConfig cfg = {}) : cfg_(cfg), plan_(static_cast<std::size_t>(cfg.win)) {
    require(cfg.n_mels >= 1 && cfg.hop >= 1 && cfg.sample_rate_hz > 0, "invalid mel configuration");
    const auto win = static_cast<std::size_t>(cfg.win);
    window_.resize(win);
    for (std::size_t n = 0; n < win; ++n)
      window_[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) / static_cast<double>(win));

    const int n_bins = cfg.win / 2 + 1;
    const double top = hz_to_mel(cfg.sample_rate_hz / 2.0);
    std::vector<double> edges(static_cast<std::size_t>(cfg.n_mels + 2));
    for (int i = 0; i < cfg.n_mels + 2; ++i) edges[static_cast<std::size_t>(i)] = mel_to_hz(top * i / (cfg.n_mels + 1));
    filters_.resize(static_cast<std::size_t>(cfg.n_mels));
    for (int m = 0; m < cfg.n_mels; ++m) {
      const double lo = edges[static_cast<std::size_t>(m)];
      const double mid = edges[static_cast<std::size_t>(m + 1)];
      const double hi = edges[static_cast<std::size_t>(m + 2)];
      auto& f = filters_[static_cast<std::size_t>(m)];
      for (int k = 0; k < n_bins; ++k) {
        const double hz = static_cast<double>(k) * cfg.sample_rate_hz / cfg.win;
        double w = 0.0;
        if (hz > lo && hz <= mid) w = (hz - lo) / (mid - lo);
        else if (hz > mid && hz < hi) w = (hi - hz) / (hi - mid);
        if (w > 0.0) {
          if (f.weights.empty()) f.first_bin = k;
          // Keep the run contiguous.
          f.weights.resize(static_cast<std::size_t>(k - f.first_bin + 1), 0.0);
          f.weights.back() = w;
        }
      }
    }
  }

  const MelConfig& config() const { return cfg_; }
  int frames_for(std::size_t length) const { return frame_count(length, cfg_.win, cfg_.hop); }

  Spectrogram compute(std::span<const double> x, Trace* trace = nullptr) const {
    if (x.size() < static_cast<std::size_t>(cfg_.win))
      throw invalid_input("log-mel: clip length " + std::to_string(x.size()) + " < window " + std::to_string(cfg_.win));
    const int frames = frames_for(x.size());
    const auto win = static_cast<std::size_t>(cfg_.win);
    const std::size_t n_bins = win / 2 + 1;
    Spectrogram s{cfg_.n_mels, frames, cfg_.hop, cfg_.win, std::vector<double>(static_cast<std::size_t>(cfg_.n_mels) * frames)};
    if (trace) {
      trace->spectra.assign(static_cast<std::size_t>(frames) * n_bins, cplx{});
      trace->mel.assign(s.bins.size(), 0.0);
    }
    std::vector<cplx> buf(win);
    std::vector<double> mag(n_bins);
    for (int f = 0; f < frames; ++f) {
      const std::size_t off = static_cast<std::size_t>(f) * static_cast<std::size_t>(cfg_.hop);
      for (std::size_t n = 0; n < win; ++n) buf[n] = cplx(x[off + n] * window_[n], 0.0);
      plan_.transform(buf);
      for (std::size_t k = 0; k < n_bins; ++k) mag[k] = std::abs(buf[k]);
      if (trace) std::copy(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(n_bins), trace->spectra.begin() + static_cast<std::ptrdiff_t>(f * n_bins));
      for (int m = 0; m < cfg_.n_mels; ++m) {
        const auto& filt = filters_[static_cast<std::size_t>(m)];
        double e = 0.0;
        for (std::size_t j = 0; j < filt.weights.size(); ++j) e += filt.weights[j] * mag[static_cast<std::size_t>(filt.first_bin) + j];
        const std::size_t idx = static_cast<std::size_t>(m) * frames + f;
        if (trace) trace->mel[idx] = e;
        s.bins[idx] = std::log10(std::max(e, cfg_.floor));
      }
    }
    return s;
  }

  // Adjoint of compute(): accumulates dL/dx into grad_x given dL/dbins.
  void backward(const Trace& trace, std::span<const double> grad_bins, std::span<double> grad_x) const {
    const auto win = static_cast<std::size_t>(cfg_.win);
    const std::size_t n_bins = win / 2 + 1;
    const int frames = static_cast<int>(trace.spectra.size() / n_bins);
    std::vector<double> g_mag(n_bins);
    std::vector<cplx> buf(win);
    const double inv_ln10 = 1.0 / std::numbers::ln10;
    for (int f = 0; f < frames; ++f) {
      std::fill(g_mag.begin(), g_mag.end(), 0.0);
      bool any = false;
      for (int m = 0; m < cfg_.n_mels; ++m) {
        const std::size_t idx = static_cast<std::size_t>(m) * frames + f;
        const double e = trace.mel[idx];
        if (e <= cfg_.floor || grad_bins[idx] == 0.0) continue;  // floored bins carry no gradient
        const double g = grad_bins[idx] * inv_ln10 / e;
        const auto& filt = filters_[static_cast<std::size_t>(m)];
        for (std::size_t j = 0; j < filt.weights.size(); ++j) g_mag[static_cast<std::size_t>(filt.first_bin) + j] += g * filt.weights[j];
        any = true;
      }
      if (!any) continue;
      std::fill(buf.begin(), buf.end(), cplx{});
      for (std::size_t k = 0; k < n_bins; ++k) {
        const cplx X = trace.spectra[static_cast<std::size_t>(f) * n_bins + k];
        const double a = std::abs(X);
        if (a > 0.0 && g_mag[k] != 0.0) buf[k] = X * (g_mag[k] / a);
      }
      plan_.transform(buf, /*inverse=*/true);
      const std::size_t off = static_cast<std::size_t>(f) * static_cast<std::size_t>(cfg_.hop);
      for (std::size_t n = 0; n < win; ++n) grad_x[off + n] += window_[n] * buf[n].real();
    }
  }

 private:
  struct Filter {
    int first_bin = 0;
    std::vector<double> weights;
  };

  MelConfig cfg_;
  FftPlan plan_;
  std::vector<double> window_;
  std::vector<Filter> filters_;
};

inline Spectrogram log_mel_spectrogram(const audio::Waveform& w, const MelConfig& cfg = {}) {
  MelConfig c = cfg;
  c.sample_rate_hz = w.sample_rate_hz;
  return MelFrontEnd(c).compute(w.samples);
}

}  // namespace shield::dsp
