#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "shield/common.hpp"

namespace shield::dsp {

inline double sinc(double x) {
  if (x == 0.0) return 1.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

// Hamming-windowed sinc low-pass, unity DC gain. `taps` must be odd.
inline std::vector<double> design_lowpass(double cutoff_hz, double sample_rate_hz, int taps = 101) {
  require(taps % 2 == 1 && taps >= 3, "low-pass tap count must be odd and >= 3");
  require(cutoff_hz > 0 && cutoff_hz < sample_rate_hz / 2, "cutoff must lie in (0, nyquist)");
  const double fc = cutoff_hz / sample_rate_hz;
  const int mid = taps / 2;
  std::vector<double> h(static_cast<std::size_t>(taps));
  double sum = 0.0;
  for (int n = 0; n < taps; ++n) {
    const double w = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * n / (taps - 1));
    h[static_cast<std::size_t>(n)] = 2.0 * fc * sinc(2.0 * fc * (n - mid)) * w;
    sum += h[static_cast<std::size_t>(n)];
  }
  for (double& v : h) v /= sum;
  return h;
}

// Band-pass as the difference of two low-passes.
inline std::vector<double> design_bandpass(double lo_hz, double hi_hz, double sample_rate_hz, int taps = 101) {
  require(lo_hz < hi_hz, "band-pass edges out of order");
  auto hi = design_lowpass(hi_hz, sample_rate_hz, taps);
  const auto lo = design_lowpass(lo_hz, sample_rate_hz, taps);
  for (std::size_t i = 0; i < hi.size(); ++i) hi[i] -= lo[i];
  return hi;
}

// Zero-phase ("same") FIR filtering with zero extension at the edges.
inline std::vector<double> fir_filter(std::span<const double> x, std::span<const double> h) {
  const auto n = static_cast<std::ptrdiff_t>(x.size());
  const auto k = static_cast<std::ptrdiff_t>(h.size());
  const std::ptrdiff_t mid = k / 2;
  std::vector<double> y(x.size(), 0.0);
  for (std::ptrdiff_t t = 0; t < n; ++t) {
    double acc = 0.0;
    for (std::ptrdiff_t j = 0; j < k; ++j) {
      const std::ptrdiff_t src = t + mid - j;
      if (src >= 0 && src < n) acc += h[static_cast<std::size_t>(j)] * x[static_cast<std::size_t>(src)];
    }
    y[static_cast<std::size_t>(t)] = acc;
  }
  return y;
}

}  // namespace shield::dsp
