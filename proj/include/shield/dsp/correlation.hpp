#pragma once

#include <algorithm>
#include <cmath>
#include <span>

#include "shield/audio/waveform.hpp"
#include "shield/common.hpp"

namespace shield::dsp {

// Pearson r over raw samples. Constant input has no defined correlation.
inline double pearson_correlation(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), "pearson_correlation: length mismatch");
  require(!a.empty(), "pearson_correlation: empty input");
  const auto n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  const auto constant = [](std::span<const double> v) { return std::all_of(v.begin(), v.end(), [&](double x) { return x == v[0]; }); };
  if (saa == 0.0 || sbb == 0.0 || constant(a) || constant(b)) throw invalid_input("pearson_correlation: constant input");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

inline double pearson_correlation(const audio::Waveform& a, const audio::Waveform& b) {
  return pearson_correlation(a.samples, b.samples);
}

}  // namespace shield::dsp
