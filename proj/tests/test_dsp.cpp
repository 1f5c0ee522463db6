#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "shield/dsp/correlation.hpp"
#include "shield/dsp/filters.hpp"
#include "shield/dsp/mel.hpp"
#include "shield/dsp/plot.hpp"
#include "test_util.hpp"

using namespace shield;
using namespace shield::dsp;

namespace {

std::vector<cplx> naive_dft(const std::vector<cplx>& x, bool inverse) {
  const std::size_t n = x.size();
  std::vector<cplx> out(n);
  const double sign = inverse ? 1.0 : -1.0;
  for (std::size_t k = 0; k < n; ++k) {
    cplx acc{};
    for (std::size_t t = 0; t < n; ++t) acc += x[t] * std::polar(1.0, sign * 2.0 * std::numbers::pi * static_cast<double>(k * t) / n);
    out[k] = acc;
  }
  return out;
}

audio::Waveform sine(double hz, std::size_t n, double amp = 0.5) {
  audio::Waveform w;
  for (std::size_t i = 0; i < n; ++i) w.samples.push_back(amp * std::sin(2.0 * std::numbers::pi * hz * i / 16000.0));
  return w;
}

}  // namespace

TEST(Fft, MatchesNaiveDft) {
  for (std::size_t n : {2u, 8u, 64u, 256u}) {
    const auto re = shield::testing::random_vector(n, 1), im = shield::testing::random_vector(n, 2);
    std::vector<cplx> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = {re[i], im[i]};
    for (bool inverse : {false, true}) {
      auto y = x;
      FftPlan(n).transform(y, inverse);
      const auto ref = naive_dft(x, inverse);
      for (std::size_t k = 0; k < n; ++k) EXPECT_LT(std::abs(y[k] - ref[k]), 1e-10) << n << " " << k;
    }
  }
  EXPECT_THROW(FftPlan(12), Error);
}

TEST(Mel, FrameCount) {
  EXPECT_EQ(frame_count(16000, 1024, 256), 59);
  EXPECT_EQ(log_mel_spectrogram(sine(440, 16000)).frames, 59);
  EXPECT_EQ(log_mel_spectrogram(sine(440, 16000)).n_mels, 64);
}

TEST(Mel, SilenceHitsFloor) {
  audio::Waveform w;
  w.samples.assign(4096, 0.0);
  const auto s = log_mel_spectrogram(w);
  for (double b : s.bins) EXPECT_DOUBLE_EQ(b, -10.0);
}

TEST(Mel, ShortClipIsRejected) {
  audio::Waveform w;
  w.samples.assign(1000, 0.1);
  EXPECT_THROW(log_mel_spectrogram(w), Error);
}

TEST(Mel, CentersFollowHtkFormula) {
  MelConfig cfg;
  const auto centers = mel_center_frequencies(cfg);
  ASSERT_EQ(centers.size(), 64u);
  const double top = 2595.0 * std::log10(1.0 + 8000.0 / 700.0);
  for (int m = 0; m < 64; ++m) {
    const double mel = top * (m + 1) / 65.0;
    EXPECT_NEAR(centers[static_cast<std::size_t>(m)], 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0), 1e-9);
  }
}

TEST(Mel, OneKilohertzSinePeaksInNearestBand) {
  const auto centers = mel_center_frequencies(MelConfig{});
  std::size_t nearest = 0;
  for (std::size_t m = 0; m < centers.size(); ++m)
    if (std::abs(centers[m] - 1000.0) < std::abs(centers[nearest] - 1000.0)) nearest = m;
  const auto s = log_mel_spectrogram(sine(1000.0, 16000));
  for (int f = 0; f < s.frames; ++f) {
    int best = 0;
    for (int m = 1; m < s.n_mels; ++m)
      if (s.at(m, f) > s.at(best, f)) best = m;
    EXPECT_EQ(static_cast<std::size_t>(best), nearest) << "frame " << f;
  }
}

TEST(Pearson, IdentityAndNegation) {
  const auto w = sine(300, 2000);
  auto neg = w;
  for (double& s : neg.samples) s = -s;
  EXPECT_NEAR(pearson_correlation(w, w), 1.0, 1e-12);
  EXPECT_NEAR(pearson_correlation(w, neg), -1.0, 1e-12);
  audio::Waveform c;
  c.samples.assign(2000, 0.3);
  EXPECT_THROW(pearson_correlation(w, c), Error);
}

TEST(Pearson, MatchesTwoPassOracle) {
  const auto a = shield::testing::random_vector(3001, 8), b = shield::testing::random_vector(3001, 9);
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= a.size();
  mb /= b.size();
  double cov = 0, va = 0, vb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    cov += (a[i] - ma) * (b[i] - mb);
    va += (a[i] - ma) * (a[i] - ma);
    vb += (b[i] - mb) * (b[i] - mb);
  }
  EXPECT_NEAR(pearson_correlation(a, b), cov / std::sqrt(va * vb), 1e-9);
}

TEST(Filters, LowpassPassesDcAndBlocksNyquist) {
  const auto h = design_lowpass(3400.0, 16000.0);
  double dc = 0.0, ny = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    dc += h[i];
    ny += (i % 2 ? -1.0 : 1.0) * h[i];
  }
  EXPECT_NEAR(dc, 1.0, 1e-2);
  EXPECT_LT(std::abs(ny), 1e-2);
}

TEST(Plot, WritesImageAndSidecar) {
  shield::testing::TempDir dir("plot");
  const auto s = log_mel_spectrogram(sine(700, 16000));
  const auto files = export_spectrogram_plot(s, dir.path() / "spec.bmp");
  EXPECT_TRUE(std::filesystem::exists(files.image));
  EXPECT_TRUE(std::filesystem::exists(files.csv));
  std::size_t image_files = 0, csv_files = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir.path())) (e.path().extension() == ".csv" ? csv_files : image_files)++;
  EXPECT_EQ(image_files, 1u);
  EXPECT_EQ(csv_files, 1u);

  std::ifstream in(files.csv);
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 58);
  }
  EXPECT_EQ(rows, 64);
}

TEST(Plot, SilenceRendersUniform) {
  audio::Waveform w;
  w.samples.assign(4096, 0.0);
  const auto s = log_mel_spectrogram(w);
  const auto pgm = render_spectrogram_image(s, ".pgm");
  const auto header_end = pgm.size() - static_cast<std::size_t>(s.n_mels * s.frames);
  const std::string pixels = pgm.substr(header_end);
  EXPECT_EQ(std::count(pixels.begin(), pixels.end(), pixels[0]), static_cast<long>(pixels.size()));
}

TEST(Plot, BadPathsAreErrors) {
  shield::testing::TempDir dir("plotbad");
  const auto s = log_mel_spectrogram(sine(700, 4096));
  EXPECT_THROW(export_spectrogram_plot(s, dir.path() / "x.gif"), Error);
  EXPECT_THROW(export_spectrogram_plot(s, dir.path() / "missing" / "x.bmp"), Error);
}
