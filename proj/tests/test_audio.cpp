#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "shield/audio/manifest.hpp"
#include "shield/audio/synth.hpp"
#include "shield/audio/wav_io.hpp"
#include "test_util.hpp"

using namespace shield;
using namespace shield::audio;

namespace {

// Spectral centroid (Hz) from a naive DFT over a few Hann frames.
double centroid(const Waveform& w) {
  constexpr std::size_t N = 1024;
  double num = 0.0, den = 0.0;
  for (std::size_t start = 2000; start + N <= w.size() && start < 14000; start += 4000) {
    for (std::size_t k = 1; k < N / 2; ++k) {
      double re = 0.0, im = 0.0;
      for (std::size_t n = 0; n < N; ++n) {
        const double win = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / N);
        const double ang = -2.0 * std::numbers::pi * static_cast<double>(k * n) / N;
        re += w.samples[start + n] * win * std::cos(ang);
        im += w.samples[start + n] * win * std::sin(ang);
      }
      const double mag = std::hypot(re, im);
      num += mag * static_cast<double>(k) * w.sample_rate_hz / N;
      den += mag;
    }
  }
  return num / den;
}

// Two-sided Mann-Whitney U p-value, normal approximation (no ties expected).
double rank_sum_p(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<std::pair<double, int>> all;
  for (double x : a) all.push_back({x, 0});
  for (double x : b) all.push_back({x, 1});
  std::sort(all.begin(), all.end());
  double ra = 0.0;
  for (std::size_t i = 0; i < all.size(); ++i)
    if (all[i].second == 0) ra += static_cast<double>(i + 1);
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double u = ra - na * (na + 1) / 2;
  const double mu = na * nb / 2;
  const double sigma = std::sqrt(na * nb * (na + nb + 1) / 12);
  const double z = std::abs(u - mu) / sigma;
  return std::erfc(z / std::sqrt(2.0));
}

// Frequency from linearly interpolated rising zero crossings.
double zero_crossing_frequency(const std::vector<double>& x, int sr, std::size_t skip) {
  std::vector<double> crossings;
  for (std::size_t i = skip; i + 1 < x.size() - skip; ++i)
    if (x[i] < 0.0 && x[i + 1] >= 0.0) crossings.push_back(static_cast<double>(i) + x[i] / (x[i] - x[i + 1]));
  const double periods = static_cast<double>(crossings.size() - 1);
  return periods * sr / (crossings.back() - crossings.front());
}

void write_text(const std::filesystem::path& p, const std::string& s) {
  std::ofstream out(p);
  out << s;
}

}  // namespace

TEST(Synth, RealClipsAreBoundedAndDeterministic) {
  const auto a = synth_real(7, 4);
  const auto b = synth_real(7, 4);
  ASSERT_EQ(a.size(), 4u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].waveform.size(), 16000u);
    EXPECT_EQ(a[i].label, Label::real);
    EXPECT_LE(peak_abs(a[i].waveform), 1.0);
    EXPECT_EQ(a[i].waveform, b[i].waveform);
    EXPECT_EQ(a[i].id, b[i].id);
  }
}

TEST(Synth, FakeClipsCarryLabel) {
  const auto f = synth_fake(3, 2);
  ASSERT_EQ(f.size(), 2u);
  for (const auto& c : f) {
    EXPECT_EQ(c.label, Label::fake);
    EXPECT_EQ(c.waveform.size(), 16000u);
    EXPECT_FALSE(check_clip(c, 16000).has_value());
  }
}

TEST(Synth, ShortClipLength) {
  SynthConfig cfg;
  cfg.clip_length = 8192;
  EXPECT_EQ(synth_real(1, 1, cfg)[0].waveform.size(), 8192u);
  EXPECT_EQ(synth_fake(1, 1, cfg)[0].waveform.size(), 8192u);
}

TEST(Synth, QuantizerMatchesBruteForceGrid) {
  std::vector<double> grid;
  for (int k = -32; k <= 31; ++k) grid.push_back(k / 32.0);
  const auto nearest = [&](double x) {
    double best = grid[0];
    for (double g : grid)
      if (std::abs(g - x) < std::abs(best - x)) best = g;
    return best;
  };
  EXPECT_DOUBLE_EQ(quantize_6bit(0.377), 0.375);
  EXPECT_EQ(grid.size(), 64u);
  for (double x : shield::testing::random_vector(5000, 17)) {
    // Exact midpoints round to even under nearbyint; the oracle keeps the first.
    if (std::abs(x * 32.0 - std::round(x * 32.0)) == 0.5) continue;
    EXPECT_DOUBLE_EQ(quantize_6bit(x), nearest(x)) << x;
  }
  EXPECT_DOUBLE_EQ(quantize_6bit(1.0), 31.0 / 32.0);
  EXPECT_DOUBLE_EQ(quantize_6bit(-1.0), -1.0);
}

TEST(Synth, SpectralCentroidsDifferBetweenClasses) {
  const auto reals = synth_real(7, 100);
  const auto fakes = synth_fake(7, 100);
  std::vector<double> cr, cf;
  for (const auto& c : reals) cr.push_back(centroid(c.waveform));
  for (const auto& c : fakes) cf.push_back(centroid(c.waveform));
  EXPECT_LT(rank_sum_p(cr, cf), 0.01);
}

TEST(Waveform, PeakNormalize) {
  Waveform w{{0.5, -0.25}, 16000};
  EXPECT_EQ(peak_normalize(w).samples, (std::vector<double>{1.0, -0.5}));
  Waveform z{std::vector<double>(10, 0.0), 16000};
  EXPECT_EQ(peak_normalize(z).samples, z.samples);

  Waveform r{shield::testing::random_vector(1000, 5, -0.3, 0.3), 16000};
  const auto argmax = [](const std::vector<double>& v) {
    return std::max_element(v.begin(), v.end(), [](double a, double b) { return std::abs(a) < std::abs(b); }) - v.begin();
  };
  const auto n = peak_normalize(r);
  EXPECT_EQ(argmax(n.samples), argmax(r.samples));
  EXPECT_DOUBLE_EQ(peak_abs(n), 1.0);
}

TEST(Waveform, Validation) {
  EXPECT_THROW(validate_waveform(Waveform{{}, 16000}), Error);
  EXPECT_THROW(validate_waveform(Waveform{{0.1, 1.5}, 16000}), Error);
  EXPECT_THROW(validate_waveform(Waveform{{0.1, std::nan("")}, 16000}), Error);
  EXPECT_THROW(validate_waveform(Waveform{{0.1}, 0}), Error);
  EXPECT_THROW(validate_waveform(Waveform{{0.1, 0.2}, 16000}, 3), Error);
  EXPECT_NO_THROW(validate_waveform(Waveform{{0.1, -1.0}, 16000}, 2));
  LabeledClip c{"x", Waveform{{0.1}, 16000}, Label::attacked, ""};
  EXPECT_TRUE(check_clip(c).has_value());
}

TEST(Wav, Pcm16RoundTripWithinHalfStep) {
  shield::testing::TempDir dir("wav");
  const auto clip = synth_real(2, 1)[0].waveform;
  write_wav(dir.path() / "a.wav", clip);
  const auto back = read_wav(dir.path() / "a.wav");
  ASSERT_EQ(back.size(), clip.size());
  EXPECT_EQ(back.sample_rate_hz, 16000);
  double worst = 0.0;
  for (std::size_t i = 0; i < clip.size(); ++i) worst = std::max(worst, std::abs(back.samples[i] - clip.samples[i]));
  EXPECT_LE(worst, std::ldexp(1.0, -15));
}

TEST(Wav, RejectsGarbage) {
  shield::testing::TempDir dir("wavbad");
  write_text(dir.path() / "bad.wav", "not a wav file at all");
  EXPECT_THROW(read_wav(dir.path() / "bad.wav"), Error);
  EXPECT_THROW(read_wav(dir.path() / "missing.wav"), Error);
}

TEST(Manifest, ParsesRows) {
  std::istringstream empty("path,label,source\n");
  EXPECT_TRUE(parse_manifest(empty).empty());
  std::istringstream one("path,label,source\na.wav,real,asvspoof\n");
  const auto rows = parse_manifest(one);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].path, "a.wav");
  EXPECT_EQ(rows[0].label, Label::real);
  EXPECT_EQ(rows[0].source, "asvspoof");
}

TEST(Manifest, ErrorsNameTheRow) {
  const auto message = [](const std::string& text) {
    std::istringstream in(text);
    try {
      parse_manifest(in, "m.csv");
    } catch (const Error& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  EXPECT_NE(message("path,label,source\na.wav,real,x\nb.wav,bogus,x\n").find("row 3"), std::string::npos);
  EXPECT_NE(message("path,label,source\na.wav,real\n").find("row 2"), std::string::npos);
  EXPECT_NE(message("path,label,source\n../a.wav,real,x\n").find("escapes"), std::string::npos);
  EXPECT_NE(message("path,label,source\na.wav,attacked,\n").find("generator"), std::string::npos);
  EXPECT_NE(message("wrong,header\n").find("header"), std::string::npos);
}

TEST(Manifest, MissingFileNamesPath) {
  shield::testing::TempDir dir("man");
  write_text(dir.path() / "m.csv", "path,label,source\nnope.wav,real,x\n");
  try {
    load_manifest(dir.path(), dir.path() / "m.csv");
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::invalid_input);
    EXPECT_NE(std::string(e.what()).find("nope.wav"), std::string::npos);
  }
}

TEST(Manifest, EmptyManifestLoadsNothing) {
  shield::testing::TempDir dir("man0");
  write_text(dir.path() / "m.csv", "path,label,source\n");
  EXPECT_TRUE(load_manifest(dir.path(), dir.path() / "m.csv").empty());
}

TEST(Manifest, ResamplesEightKilohertzSine) {
  shield::testing::TempDir dir("sine");
  constexpr double f = 440.0;
  Waveform w;
  w.sample_rate_hz = 8000;
  for (int i = 0; i < 8000; ++i) w.samples.push_back(0.8 * std::sin(2.0 * std::numbers::pi * f * i / 8000.0));
  write_wav(dir.path() / "s.wav", w);
  write_text(dir.path() / "m.csv", "path,label,source\ns.wav,real,test\n");
  const auto clips = load_manifest(dir.path(), dir.path() / "m.csv");
  ASSERT_EQ(clips.size(), 1u);
  const auto& out = clips[0].waveform;
  EXPECT_EQ(out.sample_rate_hz, 16000);
  EXPECT_EQ(out.size(), 16000u);
  EXPECT_NEAR(zero_crossing_frequency(out.samples, 16000, 200), f, 1.0);

  // Ideal band-limited reference: the analytic sine sampled at 16 kHz, peak 1
  // after normalization. Compare away from the edges.
  double worst = 0.0;
  for (int i = 400; i < 15600; ++i)
    worst = std::max(worst, std::abs(out.samples[static_cast<std::size_t>(i)] - std::sin(2.0 * std::numbers::pi * f * i / 16000.0)));
  EXPECT_LT(worst, 1e-2);
}

TEST(Manifest, BalanceClassesKeepsOrder) {
  std::vector<LabeledClip> clips;
  for (int i = 0; i < 10; ++i) clips.push_back({"r" + std::to_string(i), Waveform{{0.1}, 16000}, Label::real, "s"});
  for (int i = 0; i < 4; ++i) clips.push_back({"f" + std::to_string(i), Waveform{{0.1}, 16000}, Label::fake, "s"});
  const auto out = balance_classes(clips, 3);
  ASSERT_EQ(out.size(), 8u);
  EXPECT_EQ(std::count_if(out.begin(), out.end(), [](const auto& c) { return c.label == Label::real; }), 4);
  EXPECT_EQ(balance_classes(clips, 3)[0].id, out[0].id);
}
