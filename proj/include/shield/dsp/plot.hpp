#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "shield/common.hpp"
#include "shield/dsp/mel.hpp"

namespace shield::dsp {

// Row-major bins, one mel band per line, 6 significant digits.
inline std::string spectrogram_csv(const Spectrogram& s) {
  std::string out;
  char buf[32];
  for (int m = 0; m < s.n_mels; ++m) {
    for (int f = 0; f < s.frames; ++f) {
      std::snprintf(buf, sizeof buf, "%.6g", s.at(m, f));
      if (f) out.push_back(',');
      out += buf;
    }
    out.push_back('\n');
  }
  return out;
}

namespace detail {

// Perceptually ordered dark-blue -> yellow ramp.
inline std::array<std::uint8_t, 3> colormap(double t) {
  static constexpr std::array<std::array<double, 3>, 5> stops = {{
      {0.05, 0.03, 0.25}, {0.35, 0.10, 0.55}, {0.75, 0.20, 0.40}, {0.98, 0.55, 0.15}, {0.98, 0.95, 0.55}}};
  t = std::clamp(t, 0.0, 1.0) * (stops.size() - 1);
  const auto i = std::min<std::size_t>(static_cast<std::size_t>(t), stops.size() - 2);
  const double u = t - static_cast<double>(i);
  std::array<std::uint8_t, 3> rgb{};
  for (std::size_t c = 0; c < 3; ++c)
    rgb[c] = static_cast<std::uint8_t>(std::lround(255.0 * (stops[i][c] * (1 - u) + stops[i + 1][c] * u)));
  return rgb;
}

inline void put_le(std::string& out, std::uint32_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

}  // namespace detail

// Raster of the spectrogram: time on x, mel band on y (low bands at the
// bottom). Intensities are min-max scaled; a constant spectrogram renders
// as a uniform image. Format follows the extension: .pgm, .ppm or .bmp.
inline std::string render_spectrogram_image(const Spectrogram& s, const std::string& ext) {
  const auto [lo_it, hi_it] = std::minmax_element(s.bins.begin(), s.bins.end());
  const double lo = *lo_it, hi = *hi_it;
  const auto intensity = [&](int m, int f) { return hi > lo ? (s.at(m, f) - lo) / (hi - lo) : 0.5; };
  const int width = s.frames, height = s.n_mels;
  std::string out;
  if (ext == ".pgm") {
    out = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x)
        out.push_back(static_cast<char>(std::lround(255.0 * intensity(height - 1 - y, x))));
  } else if (ext == ".ppm") {
    out = "P6\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x)
        for (auto c : detail::colormap(intensity(height - 1 - y, x))) out.push_back(static_cast<char>(c));
  } else if (ext == ".bmp") {
    const int row = (3 * width + 3) & ~3;
    const auto data_size = static_cast<std::uint32_t>(row * height);
    out = "BM";
    detail::put_le(out, 54 + data_size, 4);
    detail::put_le(out, 0, 4);
    detail::put_le(out, 54, 4);
    detail::put_le(out, 40, 4);
    detail::put_le(out, static_cast<std::uint32_t>(width), 4);
    detail::put_le(out, static_cast<std::uint32_t>(height), 4);  // bottom-up rows
    detail::put_le(out, 1, 2);
    detail::put_le(out, 24, 2);
    detail::put_le(out, 0, 4);
    detail::put_le(out, data_size, 4);
    detail::put_le(out, 2835, 4);
    detail::put_le(out, 2835, 4);
    detail::put_le(out, 0, 4);
    detail::put_le(out, 0, 4);
    for (int m = 0; m < height; ++m) {
      std::size_t written = 0;
      for (int x = 0; x < width; ++x) {
        const auto rgb = detail::colormap(intensity(m, x));
        out.push_back(static_cast<char>(rgb[2]));
        out.push_back(static_cast<char>(rgb[1]));
        out.push_back(static_cast<char>(rgb[0]));
        written += 3;
      }
      for (; written < static_cast<std::size_t>(row); ++written) out.push_back('\0');
    }
  } else {
    throw invalid_input("unsupported image extension '" + ext + "' (use .pgm, .ppm or .bmp)");
  }
  return out;
}

struct PlotFiles {
  std::filesystem::path image;
  std::filesystem::path csv;
};

// Writes the image at `path` plus a sidecar CSV next to it (same stem, .csv).
inline PlotFiles export_spectrogram_plot(const Spectrogram& s, const std::filesystem::path& path) {
  require(s.n_mels > 0 && s.frames > 0 && s.bins.size() == static_cast<std::size_t>(s.n_mels) * s.frames,
          "export_spectrogram_plot: malformed spectrogram");
  const std::string image = render_spectrogram_image(s, path.extension().string());
  PlotFiles files{path, path};
  files.csv.replace_extension(".csv");
  if (files.csv == files.image) throw invalid_input("image path must not end in .csv");
  const auto write = [](const std::filesystem::path& p, const std::string& bytes) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw invalid_input("cannot write " + p.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw invalid_input("write failed: " + p.string());
  };
  write(files.image, image);
  write(files.csv, spectrogram_csv(s));
  return files;
}

}  // namespace shield::dsp
