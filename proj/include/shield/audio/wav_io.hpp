#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <string>
#include <vector>

#include "shield/audio/waveform.hpp"
#include "shield/common.hpp"
#include "shield/dsp/filters.hpp"

namespace shield::audio {

namespace detail {

inline std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
inline std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

}  // namespace detail

// PCM16 uses a symmetric 32767 scale in both directions so that a written
// clip reloads within half a quantization step.
inline constexpr double kPcm16Scale = 32767.0;

// Decodes RIFF WAV (PCM 16-bit or IEEE float32). Multi-channel input keeps
// the first channel.
inline Waveform read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw invalid_input("cannot open audio file: " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto fail = [&](const std::string& why) { return invalid_input("bad WAV " + path.string() + ": " + why); };
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 || std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw fail("missing RIFF/WAVE header");

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::size_t data_len = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t len = detail::read_u32(chunk + 4);
    const std::size_t body = pos + 8;
    if (body + len > bytes.size()) throw fail("truncated chunk");
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (len < 16) throw fail("short fmt chunk");
      format = detail::read_u16(chunk + 8);
      channels = detail::read_u16(chunk + 10);
      rate = detail::read_u32(chunk + 12);
      bits = detail::read_u16(chunk + 22);
      if (format == 0xFFFE && len >= 26) format = detail::read_u16(chunk + 32);  // extensible: sub-format GUID
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = chunk + 8;
      data_len = len;
    }
    pos = body + len + (len & 1u);
  }
  if (channels == 0 || rate == 0) throw fail("missing fmt chunk");
  if (data == nullptr) throw fail("missing data chunk");

  Waveform w;
  w.sample_rate_hz = static_cast<int>(rate);
  if (format == 1 && bits == 16) {
    const std::size_t frame = 2u * channels;
    const std::size_t frames = data_len / frame;
    w.samples.resize(frames);
    for (std::size_t i = 0; i < frames; ++i) {
      const auto raw = static_cast<std::int16_t>(detail::read_u16(data + i * frame));
      w.samples[i] = std::clamp(raw / kPcm16Scale, -1.0, 1.0);
    }
  } else if (format == 3 && bits == 32) {
    const std::size_t frame = 4u * channels;
    const std::size_t frames = data_len / frame;
    w.samples.resize(frames);
    for (std::size_t i = 0; i < frames; ++i) {
      float f;
      const std::uint32_t bitsv = detail::read_u32(data + i * frame);
      std::memcpy(&f, &bitsv, sizeof f);
      w.samples[i] = static_cast<double>(f);
    }
  } else {
    throw fail("unsupported encoding (format " + std::to_string(format) + ", " + std::to_string(bits) + " bits)");
  }
  return w;
}

inline std::string encode_wav_pcm16(const Waveform& w) {
  std::string out;
  const auto n = static_cast<std::uint32_t>(w.samples.size());
  out.reserve(44 + 2 * n);
  out += "RIFF";
  detail::put_u32(out, 36 + 2 * n);
  out += "WAVEfmt ";
  detail::put_u32(out, 16);
  detail::put_u16(out, 1);
  detail::put_u16(out, 1);
  detail::put_u32(out, static_cast<std::uint32_t>(w.sample_rate_hz));
  detail::put_u32(out, static_cast<std::uint32_t>(w.sample_rate_hz) * 2);
  detail::put_u16(out, 2);
  detail::put_u16(out, 16);
  out += "data";
  detail::put_u32(out, 2 * n);
  for (double s : w.samples) {
    const auto v = static_cast<std::int16_t>(std::lrint(std::clamp(s, -1.0, 1.0) * kPcm16Scale));
    detail::put_u16(out, static_cast<std::uint16_t>(v));
  }
  return out;
}

inline std::string encode_wav_float32(const Waveform& w) {
  std::string out;
  const auto n = static_cast<std::uint32_t>(w.samples.size());
  out += "RIFF";
  detail::put_u32(out, 36 + 4 * n);
  out += "WAVEfmt ";
  detail::put_u32(out, 16);
  detail::put_u16(out, 3);
  detail::put_u16(out, 1);
  detail::put_u32(out, static_cast<std::uint32_t>(w.sample_rate_hz));
  detail::put_u32(out, static_cast<std::uint32_t>(w.sample_rate_hz) * 4);
  detail::put_u16(out, 4);
  detail::put_u16(out, 32);
  out += "data";
  detail::put_u32(out, 4 * n);
  for (double s : w.samples) {
    const auto f = static_cast<float>(s);
    std::uint32_t bits;
    std::memcpy(&bits, &f, sizeof bits);
    detail::put_u32(out, bits);
  }
  return out;
}

inline void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw invalid_input("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw invalid_input("write failed: " + path.string());
}

inline void write_wav(const std::filesystem::path& path, const Waveform& w) { write_file(path, encode_wav_pcm16(w)); }

// Band-limited resampling with a Hann-windowed sinc kernel (16 zero crossings
// per side at the narrower of the two Nyquist rates).
inline Waveform resample(const Waveform& w, int target_rate_hz) {
  require(target_rate_hz > 0, "target sample rate must be positive");
  if (w.sample_rate_hz == target_rate_hz || w.samples.empty()) {
    Waveform out = w;
    out.sample_rate_hz = target_rate_hz;
    return out;
  }
  const double ratio = static_cast<double>(target_rate_hz) / w.sample_rate_hz;
  const double cutoff = std::min(1.0, ratio);  // relative to input Nyquist
  constexpr double kZeroCrossings = 16.0;
  const double half_width = kZeroCrossings / cutoff;  // in input samples
  const auto n_in = static_cast<std::ptrdiff_t>(w.samples.size());
  const auto n_out = static_cast<std::size_t>(std::llround(static_cast<double>(n_in) * ratio));

  Waveform out;
  out.sample_rate_hz = target_rate_hz;
  out.samples.resize(n_out);
  for (std::size_t m = 0; m < n_out; ++m) {
    const double center = static_cast<double>(m) / ratio;
    const auto lo = static_cast<std::ptrdiff_t>(std::ceil(center - half_width));
    const auto hi = static_cast<std::ptrdiff_t>(std::floor(center + half_width));
    double acc = 0.0;
    for (std::ptrdiff_t k = std::max<std::ptrdiff_t>(lo, 0); k <= std::min(hi, n_in - 1); ++k) {
      const double d = center - static_cast<double>(k);
      const double window = 0.5 + 0.5 * std::cos(std::numbers::pi * d / half_width);
      acc += w.samples[static_cast<std::size_t>(k)] * cutoff * dsp::sinc(cutoff * d) * window;
    }
    out.samples[m] = acc;
  }
  return out;
}

}  // namespace shield::audio
