#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "shield/audio/wav_io.hpp"
#include "shield/audio/waveform.hpp"
#include "shield/common.hpp"
#include "shield/rng.hpp"

namespace shield::audio {

struct ManifestEntry {
  std::string path;  // relative to the corpus root
  Label label = Label::real;
  std::string source;
};

struct LoadOptions {
  int sample_rate_hz = kDefaultSampleRate;
  std::size_t clip_length = kDefaultClipLength;
};

inline constexpr std::string_view kManifestHeader = "path,label,source";

inline std::vector<std::string> split_csv_row(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

// Rejects absolute paths and paths that escape the corpus root.
inline bool stays_under_root(const std::string& rel) {
  const std::filesystem::path p(rel);
  if (p.empty() || p.is_absolute() || p.has_root_name()) return false;
  int depth = 0;
  for (const auto& part : p.lexically_normal()) {
    if (part == "..") {
      if (--depth < 0) return false;
    } else if (part != ".") {
      ++depth;
    }
  }
  return true;
}

inline std::vector<ManifestEntry> parse_manifest(std::istream& in, const std::string& name = "manifest") {
  std::vector<ManifestEntry> entries;
  std::string line;
  std::size_t row = 0;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (row == 1 && line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // BOM
    if (line.empty()) continue;
    if (!saw_header) {
      if (line != kManifestHeader)
        throw invalid_input(name + ": row " + std::to_string(row) + ": expected header '" + std::string(kManifestHeader) + "'");
      saw_header = true;
      continue;
    }
    const auto fields = split_csv_row(line);
    const auto bad = [&](const std::string& why) {
      return invalid_input(name + ": row " + std::to_string(row) + ": " + why);
    };
    if (fields.size() != 3) throw bad("expected 3 fields, got " + std::to_string(fields.size()));
    const auto label = parse_label(fields[1]);
    if (!label) throw bad("unknown label '" + fields[1] + "'");
    if (!stays_under_root(fields[0])) throw bad("path escapes corpus root: " + fields[0]);
    if (*label == Label::attacked && fields[2].empty()) throw bad("attacked row needs a generator id in source");
    entries.push_back({fields[0], *label, fields[2]});
  }
  return entries;
}

inline std::vector<LabeledClip> load_manifest(const std::filesystem::path& root, const std::filesystem::path& manifest,
                                              const LoadOptions& opts = {}) {
  std::ifstream in(manifest);
  if (!in) throw invalid_input("manifest not found: " + manifest.string());
  const auto entries = parse_manifest(in, manifest.string());
  std::vector<LabeledClip> clips;
  clips.reserve(entries.size());
  for (const auto& e : entries) {
    const auto path = root / e.path;
    if (!std::filesystem::exists(path)) throw invalid_input("missing audio file: " + path.string());
    Waveform w = read_wav(path);
    w = resample(w, opts.sample_rate_hz);
    w = fit_length(std::move(w), opts.clip_length);
    for (double& s : w.samples)
      if (!std::isfinite(s)) throw invalid_input("non-finite sample in " + path.string());
    w = peak_normalize(std::move(w));
    clips.push_back({e.path, std::move(w), e.label, e.source});
  }
  return clips;
}

inline std::string format_manifest(const std::vector<ManifestEntry>& entries) {
  std::ostringstream os;
  os << kManifestHeader << '\n';
  for (const auto& e : entries) os << e.path << ',' << to_string(e.label) << ',' << e.source << '\n';
  return os.str();
}

// Downsamples every class to the size of the smallest one. Selection is a
// seeded partial shuffle; survivors keep their original relative order.
inline std::vector<LabeledClip> balance_classes(const std::vector<LabeledClip>& clips, std::uint64_t seed) {
  std::map<Label, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < clips.size(); ++i) by_class[clips[i].label].push_back(i);
  if (by_class.size() < 2) return clips;
  std::size_t smallest = clips.size();
  for (const auto& [label, idx] : by_class) smallest = std::min(smallest, idx.size());
  std::vector<std::size_t> keep;
  for (auto& [label, idx] : by_class) {
    Rng rng(derive_seed(seed, "balance", static_cast<std::uint64_t>(label)));
    for (std::size_t i = 0; i < smallest; ++i) {
      const auto j = static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(i), static_cast<std::int64_t>(idx.size() - 1)));
      std::swap(idx[i], idx[j]);
    }
    keep.insert(keep.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(smallest));
  }
  std::sort(keep.begin(), keep.end());
  std::vector<LabeledClip> out;
  out.reserve(keep.size());
  for (auto i : keep) out.push_back(clips[i]);
  return out;
}

}  // namespace shield::audio
