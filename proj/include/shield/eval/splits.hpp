#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "shield/audio/waveform.hpp"
#include "shield/common.hpp"

namespace shield::eval {

enum class Split { train, val, test };

inline std::string to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

// 80/10/10 by a seeded hash of the clip id, so membership survives corpus
// regeneration and reordering.
inline Split split_of(std::string_view clip_id, std::uint64_t seed) {
  Fnv1a h;
  h.add(seed);
  h.add(clip_id);
  const auto bucket = mix_seed(h.value()) % 100;
  if (bucket < 80) return Split::train;
  if (bucket < 90) return Split::val;
  return Split::test;
}

struct SplitSet {
  std::vector<audio::LabeledClip> train, val, test;

  // val and test together; the held-out pool used for evaluation.
  std::vector<audio::LabeledClip> held_out() const {
    std::vector<audio::LabeledClip> out = val;
    out.insert(out.end(), test.begin(), test.end());
    return out;
  }
};

inline SplitSet split_clips(const std::vector<audio::LabeledClip>& clips, std::uint64_t seed) {
  SplitSet s;
  for (const auto& c : clips) {
    switch (split_of(c.id, seed)) {
      case Split::train: s.train.push_back(c); break;
      case Split::val: s.val.push_back(c); break;
      case Split::test: s.test.push_back(c); break;
    }
  }
  return s;
}

inline std::vector<audio::LabeledClip> with_label(const std::vector<audio::LabeledClip>& clips, audio::Label label) {
  std::vector<audio::LabeledClip> out;
  for (const auto& c : clips)
    if (c.label == label) out.push_back(c);
  return out;
}

// One named evaluation corpus; clips keep their source tag.
struct Corpus {
  std::string name;
  std::vector<audio::LabeledClip> clips;
};

// Groups clips by their source column, sorted by name.
inline std::vector<Corpus> group_by_source(const std::vector<audio::LabeledClip>& clips) {
  std::map<std::string, std::vector<audio::LabeledClip>> by;
  for (const auto& c : clips) by[c.source.empty() ? "default" : c.source].push_back(c);
  std::vector<Corpus> out;
  for (auto& [name, v] : by) out.push_back({name, std::move(v)});
  return out;
}

}  // namespace shield::eval
