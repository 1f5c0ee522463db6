#pragma once

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "shield/common.hpp"
#include "shield/defense/shield.hpp"

namespace shield::defense {

struct LabeledEmbedding {
  std::string clip_id;
  PairLabel label = PairLabel::real_pair;
  EmbeddingVec values;
};

inline std::vector<LabeledEmbedding> embed_all(const ShieldModel& m, const std::vector<PairedClip>& pairs) {
  std::vector<LabeledEmbedding> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back({p.id, p.label, embed(m, p)});
  return out;
}

// clip_id,pair_label,e_0,...,e_{E-1}
inline std::string embeddings_csv(const std::vector<LabeledEmbedding>& rows) {
  std::ostringstream os;
  os.precision(17);
  const std::size_t dim = rows.empty() ? 0 : rows.front().values.size();
  os << "clip_id,pair_label";
  for (std::size_t i = 0; i < dim; ++i) os << ",e_" << i;
  os << '\n';
  for (const auto& r : rows) {
    if (r.values.size() != dim) throw invariant_violation("embedding dimension changed within one export");
    os << r.clip_id << ',' << to_string(r.label);
    for (double v : r.values) os << ',' << v;
    os << '\n';
  }
  return os.str();
}

inline double euclidean(const EmbeddingVec& a, const EmbeddingVec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

struct SeparationStats {
  double silhouette = 0.0;
  double mean_intra = 0.0;  // mean pairwise distance within a class
  double mean_inter = 0.0;  // mean pairwise distance across classes
  std::size_t n = 0;
};

// Mean silhouette coefficient with Euclidean distance and two clusters given
// by pair_label, together with mean intra- and inter-class distances.
inline SeparationStats separation(const std::vector<LabeledEmbedding>& rows) {
  const std::size_t n = rows.size();
  std::size_t counts[2] = {0, 0};
  for (const auto& r : rows) ++counts[class_index(r.label)];
  if (counts[0] < 2 || counts[1] < 2) throw invalid_input("separation needs at least two embeddings per class");
  std::vector<double> d(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) d[i * n + j] = d[j * n + i] = euclidean(rows[i].values, rows[j].values);
  SeparationStats s;
  s.n = n;
  double intra = 0.0, inter = 0.0, sil = 0.0;
  std::size_t n_intra = 0, n_inter = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double same = 0.0, diff = 0.0;
    const int ci = class_index(rows[i].label);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      if (class_index(rows[j].label) == ci)
        same += d[i * n + j];
      else
        diff += d[i * n + j];
    }
    const double a = same / static_cast<double>(counts[ci] - 1);
    const double b = diff / static_cast<double>(counts[1 - ci]);
    const double denom = std::max(a, b);
    sil += denom > 0.0 ? (b - a) / denom : 0.0;
    intra += same;
    inter += diff;
    n_intra += counts[ci] - 1;
    n_inter += counts[1 - ci];
  }
  s.silhouette = sil / static_cast<double>(n);
  s.mean_intra = intra / static_cast<double>(n_intra);
  s.mean_inter = inter / static_cast<double>(n_inter);
  return s;
}

}  // namespace shield::defense
