#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "shield/afgan/gan.hpp"
#include "shield/audio/waveform.hpp"
#include "shield/common.hpp"
#include "shield/detectors/detector.hpp"
#include "shield/nn/adam.hpp"
#include "shield/nn/ops.hpp"
#include "shield/nn/params.hpp"
#include "shield/rng.hpp"
#include "shield/train_config.hpp"

namespace shield::defense {

enum class PairLabel { real_pair, attacked_pair };

inline std::string to_string(PairLabel l) { return l == PairLabel::real_pair ? "real_pair" : "attacked_pair"; }
inline int class_index(PairLabel l) { return l == PairLabel::real_pair ? 1 : 0; }
inline PairLabel other(PairLabel l) { return l == PairLabel::real_pair ? PairLabel::attacked_pair : PairLabel::real_pair; }

// A clip followed in time by its defense-generator reconstruction.
struct PairedClip {
  std::string id;
  std::vector<double> payload;  // 2T samples
  PairLabel label = PairLabel::real_pair;
  afgan::GenId defense_gen = afgan::GenId::G1;

  std::size_t clip_length() const { return payload.size() / 2; }
};

using EmbeddingVec = std::vector<double>;

enum class PairAxis { time, channel };
enum class DistanceKind { squared_euclidean, euclidean };

struct ShieldConfig {
  std::size_t clip_length = audio::kDefaultClipLength;
  PairAxis axis = PairAxis::time;
  std::vector<int> widths = {8, 16, 16, 32};
  int first_kernel = 16;
  int first_stride = 8;
  int kernel = 5;
  int segments = 2;  // pooled segments before the projection; 2 = one per half
  int embed_dim = 128;
  double margin = 0.0;
  double y = 1.0;
  DistanceKind distance = DistanceKind::squared_euclidean;

  bool operator==(const ShieldConfig&) const = default;
};

struct ShieldNet {
  nn::Layout embedder;
  std::vector<nn::ConvSlots> convs;
  std::vector<nn::NormSlots> norms;
  nn::LinearSlots projection;
  nn::Layout head_layout;
  nn::LinearSlots head;
};

inline std::shared_ptr<const ShieldNet> make_shield_net(const ShieldConfig& cfg) {
  require(!cfg.widths.empty() && cfg.embed_dim >= 1 && cfg.segments >= 1, "invalid shield configuration");
  auto net = std::make_shared<ShieldNet>();
  int in_ch = cfg.axis == PairAxis::time ? 1 : 2;
  for (std::size_t i = 0; i < cfg.widths.size(); ++i) {
    if (i == 0)
      net->convs.push_back(nn::add_conv1d(net->embedder, in_ch, cfg.widths[i], cfg.first_kernel, cfg.first_stride,
                                          (cfg.first_kernel - cfg.first_stride) / 2));
    else
      net->convs.push_back(nn::add_conv1d(net->embedder, in_ch, cfg.widths[i], cfg.kernel, 1, cfg.kernel / 2));
    net->norms.push_back(nn::add_norm(net->embedder, cfg.widths[i]));
    in_ch = cfg.widths[i];
  }
  net->projection = nn::add_linear(net->embedder, in_ch * cfg.segments, cfg.embed_dim);
  net->head = nn::add_linear(net->head_layout, cfg.embed_dim, 2);
  return net;
}

struct ShieldModel {
  ShieldConfig config;
  std::uint64_t seed = 0;
  std::vector<double> embedder_params;
  std::vector<double> head_params;
  bool trained = false;
  std::shared_ptr<const ShieldNet> net;
};

inline ShieldModel build_shield(const ShieldConfig& cfg, std::uint64_t seed) {
  ShieldModel m;
  m.config = cfg;
  m.seed = seed;
  m.net = make_shield_net(cfg);
  m.embedder_params = m.net->embedder.initialize(derive_seed(seed, "shield-embedder"));
  m.head_params = m.net->head_layout.initialize(derive_seed(seed, "shield-head"));
  return m;
}

// G_D(clip): the defense generator's reconstruction.
inline audio::Waveform apply_defense_generator(const afgan::GanBundle& defense, const audio::Waveform& clip) {
  audio::validate_waveform(clip);
  return afgan::run_generator(defense, clip);
}

struct PairPolicy {
  bool include_plain_fakes = false;  // map unattacked fakes to attacked_pair
};

inline PairedClip make_pair(const audio::LabeledClip& clip, const afgan::GanBundle& defense, const PairPolicy& policy = {}) {
  PairLabel label = PairLabel::real_pair;
  switch (clip.label) {
    case audio::Label::real: label = PairLabel::real_pair; break;
    case audio::Label::attacked: label = PairLabel::attacked_pair; break;
    case audio::Label::fake:
      if (!policy.include_plain_fakes)
        throw invalid_input("make_pair: clip '" + clip.id + "' is an unattacked fake; enable include_plain_fakes to pair it");
      label = PairLabel::attacked_pair;
      break;
  }
  const auto recon = apply_defense_generator(defense, clip.waveform);
  PairedClip p;
  p.id = clip.id;
  p.label = label;
  p.defense_gen = defense.id;
  p.payload.reserve(2 * clip.waveform.size());
  p.payload.insert(p.payload.end(), clip.waveform.samples.begin(), clip.waveform.samples.end());
  p.payload.insert(p.payload.end(), recon.samples.begin(), recon.samples.end());
  return p;
}

inline nn::Id pair_input(nn::Graph& g, const ShieldModel& m, std::span<const double> payload) {
  if (payload.size() != 2 * m.config.clip_length)
    throw invalid_input("embed: pair payload has " + std::to_string(payload.size()) + " samples, expected " +
                        std::to_string(2 * m.config.clip_length));
  const int T = static_cast<int>(m.config.clip_length);
  const std::vector<double> v(payload.begin(), payload.end());
  return m.config.axis == PairAxis::time ? g.constant(v, {1, 2 * T}) : g.constant(v, {2, T});
}

inline nn::Id embedder_forward(const ShieldModel& m, nn::Binding& bind, nn::Id x) {
  auto& g = bind.graph();
  const auto& net = *m.net;
  nn::Id h = x;
  for (std::size_t i = 0; i < net.convs.size(); ++i) {
    const auto& c = net.convs[i];
    h = nn::conv1d(g, h, bind(c.weight), bind(c.bias), c.stride, c.pad, c.dilation);
    h = nn::layer_norm(g, h, bind(net.norms[i].gamma), bind(net.norms[i].beta));
    h = nn::relu(g, h);
    h = nn::avg_pool1d(g, h, 2);
  }
  h = nn::segment_avg_pool(g, h, m.config.segments);
  return nn::linear(g, h, bind(net.projection.weight), bind(net.projection.bias));
}

inline EmbeddingVec embed(const ShieldModel& m, std::span<const double> payload) {
  nn::Graph g;
  nn::Binding bind(g, m.embedder_params);
  return g.value(embedder_forward(m, bind, pair_input(g, m, payload)));
}

inline EmbeddingVec embed(const ShieldModel& m, const PairedClip& pair) { return embed(m, pair.payload); }

// (d_ap, d_an) under the configured distance (squared Euclidean by default).
inline std::pair<double, double> triplet_distances(const EmbeddingVec& fa, const EmbeddingVec& fp, const EmbeddingVec& fn,
                                                   DistanceKind kind = DistanceKind::squared_euclidean) {
  require(fa.size() == fp.size() && fa.size() == fn.size(), "triplet_distances: dimension mismatch");
  double ap = 0.0, an = 0.0;
  for (std::size_t i = 0; i < fa.size(); ++i) {
    ap += (fa[i] - fp[i]) * (fa[i] - fp[i]);
    an += (fa[i] - fn[i]) * (fa[i] - fn[i]);
  }
  if (kind == DistanceKind::euclidean) return {std::sqrt(ap), std::sqrt(an)};
  return {ap, an};
}

// max(0, y * (d_ap - d_an) + m)
inline double margin_ranking_loss(double d_ap, double d_an, double y = 1.0, double m = 0.0) {
  return std::max(0.0, y * (d_ap - d_an) + m);
}

struct Triplet {
  std::size_t anchor, positive, negative;  // indices into the pair list
};

using TripletBatch = std::vector<Triplet>;

// Uniform anchor over all pairs (or over `anchor_class` when given), positive
// from the anchor's class excluding the anchor, negative from the other class.
inline TripletBatch mine_triplets(const std::vector<PairedClip>& pairs, std::uint64_t seed, std::size_t n,
                                  std::optional<PairLabel> anchor_class = std::nullopt) {
  std::array<std::vector<std::size_t>, 2> members;
  for (std::size_t i = 0; i < pairs.size(); ++i) members[static_cast<std::size_t>(class_index(pairs[i].label))].push_back(i);
  const auto& reals = members[1];
  const auto& attacked = members[0];
  if (anchor_class) {
    const auto& own = members[static_cast<std::size_t>(class_index(*anchor_class))];
    const auto& oth = members[static_cast<std::size_t>(class_index(other(*anchor_class)))];
    if (own.size() < 2 || oth.empty())
      throw invalid_input("mine_triplets: anchor class needs >= 2 members and the other class >= 1");
  } else if (reals.size() < 2 || attacked.size() < 2) {
    throw invalid_input("mine_triplets: each class needs at least 2 pairs (real " + std::to_string(reals.size()) +
                        ", attacked " + std::to_string(attacked.size()) + ")");
  }
  Rng rng(derive_seed(seed, "mine-triplets"));
  const auto pick = [&](const std::vector<std::size_t>& v) { return v[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(v.size() - 1)))]; };
  TripletBatch out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t a = anchor_class ? pick(members[static_cast<std::size_t>(class_index(*anchor_class))])
                                       : static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(pairs.size() - 1)));
    const auto cls = static_cast<std::size_t>(class_index(pairs[a].label));
    const auto& own = members[cls];
    // Sample among the other members of the anchor's class.
    auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(own.size() - 2)));
    const auto pos_in_class = static_cast<std::size_t>(std::find(own.begin(), own.end(), a) - own.begin());
    if (j >= pos_in_class) ++j;
    out.push_back({a, own[j], pick(members[1 - cls])});
  }
  return out;
}

// Margin ranking loss of one triplet as a graph, trainable through `bind`.
inline nn::Id triplet_loss_graph(const ShieldModel& m, nn::Binding& bind, std::span<const double> anchor,
                                 std::span<const double> positive, std::span<const double> negative) {
  auto& g = bind.graph();
  const nn::Id fa = embedder_forward(m, bind, pair_input(g, m, anchor));
  const nn::Id fp = embedder_forward(m, bind, pair_input(g, m, positive));
  const nn::Id fn = embedder_forward(m, bind, pair_input(g, m, negative));
  const bool sq = m.config.distance == DistanceKind::squared_euclidean;
  const nn::Id d_ap = sq ? nn::squared_distance(g, fa, fp) : nn::euclidean_distance(g, fa, fp);
  const nn::Id d_an = sq ? nn::squared_distance(g, fa, fn) : nn::euclidean_distance(g, fa, fn);
  const nn::Id diff = nn::weighted_sum(g, {d_ap, d_an}, {m.config.y, -m.config.y});
  return nn::hinge(g, nn::affine(g, diff, 1.0, m.config.margin));
}

inline double mean_triplet_loss(const ShieldModel& m, const std::vector<PairedClip>& pairs, const TripletBatch& batch) {
  require(!batch.empty(), "mean_triplet_loss: empty batch");
  double acc = 0.0;
  for (const auto& t : batch) {
    const auto fa = embed(m, pairs[t.anchor]), fp = embed(m, pairs[t.positive]), fn = embed(m, pairs[t.negative]);
    const auto [ap, an] = triplet_distances(fa, fp, fn, m.config.distance);
    acc += margin_ranking_loss(ap, an, m.config.y, m.config.margin);
  }
  return acc / static_cast<double>(batch.size());
}

struct ShieldTrainOptions {
  std::size_t triplets_per_epoch = 0;  // 0: one triplet per pair
  int head_epochs = 30;
  double head_learning_rate = 1e-3;
};

struct ShieldTrainLog {
  std::vector<double> triplet_loss;  // per stage-1 epoch
  std::vector<double> head_loss;     // per stage-2 epoch
};

inline std::array<double, 2> head_proba(const ShieldModel& m, const EmbeddingVec& e) {
  nn::Graph g;
  nn::Binding bind(g, m.head_params);
  const auto logits = nn::linear(g, g.constant(e, {static_cast<int>(e.size())}), bind(m.net->head.weight), bind(m.net->head.bias));
  const auto& p = g.value(nn::softmax(g, logits));
  return {p[0], p[1]};
}

// Stage 1 trains the embedder on mined triplets; stage 2 freezes it and fits
// the fully-connected head with cross-entropy on the embeddings.
inline ShieldModel train_shield(ShieldModel model, const std::vector<PairedClip>& pairs, const TrainConfig& cfg,
                                const ShieldTrainOptions& opts = {}, ShieldTrainLog* log = nullptr,
                                const std::function<void(const std::string&, int, double)>& on_epoch = {}) {
  cfg.validate();
  bool has_real = false, has_att = false;
  for (const auto& p : pairs) {
    (p.label == PairLabel::real_pair ? has_real : has_att) = true;
    if (p.payload.size() != 2 * model.config.clip_length) throw invalid_input("train_shield: pair '" + p.id + "' has wrong length");
  }
  if (!has_real || !has_att) throw invalid_input("train_shield: pairs must contain both real_pair and attacked_pair");

  const std::size_t per_epoch = opts.triplets_per_epoch ? opts.triplets_per_epoch : pairs.size();
  const auto bs = static_cast<std::size_t>(cfg.batch_size);
  nn::Adam emb_opt(model.embedder_params.size(), cfg.adam());
  std::vector<double> grad(model.embedder_params.size());
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto batch = mine_triplets(pairs, derive_seed(cfg.seed, "shield-epoch", static_cast<std::uint64_t>(epoch)), per_epoch);
    double total = 0.0;
    for (std::size_t start = 0; start < batch.size(); start += bs) {
      const std::size_t end = std::min(batch.size(), start + bs);
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t i = start; i < end; ++i) {
        nn::Graph g;
        nn::Binding bind(g, model.embedder_params, grad);
        const auto& t = batch[i];
        const nn::Id loss = triplet_loss_graph(model, bind, pairs[t.anchor].payload, pairs[t.positive].payload, pairs[t.negative].payload);
        g.backward(loss);
        total += g.scalar(loss);
      }
      const double inv = 1.0 / static_cast<double>(end - start);
      for (double& v : grad) v *= inv;
      emb_opt.step(model.embedder_params, grad);
    }
    total /= static_cast<double>(batch.size());
    if (log) log->triplet_loss.push_back(total);
    if (on_epoch) on_epoch("triplet", epoch, total);
  }

  // Stage 2 on cached embeddings; the embedder is no longer touched.
  std::vector<EmbeddingVec> emb;
  emb.reserve(pairs.size());
  for (const auto& p : pairs) emb.push_back(embed(model, p));
  TrainConfig head_cfg = cfg;
  head_cfg.epochs = opts.head_epochs;
  head_cfg.learning_rate = opts.head_learning_rate;
  head_cfg.validate();
  nn::Adam head_opt(model.head_params.size(), head_cfg.adam());
  std::vector<double> hgrad(model.head_params.size());
  for (int epoch = 0; epoch < head_cfg.epochs; ++epoch) {
    const auto order = detectors::shuffled_indices(pairs.size(), derive_seed(cfg.seed, "shield-head", static_cast<std::uint64_t>(epoch)));
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const std::size_t end = std::min(order.size(), start + bs);
      std::fill(hgrad.begin(), hgrad.end(), 0.0);
      for (std::size_t i = start; i < end; ++i) {
        nn::Graph g;
        nn::Binding bind(g, model.head_params, hgrad);
        const auto& e = emb[order[i]];
        const auto logits = nn::linear(g, g.constant(e, {static_cast<int>(e.size())}), bind(model.net->head.weight), bind(model.net->head.bias));
        const auto loss = nn::softmax_cross_entropy(g, logits, class_index(pairs[order[i]].label));
        g.backward(loss);
        total += g.scalar(loss);
      }
      const double inv = 1.0 / static_cast<double>(end - start);
      for (double& v : hgrad) v *= inv;
      head_opt.step(model.head_params, hgrad);
    }
    total /= static_cast<double>(pairs.size());
    if (log) log->head_loss.push_back(total);
    if (on_epoch) on_epoch("head", epoch, total);
  }
  model.trained = true;
  return model;
}

// {p(attacked), p(real)} for a clip paired through the defense generator.
inline std::array<double, 2> shield_proba(const ShieldModel& m, const afgan::GanBundle& defense, const audio::Waveform& clip) {
  audio::validate_waveform(clip, m.config.clip_length);
  const auto recon = apply_defense_generator(defense, clip);
  std::vector<double> payload(clip.samples);
  payload.insert(payload.end(), recon.samples.begin(), recon.samples.end());
  return head_proba(m, embed(m, payload));
}

inline double shield_detect(const ShieldModel& m, const afgan::GanBundle& defense, const audio::Waveform& clip) {
  return shield_proba(m, defense, clip)[1];
}

inline std::array<double, 2> shield_proba(const ShieldModel& m, const PairedClip& pair) { return head_proba(m, embed(m, pair)); }

}  // namespace shield::defense
