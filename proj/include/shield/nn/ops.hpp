#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

#include "shield/dsp/mel.hpp"
#include "shield/nn/graph.hpp"
#include "shield/nn/kernels.hpp"

namespace shield::nn {

using Id = Graph::Id;

namespace detail {
inline void expect_rank(const Graph& g, Id x, std::size_t rank, const char* op) {
  if (g.shape(x).size() != rank)
    throw invariant_violation(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " + shape_str(g.shape(x)));
}
inline bool any_grad(const Graph& g, std::initializer_list<Id> ids) {
  for (Id i : ids)
    if (i >= 0 && g.requires_grad(i)) return true;
  return false;
}
}  // namespace detail

// x: (C, L), w: (Co, C, K), b: (Co) -> (Co, Lout)
inline Id conv1d(Graph& g, Id x, Id w, Id b, int stride = 1, int pad = 0, int dilation = 1) {
  detail::expect_rank(g, x, 2, "conv1d");
  const auto& ws = g.shape(w);
  const kernels::Conv1dGeom geom{g.shape(x)[0], g.shape(x)[1], ws[0], ws[2], stride, pad, dilation};
  if (ws[1] != geom.in_ch) throw invariant_violation("conv1d: channel mismatch");
  if (geom.out_len() <= 0) throw invariant_violation("conv1d: input too short");
  const int lout = geom.out_len();
  std::vector<double> out(static_cast<std::size_t>(geom.out_ch) * lout);
  kernels::conv1d_forward(geom, g.value(x).data(), g.value(w).data(), g.value(b).data(), out.data());
  Id self = static_cast<Id>(g.size());
  return g.op({geom.out_ch, lout}, std::move(out), detail::any_grad(g, {x, w, b}), [=](Graph& gr) {
    const auto& gout = gr.grad(self);
    double* gin = gr.requires_grad(x) ? gr.grad(x).data() : nullptr;
    double* gw = gr.requires_grad(w) ? gr.grad(w).data() : nullptr;
    double* gb = gr.requires_grad(b) ? gr.grad(b).data() : nullptr;
    kernels::conv1d_backward(geom, gr.value(x).data(), gr.value(w).data(), gout.data(), gin, gw, gb);
  });
}

// x: (C, H, W), w: (Co, C, KH, KW), b: (Co); stride 1, same padding.
inline Id conv2d(Graph& g, Id x, Id w, Id b) {
  detail::expect_rank(g, x, 3, "conv2d");
  const auto& ws = g.shape(w);
  const kernels::Conv2dGeom geom{g.shape(x)[0], g.shape(x)[1], g.shape(x)[2], ws[0], ws[2], ws[3]};
  if (ws[1] != geom.in_ch) throw invariant_violation("conv2d: channel mismatch");
  std::vector<double> out(static_cast<std::size_t>(geom.out_ch) * geom.height * geom.width);
  kernels::conv2d_forward(geom, g.value(x).data(), g.value(w).data(), g.value(b).data(), out.data());
  Id self = static_cast<Id>(g.size());
  return g.op({geom.out_ch, geom.height, geom.width}, std::move(out), detail::any_grad(g, {x, w, b}), [=](Graph& gr) {
    const auto& gout = gr.grad(self);
    double* gin = gr.requires_grad(x) ? gr.grad(x).data() : nullptr;
    double* gw = gr.requires_grad(w) ? gr.grad(w).data() : nullptr;
    double* gb = gr.requires_grad(b) ? gr.grad(b).data() : nullptr;
    kernels::conv2d_backward(geom, gr.value(x).data(), gr.value(w).data(), gout.data(), gin, gw, gb);
  });
}

// Normalizes each sample over all of its elements, then applies a
// per-channel affine map. x: (C, ...), gamma/beta: (C).
inline Id layer_norm(Graph& g, Id x, Id gamma, Id beta, double eps = 1e-5) {
  const auto& xs = g.shape(x);
  const auto& v = g.value(x);
  const std::size_t n = v.size();
  const int channels = xs[0];
  const std::size_t per = n / static_cast<std::size_t>(channels);
  double mean = 0.0;
  for (double e : v) mean += e;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double e : v) var += (e - mean) * (e - mean);
  var /= static_cast<double>(n);
  const double inv = 1.0 / std::sqrt(var + eps);
  std::vector<double> xhat(n), out(n);
  const auto& gm = g.value(gamma);
  const auto& bt = g.value(beta);
  for (int c = 0; c < channels; ++c)
    for (std::size_t i = 0; i < per; ++i) {
      const std::size_t j = static_cast<std::size_t>(c) * per + i;
      xhat[j] = (v[j] - mean) * inv;
      out[j] = xhat[j] * gm[static_cast<std::size_t>(c)] + bt[static_cast<std::size_t>(c)];
    }
  Id self = static_cast<Id>(g.size());
  auto xh = std::make_shared<std::vector<double>>(std::move(xhat));
  return g.op(xs, std::move(out), detail::any_grad(g, {x, gamma, beta}), [=](Graph& gr) {
    const auto& gout = gr.grad(self);
    const auto& gm2 = gr.value(gamma);
    if (gr.requires_grad(gamma) || gr.requires_grad(beta)) {
      auto& gg = gr.grad(gamma);
      auto& gb = gr.grad(beta);
      for (int c = 0; c < channels; ++c)
        for (std::size_t i = 0; i < per; ++i) {
          const std::size_t j = static_cast<std::size_t>(c) * per + i;
          gg[static_cast<std::size_t>(c)] += gout[j] * (*xh)[j];
          gb[static_cast<std::size_t>(c)] += gout[j];
        }
    }
    if (gr.requires_grad(x)) {
      double sum_g = 0.0, sum_gx = 0.0;
      std::vector<double> gxh(n);
      for (int c = 0; c < channels; ++c)
        for (std::size_t i = 0; i < per; ++i) {
          const std::size_t j = static_cast<std::size_t>(c) * per + i;
          gxh[j] = gout[j] * gm2[static_cast<std::size_t>(c)];
          sum_g += gxh[j];
          sum_gx += gxh[j] * (*xh)[j];
        }
      auto& gin = gr.grad(x);
      const double nn_ = static_cast<double>(n);
      for (std::size_t j = 0; j < n; ++j) gin[j] += inv * (gxh[j] - sum_g / nn_ - (*xh)[j] * sum_gx / nn_);
    }
  });
}

namespace detail {
template <class F, class DF>
Id unary(Graph& g, Id x, F f, DF df_from_out_in) {
  const auto& v = g.value(x);
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = f(v[i]);
  Id self = static_cast<Id>(g.size());
  return g.op(g.shape(x), std::move(out), g.requires_grad(x), [=](Graph& gr) {
    const auto& gout = gr.grad(self);
    const auto& in = gr.value(x);
    const auto& o = gr.value(self);
    auto& gin = gr.grad(x);
    for (std::size_t i = 0; i < gin.size(); ++i) gin[i] += gout[i] * df_from_out_in(o[i], in[i]);
  });
}
}  // namespace detail

inline Id relu(Graph& g, Id x) {
  return detail::unary(g, x, [](double v) { return v > 0 ? v : 0.0; }, [](double, double in) { return in > 0 ? 1.0 : 0.0; });
}
inline Id leaky_relu(Graph& g, Id x, double slope = 0.2) {
  return detail::unary(
      g, x, [slope](double v) { return v > 0 ? v : slope * v; }, [slope](double, double in) { return in > 0 ? 1.0 : slope; });
}
inline Id tanh(Graph& g, Id x) {
  return detail::unary(g, x, [](double v) { return std::tanh(v); }, [](double o, double) { return 1.0 - o * o; });
}
inline Id sigmoid(Graph& g, Id x) {
  return detail::unary(
      g, x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); }, [](double o, double) { return o * (1.0 - o); });
}

// Natural log of max(x, lo); the clamped region has zero gradient.
inline Id log_clamped(Graph& g, Id x, double lo) {
  return detail::unary(
      g, x, [lo](double v) { return std::log(std::max(v, lo)); }, [lo](double, double in) { return in >= lo ? 1.0 / in : 0.0; });
}
inline Id affine(Graph& g, Id x, double scale, double shift) {
  return detail::unary(g, x, [=](double v) { return scale * v + shift; }, [=](double, double) { return scale; });
}
inline Id hinge(Graph& g, Id x) { return relu(g, x); }

// Elementwise sum of equally shaped tensors.
inline Id add(Graph& g, Id a, Id b) {
  if (g.shape(a) != g.shape(b)) throw invariant_violation("add: shape mismatch " + shape_str(g.shape(a)) + " vs " + shape_str(g.shape(b)));
  std::vector<double> out = g.value(a);
  const auto& bv = g.value(b);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  Id self = static_cast<Id>(g.size());
  return g.op(g.shape(a), std::move(out), detail::any_grad(g, {a, b}), [=](Graph& gr) {
    const auto& gout = gr.grad(self);
    for (Id in : {a, b})
      if (gr.requires_grad(in)) {
        auto& gi = gr.grad(in);
        for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += gout[i];
      }
  });
}

inline Id sub(Graph& g, Id a, Id b) { return add(g, a, affine(g, b, -1.0, 0.0)); }

// Weighted sum of scalars.
inline Id weighted_sum(Graph& g, const std::vector<Id>& xs, const std::vector<double>& w) {
  double total = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) total += w[i] * g.scalar(xs[i]);
  bool rg = false;
  for (Id x : xs) rg = rg || g.requires_grad(x);
  Id self = static_cast<Id>(g.size());
  return g.op({1}, {total}, rg, [=](Graph& gr) {
    const double go = gr.grad(self)[0];
    for (std::size_t i = 0; i < xs.size(); ++i)
      if (gr.requires_grad(xs[i])) gr.grad(xs[i])[0] += w[i] * go;
  });
}

// Concatenates along the leading (channel) axis; trailing dims must match.
inline Id concat_channels(Graph& g, Id a, Id b) {
  const auto& as = g.shape(a);
  const auto& bs = g.shape(b);
  if (as.size() != bs.size() || !std::equal(as.begin() + 1, as.end(), bs.begin() + 1))
    throw invariant_violation("concat_channels: incompatible " + shape_str(as) + " and " + shape_str(bs));
  std::vector<double> out = g.value(a);
  const auto& bv = g.value(b);
  out.insert(out.end(), bv.begin(), bv.end());
  Shape s = as;
  s[0] += bs[0];
  const std::size_t na = g.value(a).size();
  Id self = static_cast<Id>(g.size());
  return g.op(s, std::move(out), detail::any_grad(g, {a, b}), [=](Graph& gr) {
    const auto& gout = gr.grad(self);
    if (gr.requires_grad(a)) {
      auto& ga = gr.grad(a);
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += gout[i];
    }
    if (gr.requires_grad(b)) {
      auto& gb = gr.grad(b);
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += gout[na + i];
    }
  });
}

// Nearest-neighbour resize of (C, L) to (C, target).
inline Id upsample_to(Graph& g, Id x, int target) {
  detail::expect_rank(g, x, 2, "upsample_to");
  const int c = g.shape(x)[0], l = g.shape(x)[1];
  std::vector<int> src(static_cast<std::size_t>(target));
  for (int t = 0; t < target; ++t)
    src[static_cast<std::size_t>(t)] = static_cast<int>(static_cast<long long>(t) * l / target);
  const auto& v = g.value(x);
  std::vector<double> out(static_cast<std::size_t>(c) * target);
  for (int ch = 0; ch < c; ++ch)
    for (int t = 0; t < target; ++t)
      out[static_cast<std::size_t>(ch) * target + t] = v[static_cast<std::size_t>(ch) * l + src[static_cast<std::size_t>(t)]];
  Id self = static_cast<Id>(g.size());
  return g.op({c, target}, std::move(out), g.requires_grad(x), [=](Graph& gr) {
    const auto& gout = gr.grad(self);
    auto& gin = gr.grad(x);
    for (int ch = 0; ch < c; ++ch)
      for (int t = 0; t < target; ++t)
        gin[static_cast<std::size_t>(ch) * l + src[static_cast<std::size_t>(t)]] += gout[static_cast<std::size_t>(ch) * target + t];
  });
}

// Non-overlapping average pooling along L, dropping any remainder.
inline Id avg_pool1d(Graph& g, Id x, int k = 2) {
  detail::expect_rank(g, x, 2, "avg_pool1d");
  const int c = g.shape(x)[0], l = g.shape(x)[1], lo = l / k;
  if (lo <= 0) throw invariant_violation("avg_pool1d: input too short");
  const auto& v = g.value(x);
  std::vector<double> out(static_cast<std::size_t>(c) * lo, 0.0);
  const double inv = 1.0 / k;
  for (int ch = 0; ch < c; ++ch)
    for (int t = 0; t < lo; ++t) {
      double acc = 0.0;
      for (int j = 0; j < k; ++j) acc += v[static_cast<std::size_t>(ch) * l + t * k + j];
      out[static_cast<std::size_t>(ch) * lo + t] = acc * inv;
    }
  Id self = static_cast<Id>(g.size());
  return g.op({c, lo}, std::move(out), g.requires_grad(x), [=](Graph& gr) {
    const auto& gout = gr.grad(self);
    auto& gin = gr.grad(x);
    for (int ch = 0; ch < c; ++ch)
      for (int t = 0; t < lo; ++t)
        for (int j = 0; j < k; ++j) gin[static_cast<std::size_t>(ch) * l + t * k + j] += gout[static_cast<std::size_t>(ch) * lo + t] * inv;
  });
}

inline Id avg_pool2d(Graph& g, Id x, int k = 2) {
  detail::expect_rank(g, x, 3, "avg_pool2d");
  const int c = g.shape(x)[0], h = g.shape(x)[1], w = g.shape(x)[2];
  const int ho = h / k, wo = w / k;
  if (ho <= 0 || wo <= 0) throw invariant_violation("avg_pool2d: input too small");
  const auto& v = g.value(x);
  std::vector<double> out(static_cast<std::size_t>(c) * ho * wo, 0.0);
  const double inv = 1.0 / (k * k);
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < ho; ++y)
      for (int xx = 0; xx < wo; ++xx) {
        double acc = 0.0;
        for (int dy = 0; dy < k; ++dy)
          for (int dx = 0; dx < k; ++dx) acc += v[(static_cast<std::size_t>(ch) * h + y * k + dy) * w + xx * k + dx];
        out[(static_cast<std::size_t>(ch) * ho + y) * wo + xx] = acc * inv;
      }
  Id self = static_cast<Id>(g.size());
  return g.op({c, ho, wo}, std::move(out), g.requires_grad(x), [=](Graph& gr) {
    const auto& gout = gr.grad(self);
    auto& gin = gr.grad(x);
    for (int ch = 0; ch < c; ++ch)
      for (int y = 0; y < ho; ++y)
        for (int xx = 0; xx < wo; ++xx) {
          const double gv = gout[(static_cast<std::size_t>(ch) * ho + y) * wo + xx] * inv;
          for (int dy = 0; dy < k; ++dy)
            for (int dx = 0; dx < k; ++dx) gin[(static_cast<std::size_t>(ch) * h + y * k + dy) * w + xx * k + dx] += gv;
        }
  });
}

// (C, ...) -> (C * segments): mean of each channel over `segments` equal
// slices of the flattened trailing axes. segments == 1 is global pooling.
inline Id segment_avg_pool(Graph& g, Id x, int segments = 1) {
  const int c = g.shape(x)[0];
  const std::size_t per = g.value(x).size() / static_cast<std::size_t>(c);
  if (segments < 1 || per < static_cast<std::size_t>(segments)) throw invariant_violation("segment_avg_pool: bad segment count");
  const auto& v = g.value(x);
  std::vector<std::size_t> bounds(static_cast<std::size_t>(segments) + 1);
  for (int s = 0; s <= segments; ++s) bounds[static_cast<std::size_t>(s)] = per * static_cast<std::size_t>(s) / static_cast<std::size_t>(segments);
  std::vector<double> out(static_cast<std::size_t>(c) * segments);
  for (int ch = 0; ch < c; ++ch)
    for (int s = 0; s < segments; ++s) {
      double acc = 0.0;
      for (std::size_t i = bounds[static_cast<std::size_t>(s)]; i < bounds[static_cast<std::size_t>(s) + 1]; ++i) acc += v[static_cast<std::size_t>(ch) * per + i];
      out[static_cast<std::size_t>(ch) * segments + s] = acc / static_cast<double>(bounds[static_cast<std::size_t>(s) + 1] - bounds[static_cast<std::size_t>(s)]);
    }
  Id self = static_cast<Id>(g.size());
  return g.op({c * segments}, std::move(out), g.requires_grad(x), [=](Graph& gr) {
    const auto& gout = gr.grad(self);
    auto& gin = gr.grad(x);
    for (int ch = 0; ch < c; ++ch)
      for (int s = 0; s < segments; ++s) {
        const std::size_t lo = bounds[static_cast<std::size_t>(s)], hi = bounds[static_cast<std::size_t>(s) + 1];
        const double gv = gout[static_cast<std::size_t>(ch) * segments + s] / static_cast<double>(hi - lo);
        for (std::size_t i = lo; i < hi; ++i) gin[static_cast<std::size_t>(ch) * per + i] += gv;
      }
  });
}

inline Id global_avg_pool(Graph& g, Id x) { return segment_avg_pool(g, x, 1); }

// x: (In), w: (Out, In), b: (Out) -> (Out)
inline Id linear(Graph& g, Id x, Id w, Id b) {
  const int in = static_cast<int>(g.value(x).size());
  const int out_n = g.shape(w)[0];
  if (g.shape(w)[1] != in) throw invariant_violation("linear: expected input " + std::to_string(g.shape(w)[1]) + ", got " + std::to_string(in));
  const auto& xv = g.value(x);
  const auto& wv = g.value(w);
  std::vector<double> out(g.value(b));
  for (int o = 0; o < out_n; ++o) {
    double acc = 0.0;
    for (int i = 0; i < in; ++i) acc += wv[static_cast<std::size_t>(o) * in + i] * xv[static_cast<std::size_t>(i)];
    out[static_cast<std::size_t>(o)] += acc;
  }
  Id self = static_cast<Id>(g.size());
  return g.op({out_n}, std::move(out), detail::any_grad(g, {x, w, b}), [=](Graph& gr) {
    const auto& gout = gr.grad(self);
    const auto& xv2 = gr.value(x);
    const auto& wv2 = gr.value(w);
    if (gr.requires_grad(b)) {
      auto& gb = gr.grad(b);
      for (int o = 0; o < out_n; ++o) gb[static_cast<std::size_t>(o)] += gout[static_cast<std::size_t>(o)];
    }
    if (gr.requires_grad(w)) {
      auto& gw = gr.grad(w);
      for (int o = 0; o < out_n; ++o)
        for (int i = 0; i < in; ++i) gw[static_cast<std::size_t>(o) * in + i] += gout[static_cast<std::size_t>(o)] * xv2[static_cast<std::size_t>(i)];
    }
    if (gr.requires_grad(x)) {
      auto& gx = gr.grad(x);
      for (int o = 0; o < out_n; ++o)
        for (int i = 0; i < in; ++i) gx[static_cast<std::size_t>(i)] += gout[static_cast<std::size_t>(o)] * wv2[static_cast<std::size_t>(o) * in + i];
    }
  });
}

inline Id reshape(Graph& g, Id x, Shape s) {
  if (numel(s) != g.value(x).size()) throw invariant_violation("reshape: element count mismatch");
  Id self = static_cast<Id>(g.size());
  return g.op(std::move(s), g.value(x), g.requires_grad(x), [=](Graph& gr) {
    const auto& gout = gr.grad(self);
    auto& gin = gr.grad(x);
    for (std::size_t i = 0; i < gin.size(); ++i) gin[i] += gout[i];
  });
}

inline Id pick(Graph& g, Id x, int index) {
  Id self = static_cast<Id>(g.size());
  return g.op({1}, {g.value(x).at(static_cast<std::size_t>(index))}, g.requires_grad(x),
              [=](Graph& gr) { gr.grad(x)[static_cast<std::size_t>(index)] += gr.grad(self)[0]; });
}

inline Id softmax(Graph& g, Id logits) {
  const auto& z = g.value(logits);
  const double mx = *std::max_element(z.begin(), z.end());
  std::vector<double> p(z.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) sum += (p[i] = std::exp(z[i] - mx));
  for (double& e : p) e /= sum;
  Id self = static_cast<Id>(g.size());
  return g.op(g.shape(logits), std::move(p), g.requires_grad(logits), [=](Graph& gr) {
    const auto& gout = gr.grad(self);
    const auto& pv = gr.value(self);
    double dot = 0.0;
    for (std::size_t i = 0; i < pv.size(); ++i) dot += gout[i] * pv[i];
    auto& gin = gr.grad(logits);
    for (std::size_t i = 0; i < pv.size(); ++i) gin[i] += pv[i] * (gout[i] - dot);
  });
}

// -log softmax(logits)[target], computed stably.
inline Id softmax_cross_entropy(Graph& g, Id logits, int target) {
  const auto& z = g.value(logits);
  const double mx = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double v : z) sum += std::exp(v - mx);
  const double lse = mx + std::log(sum);
  const double loss = lse - z.at(static_cast<std::size_t>(target));
  Id self = static_cast<Id>(g.size());
  return g.op({1}, {loss}, g.requires_grad(logits), [=](Graph& gr) {
    const double go = gr.grad(self)[0];
    const auto& zz = gr.value(logits);
    auto& gin = gr.grad(logits);
    for (std::size_t i = 0; i < zz.size(); ++i) {
      const double p = std::exp(zz[i] - lse);
      gin[i] += go * (p - (static_cast<int>(i) == target ? 1.0 : 0.0));
    }
  });
}

inline Id mean_abs_diff(Graph& g, Id a, Id b) {
  const auto& av = g.value(a);
  const auto& bv = g.value(b);
  if (av.size() != bv.size()) throw invalid_input("mean_abs_diff: length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) acc += std::abs(av[i] - bv[i]);
  const double n = static_cast<double>(av.size());
  Id self = static_cast<Id>(g.size());
  return g.op({1}, {acc / n}, detail::any_grad(g, {a, b}), [=](Graph& gr) {
    const double go = gr.grad(self)[0] / n;
    const auto& a2 = gr.value(a);
    const auto& b2 = gr.value(b);
    auto sgn = [](double d) { return d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0); };
    if (gr.requires_grad(a)) {
      auto& ga = gr.grad(a);
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += go * sgn(a2[i] - b2[i]);
    }
    if (gr.requires_grad(b)) {
      auto& gb = gr.grad(b);
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= go * sgn(a2[i] - b2[i]);
    }
  });
}

// ||a - b||^2
inline Id squared_distance(Graph& g, Id a, Id b) {
  const auto& av = g.value(a);
  const auto& bv = g.value(b);
  if (av.size() != bv.size()) throw invalid_input("squared_distance: dimension mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) acc += (av[i] - bv[i]) * (av[i] - bv[i]);
  Id self = static_cast<Id>(g.size());
  return g.op({1}, {acc}, detail::any_grad(g, {a, b}), [=](Graph& gr) {
    const double go = gr.grad(self)[0];
    const auto& a2 = gr.value(a);
    const auto& b2 = gr.value(b);
    if (gr.requires_grad(a)) {
      auto& ga = gr.grad(a);
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += 2.0 * go * (a2[i] - b2[i]);
    }
    if (gr.requires_grad(b)) {
      auto& gb = gr.grad(b);
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= 2.0 * go * (a2[i] - b2[i]);
    }
  });
}

inline Id euclidean_distance(Graph& g, Id a, Id b) {
  const Id sq = squared_distance(g, a, b);
  return detail::unary(
      g, sq, [](double v) { return std::sqrt(v); }, [](double o, double) { return o > 0 ? 0.5 / o : 0.0; });
}

// Waveform (1, T) or (T) -> log-mel (1, n_mels, frames).
inline Id log_mel(Graph& g, Id x, std::shared_ptr<const dsp::MelFrontEnd> fe) {
  auto trace = std::make_shared<dsp::MelFrontEnd::Trace>();
  auto spec = fe->compute(g.value(x), g.requires_grad(x) ? trace.get() : nullptr);
  Id self = static_cast<Id>(g.size());
  return g.op({1, spec.n_mels, spec.frames}, std::move(spec.bins), g.requires_grad(x), [=](Graph& gr) {
    fe->backward(*trace, gr.grad(self), gr.grad(x));
  });
}

}  // namespace shield::nn
