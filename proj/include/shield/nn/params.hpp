#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "shield/nn/graph.hpp"
#include "shield/rng.hpp"

namespace shield::nn {

struct Slot {
  std::size_t offset = 0;
  Shape shape;
  std::size_t size() const { return numel(shape); }
};

enum class Init { zeros, ones, he_uniform };

// Describes how a flat parameter vector is carved into tensors, and how each
// tensor is initialized. Layouts are pure functions of an architecture config.
class Layout {
 public:
  Slot add(Shape shape, Init init, int fan_in = 0) {
    Slot s{total_, std::move(shape)};
    total_ += s.size();
    entries_.push_back({s, init, fan_in});
    return s;
  }

  std::size_t total() const { return total_; }

  std::vector<double> initialize(std::uint64_t seed) const {
    std::vector<double> p(total_, 0.0);
    Rng rng(seed);
    for (const auto& e : entries_) {
      double* dst = p.data() + e.slot.offset;
      switch (e.init) {
        case Init::zeros: break;
        case Init::ones: std::fill(dst, dst + e.slot.size(), 1.0); break;
        case Init::he_uniform: {
          const double bound = std::sqrt(6.0 / std::max(1, e.fan_in));
          for (std::size_t i = 0; i < e.slot.size(); ++i) dst[i] = rng.uniform(-bound, bound);
          break;
        }
      }
    }
    return p;
  }

 private:
  struct Entry {
    Slot slot;
    Init init;
    int fan_in;
  };
  std::vector<Entry> entries_;
  std::size_t total_ = 0;
};

struct ConvSlots {
  Slot weight, bias;
  int stride = 1, pad = 0, dilation = 1;
};
struct NormSlots {
  Slot gamma, beta;
};
struct LinearSlots {
  Slot weight, bias;
};

inline ConvSlots add_conv1d(Layout& l, int in_ch, int out_ch, int kernel, int stride, int pad, int dilation = 1,
                            Init init = Init::he_uniform) {
  ConvSlots c;
  c.weight = l.add({out_ch, in_ch, kernel}, init, in_ch * kernel);
  c.bias = l.add({out_ch}, Init::zeros);
  c.stride = stride;
  c.pad = pad;
  c.dilation = dilation;
  return c;
}

inline ConvSlots add_conv2d(Layout& l, int in_ch, int out_ch, int k) {
  ConvSlots c;
  c.weight = l.add({out_ch, in_ch, k, k}, Init::he_uniform, in_ch * k * k);
  c.bias = l.add({out_ch}, Init::zeros);
  return c;
}

inline NormSlots add_norm(Layout& l, int channels) {
  return {l.add({channels}, Init::ones), l.add({channels}, Init::zeros)};
}

inline LinearSlots add_linear(Layout& l, int in, int out, Init init = Init::he_uniform) {
  return {l.add({out, in}, init, in), l.add({out}, Init::zeros)};
}

// Places a model's parameters into a graph: trainable when a gradient buffer
// is supplied, frozen constants otherwise.
class Binding {
 public:
  Binding(Graph& g, std::span<const double> params, std::span<double> grads = {}) : g_(g), params_(params), grads_(grads) {
    if (!grads_.empty() && grads_.size() != params_.size()) throw invariant_violation("Binding: grad buffer size mismatch");
  }

  Graph& graph() { return g_; }
  bool trainable() const { return !grads_.empty(); }

  Graph::Id operator()(const Slot& s) {
    if (s.offset + s.size() > params_.size()) throw invariant_violation("Binding: slot outside parameter vector");
    const auto value = params_.subspan(s.offset, s.size());
    const auto sink = grads_.empty() ? std::span<double>{} : grads_.subspan(s.offset, s.size());
    return g_.parameter(value, s.shape, sink);
  }

 private:
  Graph& g_;
  std::span<const double> params_;
  std::span<double> grads_;
};

}  // namespace shield::nn
