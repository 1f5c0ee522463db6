#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "shield/common.hpp"

namespace shield::nn {

using Shape = std::vector<int>;

inline std::size_t numel(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, [](std::size_t a, int d) { return a * static_cast<std::size_t>(d); });
}

inline std::string shape_str(const Shape& s) {
  std::string out = "(";
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
  return out + ")";
}

// Reverse-mode tape. Nodes are appended in evaluation order, so walking the
// tape backwards is a valid topological order for the backward pass.
class Graph {
 public:
  using Id = int;

  struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;  // allocated lazily
    bool requires_grad = false;
    std::function<void(Graph&)> backward;
    std::span<double> sink;  // parameter gradients are accumulated here
  };

  Id constant(std::vector<double> value, Shape shape) {
    if (value.size() != numel(shape)) throw invariant_violation("constant: value size != shape " + shape_str(shape));
    Node n;
    n.shape = std::move(shape);
    n.value = std::move(value);
    return push(std::move(n));
  }

  // A leaf whose gradient is wanted (e.g. a waveform being attacked).
  Id variable(std::vector<double> value, Shape shape) {
    const Id id = constant(std::move(value), std::move(shape));
    nodes_[static_cast<std::size_t>(id)].requires_grad = true;
    return id;
  }

  // A parameter leaf. With a non-empty sink the gradient is added into it by
  // backward(); otherwise it is a frozen constant.
  Id parameter(std::span<const double> value, Shape shape, std::span<double> sink) {
    Node n;
    n.shape = std::move(shape);
    n.value.assign(value.begin(), value.end());
    if (n.value.size() != numel(n.shape)) throw invariant_violation("parameter: size mismatch");
    n.requires_grad = !sink.empty();
    n.sink = sink;
    return push(std::move(n));
  }

  // Creates an op output. `backward` runs only if the output needs a gradient.
  Id op(Shape shape, std::vector<double> value, bool requires_grad, std::function<void(Graph&)> backward) {
    Node n;
    n.shape = std::move(shape);
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    if (requires_grad) n.backward = std::move(backward);
    return push(std::move(n));
  }

  const Node& node(Id id) const { return nodes_[static_cast<std::size_t>(id)]; }
  const std::vector<double>& value(Id id) const { return node(id).value; }
  const Shape& shape(Id id) const { return node(id).shape; }
  bool requires_grad(Id id) const { return node(id).requires_grad; }
  double scalar(Id id) const { return value(id).at(0); }

  std::vector<double>& grad(Id id) {
    auto& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
    return n.grad;
  }
  bool has_grad(Id id) const { return !node(id).grad.empty(); }

  // Seeds d(root)/d(root) = 1 for a scalar root and propagates.
  void backward(Id root) {
    if (value(root).size() != 1) throw invariant_violation("backward: root must be scalar");
    if (!requires_grad(root)) return;
    grad(root)[0] += 1.0;
    for (Id id = root; id >= 0; --id) {
      auto& n = nodes_[static_cast<std::size_t>(id)];
      if (n.grad.empty()) continue;
      if (n.backward) n.backward(*this);
      if (!n.sink.empty())
        for (std::size_t i = 0; i < n.grad.size(); ++i) n.sink[i] += n.grad[i];
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  Id push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<Id>(nodes_.size() - 1);
  }

  std::deque<Node> nodes_;
};

}  // namespace shield::nn
