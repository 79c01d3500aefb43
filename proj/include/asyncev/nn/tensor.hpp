#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "asyncev/errors.hpp"

namespace asyncev::nn {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>{});
}

inline std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += 'x';
    out += std::to_string(s[i]);
  }
  return out + "]";
}

/*
 * One vertex of the define-by-run tape.
 *
 * A node owns its forward value, the gradient accumulated into it during the
 * backward sweep, and a closure that pushes that gradient into its parents.
 * Nodes that do not require gradients keep no parents, so constant subgraphs
 * are freed as soon as their values are consumed.
 */
struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  std::vector<double>& ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    return grad;
  }
};

class Tensor {
public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    const auto n = numel(shape);
    return from(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
  }

  static Tensor filled(Shape shape, double v, bool requires_grad = false) {
    const auto n = numel(shape);
    return from(std::move(shape), std::vector<double>(n, v), requires_grad);
  }

  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false) {
    for (auto d : shape) {
      if (d == 0) throw ShapeError("tensor dimensions must be positive: " + shape_str(shape));
    }
    if (values.size() != numel(shape)) {
      throw ShapeError("value count " + std::to_string(values.size()) + " does not match shape " + shape_str(shape));
    }
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->value = std::move(values);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
  }

  static Tensor scalar(double v, bool requires_grad = false) { return from({1}, {v}, requires_grad); }

  /// Result of an op. Parents are kept only when a gradient has to flow.
  static Tensor make_result(Shape shape, std::vector<double> values, std::vector<Tensor> inputs,
                            std::function<void(Node&)> backward) {
    Tensor out = from(std::move(shape), std::move(values), false);
    bool any = false;
    for (const auto& t : inputs) any = any || t.requires_grad();
    if (any) {
      out.node_->requires_grad = true;
      out.node_->parents.reserve(inputs.size());
      for (auto& t : inputs) out.node_->parents.push_back(t.node_);
      out.node_->backward = std::move(backward);
    }
    return out;
  }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t size() const { return node_->value.size(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }

  std::span<const double> values() const { return node_->value; }
  double operator[](std::size_t i) const { return node_->value[i]; }
  double item() const {
    if (size() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape()));
    return node_->value[0];
  }

  /// Accumulated gradient; empty span until backward() reached this tensor.
  std::span<const double> grad() const { return node_->grad; }
  bool has_grad() const { return node_->grad.size() == node_->value.size(); }

  Node& node() const { return *node_; }
  const std::shared_ptr<Node>& node_ptr() const { return node_; }

  /// Copy of the value with no history.
  Tensor detach() const { return from(shape(), node_->value, false); }

  /// Reverse sweep from a scalar, seeding d(self)/d(self) = 1.
  void backward() const {
    if (size() != 1) throw ShapeError("backward() needs a scalar, got " + shape_str(shape()));
    backward_with(std::vector<double>{1.0});
  }

  void backward_with(std::vector<double> seed) const {
    if (seed.size() != size()) throw ShapeError("backward seed size mismatch");
    if (!requires_grad()) return;

    // iterative post-order DFS; unrolled recurrences make the graph deep
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
    visited.insert(node_.get());
    while (!stack.empty()) {
      auto& [n, next] = stack.back();
      if (next < n->parents.size()) {
        Node* p = n->parents[next++].get();
        if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
      } else {
        order.push_back(n);
        stack.pop_back();
      }
    }

    auto& g = node_->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += seed[i];
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      Node* n = *it;
      if (n->backward && n->grad.size() == n->value.size()) n->backward(*n);
    }
  }

private:
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  std::shared_ptr<Node> node_;
};

}  // namespace asyncev::nn
