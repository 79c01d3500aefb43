#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "asyncev/nn/tensor.hpp"

namespace asyncev::nn {

/// A named, shaped array of 64-bit values.
struct NamedArray {
  std::string name;
  Shape shape;
  std::vector<double> values;

  friend bool operator==(const NamedArray&, const NamedArray&) = default;
};

/// Ordered collection of named parameter arrays. Insertion order is kept so
/// checkpoints and reports list tensors the way the model declares them.
class ParamSet {
public:
  NamedArray& add(std::string name, Shape shape, std::vector<double> values) {
    if (index_.count(name)) throw InvalidInput("duplicate parameter name: " + name);
    if (values.size() != numel(shape)) throw ShapeError("parameter " + name + " value count mismatch");
    index_[name] = arrays_.size();
    arrays_.push_back({std::move(name), std::move(shape), std::move(values)});
    return arrays_.back();
  }

  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  const NamedArray& at(const std::string& name) const {
    const auto it = index_.find(name);
    if (it == index_.end()) throw InvalidInput("unknown parameter: " + name);
    return arrays_[it->second];
  }
  NamedArray& at(const std::string& name) { return const_cast<NamedArray&>(std::as_const(*this).at(name)); }

  const std::vector<NamedArray>& arrays() const { return arrays_; }
  std::vector<NamedArray>& arrays() { return arrays_; }
  std::size_t size() const { return arrays_.size(); }

  std::size_t total_values() const {
    std::size_t n = 0;
    for (const auto& a : arrays_) n += a.values.size();
    return n;
  }

  /// Same names, same shapes, all zeros.
  ParamSet zeros_like() const {
    ParamSet z;
    for (const auto& a : arrays_) z.add(a.name, a.shape, std::vector<double>(a.values.size(), 0.0));
    return z;
  }

  friend bool operator==(const ParamSet& a, const ParamSet& b) { return a.arrays_ == b.arrays_; }

private:
  std::vector<NamedArray> arrays_;
  std::map<std::string, std::size_t> index_;
};

/// Gradients share the ParamSet layout.
using GradSet = ParamSet;

/// Leaf tensors created from a ParamSet for one forward/backward pass.
class Binding {
public:
  explicit Binding(const ParamSet& params, bool requires_grad = true) {
    for (const auto& a : params.arrays()) tensors_.emplace(a.name, Tensor::from(a.shape, a.values, requires_grad));
  }

  const Tensor& operator[](const std::string& name) const {
    const auto it = tensors_.find(name);
    if (it == tensors_.end()) throw InvalidInput("parameter not bound: " + name);
    return it->second;
  }

  bool contains(const std::string& name) const { return tensors_.count(name) != 0; }

  /// Gradients accumulated by backward(); zero where none reached a leaf.
  GradSet gradients(const ParamSet& layout) const {
    GradSet g = layout.zeros_like();
    for (auto& a : g.arrays()) {
      const auto& t = (*this)[a.name];
      if (t.has_grad()) a.values.assign(t.grad().begin(), t.grad().end());
    }
    return g;
  }

private:
  std::map<std::string, Tensor> tensors_;
};

/// Adds `src` into `dst` entry by entry (layouts must agree).
inline void accumulate(GradSet& dst, const GradSet& src, double weight = 1.0) {
  if (dst.size() != src.size()) throw ShapeError("gradient sets differ in size");
  for (std::size_t k = 0; k < dst.size(); ++k) {
    auto& d = dst.arrays()[k];
    const auto& s = src.arrays()[k];
    if (d.name != s.name || d.values.size() != s.values.size()) throw ShapeError("gradient layout mismatch at " + d.name);
    for (std::size_t i = 0; i < d.values.size(); ++i) d.values[i] += weight * s.values[i];
  }
}

/// 64-bit Mersenne twister with a portable [0,1) mapping so initial weights
/// are identical across standard libraries.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * (1.0 / 9007199254740992.0); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Box-Muller; consumes two uniforms.
  double normal() {
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  std::uint64_t next() { return engine_(); }

  std::size_t index(std::size_t n) { return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n; }

private:
  std::mt19937_64 engine_;
};

/// Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)).
inline std::vector<double> glorot_uniform(Rng& rng, std::size_t count, std::size_t fan_in, std::size_t fan_out) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::vector<double> v(count);
  for (auto& x : v) x = rng.uniform(-limit, limit);
  return v;
}

}  // namespace asyncev::nn
