#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "asyncev/nn/tensor.hpp"

namespace asyncev::nn {

/*
 * Records which side of its kink every ReLU input falls on while active.
 * Finite-difference checks compare the fingerprint of the +h and -h forward
 * passes: if it changed, the two evaluations straddle a non-differentiable
 * point and the central difference is meaningless there.
 */
struct KinkProbe {
  bool active = false;
  std::uint64_t fingerprint = 1469598103934665603ull;

  void reset() { fingerprint = 1469598103934665603ull; }
  void mix(std::uint64_t bit) { fingerprint = (fingerprint ^ bit) * 1099511628211ull; }

  static KinkProbe& current() {
    thread_local KinkProbe probe;
    return probe;
  }
};

namespace detail {

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

inline void require_rank(const Tensor& a, std::size_t r, const char* op) {
  if (a.rank() != r) throw ShapeError(std::string(op) + ": expected rank " + std::to_string(r) + ", got " + shape_str(a.shape()));
}

/// Gradient buffer of parent i, or nullptr when it does not need one.
inline std::vector<double>* parent_grad(Node& self, std::size_t i) {
  auto& p = *self.parents[i];
  return p.requires_grad ? &p.ensure_grad() : nullptr;
}

inline const std::vector<double>& parent_value(const Node& self, std::size_t i) { return self.parents[i]->value; }

template <typename Fwd, typename Deriv>
Tensor unary(const Tensor& a, Fwd fwd, Deriv deriv_from_output) {
  std::vector<double> out(a.size());
  const auto av = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(av[i]);
  return Tensor::make_result(a.shape(), std::move(out), {a}, [deriv_from_output](Node& self) {
    auto* ga = parent_grad(self, 0);
    if (!ga) return;
    const auto& x = parent_value(self, 0);
    for (std::size_t i = 0; i < self.grad.size(); ++i) (*ga)[i] += self.grad[i] * deriv_from_output(x[i], self.value[i]);
  });
}

}  // namespace detail

inline Tensor add(const Tensor& a, const Tensor& b) {
  detail::require_same_shape(a, b, "add");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    for (std::size_t k = 0; k < 2; ++k) {
      if (auto* g = detail::parent_grad(self, k)) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i];
      }
    }
  });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  detail::require_same_shape(a, b, "sub");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    if (auto* g = detail::parent_grad(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i];
    }
    if (auto* g = detail::parent_grad(self, 1)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] -= self.grad[i];
    }
  });
}

/// Element-wise (Hadamard) product.
inline Tensor mul(const Tensor& a, const Tensor& b) {
  detail::require_same_shape(a, b, "mul");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    const auto& av = detail::parent_value(self, 0);
    const auto& bv = detail::parent_value(self, 1);
    if (auto* g = detail::parent_grad(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i] * bv[i];
    }
    if (auto* g = detail::parent_grad(self, 1)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i] * av[i];
    }
  });
}

inline Tensor scale(const Tensor& a, double s) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * s;
  return Tensor::make_result(a.shape(), std::move(out), {a}, [s](Node& self) {
    if (auto* g = detail::parent_grad(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i] * s;
    }
  });
}

inline Tensor add_scalar(const Tensor& a, double s) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + s;
  return Tensor::make_result(a.shape(), std::move(out), {a}, [](Node& self) {
    if (auto* g = detail::parent_grad(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i];
    }
  });
}

/// 1 - a
inline Tensor one_minus(const Tensor& a) { return add_scalar(scale(a, -1.0), 1.0); }

inline Tensor sigmoid(const Tensor& a) {
  return detail::unary(
      a,
      [](double x) { return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); },
      [](double, double y) { return y * (1.0 - y); });
}

inline Tensor tanh(const Tensor& a) {
  return detail::unary(a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

inline Tensor relu(const Tensor& a) {
  auto& probe = KinkProbe::current();
  if (probe.active) {
    for (double v : a.values()) probe.mix(v > 0.0 ? 0x9e3779b97f4a7c15ull : 0x7f4a7c159e3779b9ull);
  }
  return detail::unary(a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

/// Natural log; inputs must be positive.
inline Tensor log(const Tensor& a) {
  for (double v : a.values()) {
    if (!(v > 0.0)) throw NumericalError("log: non-positive input");
  }
  return detail::unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

inline Tensor square(const Tensor& a) {
  return detail::unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

inline Tensor reshape(const Tensor& a, Shape shape) {
  if (numel(shape) != a.size()) throw ShapeError("reshape: " + shape_str(a.shape()) + " -> " + shape_str(shape));
  std::vector<double> out(a.values().begin(), a.values().end());
  return Tensor::make_result(std::move(shape), std::move(out), {a}, [](Node& self) {
    if (auto* g = detail::parent_grad(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i];
    }
  });
}

inline Tensor flatten(const Tensor& a) { return reshape(a, {a.size()}); }

/// Concatenation of flattened inputs into one vector.
inline Tensor concat(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat of nothing");
  std::vector<double> out;
  std::vector<std::size_t> offsets;
  for (const auto& p : parts) {
    offsets.push_back(out.size());
    out.insert(out.end(), p.values().begin(), p.values().end());
  }
  const std::size_t n = out.size();
  return Tensor::make_result({n}, std::move(out), parts, [offsets](Node& self) {
    for (std::size_t k = 0; k < self.parents.size(); ++k) {
      if (auto* g = detail::parent_grad(self, k)) {
        for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[offsets[k] + i];
      }
    }
  });
}

inline Tensor select(const Tensor& a, std::size_t index) {
  if (index >= a.size()) throw ShapeError("select: index out of range");
  return Tensor::make_result({1}, {a[index]}, {a}, [index](Node& self) {
    if (auto* g = detail::parent_grad(self, 0)) (*g)[index] += self.grad[0];
  });
}

inline Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.values()) s += v;
  return Tensor::make_result({1}, {s}, {a}, [](Node& self) {
    if (auto* g = detail::parent_grad(self, 0)) {
      for (auto& v : *g) v += self.grad[0];
    }
  });
}

inline Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.size())); }

/// [n x k] @ [k x m] -> [n x m]
inline Tensor matmul(const Tensor& a, const Tensor& b) {
  detail::require_rank(a, 2, "matmul");
  detail::require_rank(b, 2, "matmul");
  const std::size_t n = a.dim(0), k = a.dim(1), m = b.dim(1);
  if (b.dim(0) != k) throw ShapeError("matmul: inner dimensions " + shape_str(a.shape()) + " @ " + shape_str(b.shape()));
  std::vector<double> out(n * m, 0.0);
  const auto av = a.values();
  const auto bv = b.values();
  for (std::size_t i = 0; i < n; ++i) {
    double* orow = &out[i * m];
    for (std::size_t j = 0; j < k; ++j) {
      const double aij = av[i * k + j];
      if (aij == 0.0) continue;
      const double* brow = &bv[j * m];
      for (std::size_t c = 0; c < m; ++c) orow[c] += aij * brow[c];
    }
  }
  return Tensor::make_result({n, m}, std::move(out), {a, b}, [n, k, m](Node& self) {
    const auto& av = detail::parent_value(self, 0);
    const auto& bv = detail::parent_value(self, 1);
    const auto& go = self.grad;
    if (auto* ga = detail::parent_grad(self, 0)) {
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
          double s = 0.0;
          for (std::size_t c = 0; c < m; ++c) s += go[i * m + c] * bv[j * m + c];
          (*ga)[i * k + j] += s;
        }
      }
    }
    if (auto* gb = detail::parent_grad(self, 1)) {
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
          const double aij = av[i * k + j];
          if (aij == 0.0) continue;
          for (std::size_t c = 0; c < m; ++c) (*gb)[j * m + c] += aij * go[i * m + c];
        }
      }
    }
  });
}

/// x [n x m] + b [m] broadcast over rows.
inline Tensor add_row_vector(const Tensor& x, const Tensor& b) {
  detail::require_rank(x, 2, "add_row_vector");
  const std::size_t n = x.dim(0), m = x.dim(1);
  if (b.size() != m) throw ShapeError("add_row_vector: bias length " + std::to_string(b.size()) + " vs " + shape_str(x.shape()));
  std::vector<double> out(x.values().begin(), x.values().end());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) out[i * m + j] += b[j];
  }
  return Tensor::make_result(x.shape(), std::move(out), {x, b}, [n, m](Node& self) {
    if (auto* gx = detail::parent_grad(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*gx)[i] += self.grad[i];
    }
    if (auto* gb = detail::parent_grad(self, 1)) {
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) (*gb)[j] += self.grad[i * m + j];
      }
    }
  });
}

/// Fully connected layer: x [n x d_in] @ W [d_in x d_out] (+ b [d_out]).
inline Tensor linear(const Tensor& x, const Tensor& W, const std::optional<Tensor>& b = std::nullopt) {
  auto y = matmul(x, W);
  return b ? add_row_vector(y, *b) : y;
}

inline Tensor transpose(const Tensor& a) {
  detail::require_rank(a, 2, "transpose");
  const std::size_t n = a.dim(0), m = a.dim(1);
  std::vector<double> out(n * m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) out[j * n + i] = a[i * m + j];
  }
  return Tensor::make_result({m, n}, std::move(out), {a}, [n, m](Node& self) {
    if (auto* g = detail::parent_grad(self, 0)) {
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) (*g)[i * m + j] += self.grad[j * n + i];
      }
    }
  });
}

/// Softmax over all entries of `a` (treated as one vector), max-shifted.
inline Tensor softmax(const Tensor& a) {
  const auto av = a.values();
  for (double v : av) {
    if (std::isnan(v)) throw NumericalError("softmax: NaN input");
  }
  const double mx = *std::max_element(av.begin(), av.end());
  std::vector<double> out(av.size());
  double z = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) z += out[i] = std::exp(av[i] - mx);
  for (auto& v : out) v /= z;
  return Tensor::make_result(a.shape(), std::move(out), {a}, [](Node& self) {
    auto* g = detail::parent_grad(self, 0);
    if (!g) return;
    const auto& y = self.value;
    double dot = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) dot += y[i] * self.grad[i];
    for (std::size_t i = 0; i < y.size(); ++i) (*g)[i] += y[i] * (self.grad[i] - dot);
  });
}

/// Row i of x [n x m] multiplied by s[i].
inline Tensor mul_rows(const Tensor& x, const Tensor& s) {
  detail::require_rank(x, 2, "mul_rows");
  const std::size_t n = x.dim(0), m = x.dim(1);
  if (s.size() != n) throw ShapeError("mul_rows: scale length mismatch");
  std::vector<double> out(n * m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) out[i * m + j] = x[i * m + j] * s[i];
  }
  return Tensor::make_result(x.shape(), std::move(out), {x, s}, [n, m](Node& self) {
    const auto& xv = detail::parent_value(self, 0);
    const auto& sv = detail::parent_value(self, 1);
    auto* gx = detail::parent_grad(self, 0);
    auto* gs = detail::parent_grad(self, 1);
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        const double go = self.grad[i * m + j];
        if (gx) (*gx)[i * m + j] += go * sv[i];
        acc += go * xv[i * m + j];
      }
      if (gs) (*gs)[i] += acc;
    }
  });
}

/// Column j of x [n x m] multiplied by s[j].
inline Tensor mul_cols(const Tensor& x, const Tensor& s) {
  detail::require_rank(x, 2, "mul_cols");
  const std::size_t n = x.dim(0), m = x.dim(1);
  if (s.size() != m) throw ShapeError("mul_cols: scale length mismatch");
  std::vector<double> out(n * m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) out[i * m + j] = x[i * m + j] * s[j];
  }
  return Tensor::make_result(x.shape(), std::move(out), {x, s}, [n, m](Node& self) {
    const auto& xv = detail::parent_value(self, 0);
    const auto& sv = detail::parent_value(self, 1);
    auto* gx = detail::parent_grad(self, 0);
    auto* gs = detail::parent_grad(self, 1);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        const double go = self.grad[i * m + j];
        if (gx) (*gx)[i * m + j] += go * sv[j];
        if (gs) (*gs)[j] += go * xv[i * m + j];
      }
    }
  });
}

/// Mean of every row of x [n x m] -> [n].
inline Tensor row_mean(const Tensor& x) {
  detail::require_rank(x, 2, "row_mean");
  const std::size_t n = x.dim(0), m = x.dim(1);
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < m; ++j) s += x[i * m + j];
    out[i] = s / static_cast<double>(m);
  }
  return Tensor::make_result({n}, std::move(out), {x}, [n, m](Node& self) {
    if (auto* g = detail::parent_grad(self, 0)) {
      const double inv = 1.0 / static_cast<double>(m);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) (*g)[i * m + j] += self.grad[i] * inv;
      }
    }
  });
}

}  // namespace asyncev::nn
