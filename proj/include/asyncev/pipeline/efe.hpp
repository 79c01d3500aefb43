#pragma once

#include <vector>

#include "asyncev/event_model/event_matrix.hpp"
#include "asyncev/nn/ops.hpp"

namespace asyncev::pipeline {

using nn::Tensor;

/// Dense [w' x h'] tensor of an event matrix (row x holds image column x).
inline Tensor event_matrix_tensor(const EventMatrix& m) {
  std::vector<double> v(m.data.begin(), m.data.end());
  return Tensor::from({static_cast<std::size_t>(m.width), static_cast<std::size_t>(m.height)}, std::move(v));
}

/*
 * Event feature extraction: compresses one timestamp's event matrix M into a
 * q-vector T, attending over matrix rows with the recent angle history a.
 *
 *   L1 = M A1            [w' x q]
 *   L2 = L1 a            [w']
 *   L3 = M A2            [w' x q]
 *   v  = softmax(L2)     [w']
 *   T  = L3^T v          [q]   (each row of L3 weighted by v, then summed)
 *
 * M is mostly zeros, so the products run over its nonzero entries only.
 */
inline Tensor event_feature_extract(const Tensor& M, const Tensor& a, const Tensor& A1, const Tensor& A2) {
  nn::detail::require_rank(M, 2, "event_feature_extract M");
  nn::detail::require_rank(A1, 2, "event_feature_extract A1");
  const std::size_t w = M.dim(0), h = M.dim(1), q = A1.dim(1);
  if (A1.dim(0) != h || A2.shape() != A1.shape()) {
    throw ShapeError("event_feature_extract: A1/A2 must both be [" + std::to_string(h) + " x q], got " +
                     nn::shape_str(A1.shape()) + " and " + nn::shape_str(A2.shape()));
  }
  if (a.size() != q) throw ShapeError("event_feature_extract: angle history has " + std::to_string(a.size()) + " entries, q = " + std::to_string(q));

  struct Entry {
    std::size_t x, y;
    double m;
  };
  std::vector<Entry> nz;
  const auto mv = M.values();
  for (std::size_t x = 0; x < w; ++x) {
    for (std::size_t y = 0; y < h; ++y) {
      if (const double m = mv[x * h + y]; m != 0.0) nz.push_back({x, y, m});
    }
  }

  const auto a1 = A1.values();
  const auto a2 = A2.values();
  const auto av = a.values();
  std::vector<double> L1(w * q, 0.0), L3(w * q, 0.0), L2(w, 0.0);
  for (const auto& e : nz) {
    for (std::size_t j = 0; j < q; ++j) {
      L1[e.x * q + j] += e.m * a1[e.y * q + j];
      L3[e.x * q + j] += e.m * a2[e.y * q + j];
    }
  }
  for (std::size_t x = 0; x < w; ++x) {
    double s = 0.0;
    for (std::size_t j = 0; j < q; ++j) s += L1[x * q + j] * av[j];
    L2[x] = s;
  }
  double mx = L2[0];
  for (double v : L2) mx = std::max(mx, v);
  std::vector<double> v(w);
  double z = 0.0;
  for (std::size_t x = 0; x < w; ++x) z += v[x] = std::exp(L2[x] - mx);
  for (auto& e : v) e /= z;
  std::vector<double> T(q, 0.0);
  for (std::size_t x = 0; x < w; ++x) {
    for (std::size_t j = 0; j < q; ++j) T[j] += v[x] * L3[x * q + j];
  }

  return Tensor::make_result(
      {q}, std::move(T), {M, a, A1, A2},
      [w, h, q, nz = std::move(nz), L1 = std::move(L1), L3 = std::move(L3), v = std::move(v)](nn::Node& self) {
        const auto& gT = self.grad;
        const auto& av = nn::detail::parent_value(self, 1);
        const auto& a1 = nn::detail::parent_value(self, 2);
        const auto& a2 = nn::detail::parent_value(self, 3);
        std::vector<double> dv(w, 0.0);
        double vdv = 0.0;
        for (std::size_t x = 0; x < w; ++x) {
          double s = 0.0;
          for (std::size_t j = 0; j < q; ++j) s += L3[x * q + j] * gT[j];
          dv[x] = s;
          vdv += v[x] * s;
        }
        std::vector<double> dL2(w);
        for (std::size_t x = 0; x < w; ++x) dL2[x] = v[x] * (dv[x] - vdv);

        if (auto* gM = nn::detail::parent_grad(self, 0)) {
          // dM[x,y] = dL2[x] (A1[y,:] . a) + v[x] (A2[y,:] . gT)
          for (std::size_t y = 0; y < h; ++y) {
            double pa = 0.0, pg = 0.0;
            for (std::size_t j = 0; j < q; ++j) {
              pa += a1[y * q + j] * av[j];
              pg += a2[y * q + j] * gT[j];
            }
            for (std::size_t x = 0; x < w; ++x) (*gM)[x * h + y] += dL2[x] * pa + v[x] * pg;
          }
        }
        if (auto* ga = nn::detail::parent_grad(self, 1)) {
          for (std::size_t x = 0; x < w; ++x) {
            for (std::size_t j = 0; j < q; ++j) (*ga)[j] += dL2[x] * L1[x * q + j];
          }
        }
        auto* gA1 = nn::detail::parent_grad(self, 2);
        auto* gA2 = nn::detail::parent_grad(self, 3);
        for (const auto& e : nz) {
          if (gA1) {
            const double c = e.m * dL2[e.x];
            for (std::size_t j = 0; j < q; ++j) (*gA1)[e.y * q + j] += c * av[j];
          }
          if (gA2) {
            const double c = e.m * v[e.x];
            for (std::size_t j = 0; j < q; ++j) (*gA2)[e.y * q + j] += c * gT[j];
          }
        }
      });
}

/// Same computation assembled from generic tape ops; slower, kept as a
/// second route for cross-checking the fused kernel.
inline Tensor event_feature_extract_reference(const Tensor& M, const Tensor& a, const Tensor& A1, const Tensor& A2) {
  const std::size_t w = M.dim(0), q = A1.dim(1);
  const Tensor L1 = nn::matmul(M, A1);
  const Tensor L2 = nn::matmul(L1, nn::reshape(a, {q, 1}));
  const Tensor L3 = nn::matmul(M, A2);
  const Tensor v = nn::softmax(L2);
  return nn::reshape(nn::matmul(nn::transpose(L3), nn::reshape(v, {w, 1})), {q});
}

}  // namespace asyncev::pipeline
