#pragma once

#include <algorithm>
#include <optional>

#include "asyncev/nn/ops.hpp"

namespace asyncev::nn {

struct Conv2dSpec {
  std::size_t stride = 1;
  std::size_t padding = 0;
};

namespace detail {

struct ConvGeometry {
  std::size_t c_in, h, w, c_out, kh, kw, stride, pad, oh, ow;

  // range of output columns whose input column ox*stride - pad + kx is inside [0, w)
  std::pair<std::size_t, std::size_t> valid_range(std::size_t k, std::size_t in_extent, std::size_t out_extent) const {
    const long long p = static_cast<long long>(pad), kk = static_cast<long long>(k), s = static_cast<long long>(stride);
    long long lo = p - kk > 0 ? (p - kk + s - 1) / s : 0;
    long long hi = (static_cast<long long>(in_extent) - 1 + p - kk);
    hi = hi < 0 ? -1 : hi / s;
    hi = std::min<long long>(hi, static_cast<long long>(out_extent) - 1);
    if (hi < lo) return {0, 0};
    return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi + 1)};
  }
};

}  // namespace detail

/// Cross-correlation of x [c_in x H x W] with kernels [c_out x c_in x kh x kw].
inline Tensor conv2d(const Tensor& x, const Tensor& kernels, const std::optional<Tensor>& bias, Conv2dSpec spec = {}) {
  detail::require_rank(x, 3, "conv2d input");
  detail::require_rank(kernels, 4, "conv2d kernels");
  if (spec.stride == 0) throw ShapeError("conv2d: stride must be positive");
  detail::ConvGeometry g{x.dim(0), x.dim(1), x.dim(2), kernels.dim(0), kernels.dim(2), kernels.dim(3),
                         spec.stride, spec.padding, 0, 0};
  if (kernels.dim(1) != g.c_in) {
    throw ShapeError("conv2d: kernel expects " + std::to_string(kernels.dim(1)) + " input channels, got " +
                     std::to_string(g.c_in));
  }
  if (g.h + 2 * g.pad < g.kh || g.w + 2 * g.pad < g.kw) throw ShapeError("conv2d: kernel larger than padded input");
  if (bias && bias->size() != g.c_out) throw ShapeError("conv2d: bias length mismatch");
  g.oh = (g.h + 2 * g.pad - g.kh) / g.stride + 1;
  g.ow = (g.w + 2 * g.pad - g.kw) / g.stride + 1;

  std::vector<double> out(g.c_out * g.oh * g.ow, 0.0);
  const auto xv = x.values();
  const auto kv = kernels.values();
  for (std::size_t co = 0; co < g.c_out; ++co) {
    double* oplane = &out[co * g.oh * g.ow];
    if (bias) std::fill(oplane, oplane + g.oh * g.ow, (*bias)[co]);
    for (std::size_t ci = 0; ci < g.c_in; ++ci) {
      const double* iplane = &xv[ci * g.h * g.w];
      for (std::size_t ky = 0; ky < g.kh; ++ky) {
        const auto [oy0, oy1] = g.valid_range(ky, g.h, g.oh);
        for (std::size_t kx = 0; kx < g.kw; ++kx) {
          const double wgt = kv[((co * g.c_in + ci) * g.kh + ky) * g.kw + kx];
          const auto [ox0, ox1] = g.valid_range(kx, g.w, g.ow);
          for (std::size_t oy = oy0; oy < oy1; ++oy) {
            const std::size_t iy = oy * g.stride + ky - g.pad;
            double* orow = oplane + oy * g.ow + ox0;
            const double* irow = iplane + iy * g.w + (ox0 * g.stride + kx - g.pad);
            const std::size_t count = ox1 - ox0;
            if (g.stride == 1) {
              for (std::size_t i = 0; i < count; ++i) orow[i] += wgt * irow[i];
            } else {
              for (std::size_t i = 0; i < count; ++i) orow[i] += wgt * irow[i * g.stride];
            }
          }
        }
      }
    }
  }

  std::vector<Tensor> inputs{x, kernels};
  if (bias) inputs.push_back(*bias);
  const bool has_bias = bias.has_value();
  return Tensor::make_result({g.c_out, g.oh, g.ow}, std::move(out), std::move(inputs), [g, has_bias](Node& self) {
    const auto& xv = detail::parent_value(self, 0);
    const auto& kv = detail::parent_value(self, 1);
    auto* gx = detail::parent_grad(self, 0);
    auto* gk = detail::parent_grad(self, 1);
    const auto& go = self.grad;
    for (std::size_t co = 0; co < g.c_out; ++co) {
      const double* gplane = &go[co * g.oh * g.ow];
      for (std::size_t ci = 0; ci < g.c_in; ++ci) {
        const std::size_t ioff = ci * g.h * g.w;
        for (std::size_t ky = 0; ky < g.kh; ++ky) {
          const auto [oy0, oy1] = g.valid_range(ky, g.h, g.oh);
          for (std::size_t kx = 0; kx < g.kw; ++kx) {
            const std::size_t kidx = ((co * g.c_in + ci) * g.kh + ky) * g.kw + kx;
            const double wgt = kv[kidx];
            const auto [ox0, ox1] = g.valid_range(kx, g.w, g.ow);
            double acc = 0.0;
            for (std::size_t oy = oy0; oy < oy1; ++oy) {
              const std::size_t iy = oy * g.stride + ky - g.pad;
              const double* grow = gplane + oy * g.ow + ox0;
              const std::size_t ibase = ioff + iy * g.w + (ox0 * g.stride + kx - g.pad);
              const std::size_t count = ox1 - ox0;
              if (gx) {
                double* gxrow = gx->data() + ibase;
                for (std::size_t i = 0; i < count; ++i) gxrow[i * g.stride] += wgt * grow[i];
              }
              if (gk) {
                const double* xrow = xv.data() + ibase;
                const std::size_t st = g.stride;
#pragma omp simd reduction(+ : acc)
                for (std::size_t i = 0; i < count; ++i) acc += grow[i] * xrow[i * st];
              }
            }
            if (gk) (*gk)[kidx] += acc;
          }
        }
      }
    }
    if (has_bias) {
      if (auto* gb = detail::parent_grad(self, 2)) {
        for (std::size_t co = 0; co < g.c_out; ++co) {
          double s = 0.0;
          for (std::size_t i = 0; i < g.oh * g.ow; ++i) s += go[co * g.oh * g.ow + i];
          (*gb)[co] += s;
        }
      }
    }
  });
}

/// [c x H x W] -> [c], mean over every spatial position.
inline Tensor global_avg_pool(const Tensor& x) {
  detail::require_rank(x, 3, "global_avg_pool");
  return row_mean(reshape(x, {x.dim(0), x.dim(1) * x.dim(2)}));
}

}  // namespace asyncev::nn
