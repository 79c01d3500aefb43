#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "asyncev/nn/ops.hpp"
#include "asyncev/nn/param_set.hpp"

namespace asyncev::nn {

struct GradCheckOptions {
  double step = 1e-4;
  double tolerance = 1e-4;
  // relative error is |a - n| / max(|a|, |n|, denominator_floor)
  double denominator_floor = 1e-6;
  // 0 checks every entry; otherwise a seeded sample of this many per tensor
  std::size_t max_entries_per_tensor = 0;
  std::uint64_t seed = 7;
  // entries whose +h/-h evaluations straddle a ReLU kink are skipped; the
  // check fails if more than this fraction had to be skipped
  double max_skipped_fraction = 0.25;
};

struct TensorCheck {
  std::string name;
  std::size_t checked = 0;
  std::size_t skipped = 0;
  double max_relative_error = 0.0;
  double max_abs_analytic = 0.0;
};

struct GradCheckReport {
  std::vector<TensorCheck> tensors;
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;
  bool passed = false;
};

using ScalarFunction = std::function<Tensor(const Binding&)>;

inline double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

/// Central finite differences against reverse-mode gradients of a scalar f.
inline GradCheckReport grad_check(const ScalarFunction& f, ParamSet params, const GradCheckOptions& opt = {}) {
  GradSet analytic;
  {
    Binding bound(params, true);
    const Tensor loss = f(bound);
    if (loss.size() != 1) throw ShapeError("grad_check: function must return a scalar");
    loss.backward();
    analytic = bound.gradients(params);
  }

  auto& probe = KinkProbe::current();
  auto evaluate = [&](std::uint64_t& fingerprint) {
    probe.active = true;
    probe.reset();
    const double v = f(Binding(params, false)).item();
    fingerprint = probe.fingerprint;
    probe.active = false;
    return v;
  };
  std::uint64_t base_print = 0;
  evaluate(base_print);

  Rng rng(opt.seed);
  GradCheckReport report;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& values = params.arrays()[k].values;
    const auto& grad = analytic.arrays()[k].values;
    TensorCheck tc{params.arrays()[k].name};

    std::vector<std::size_t> entries(values.size());
    std::iota(entries.begin(), entries.end(), std::size_t{0});
    if (opt.max_entries_per_tensor != 0 && entries.size() > opt.max_entries_per_tensor) {
      for (std::size_t i = 0; i < opt.max_entries_per_tensor; ++i) {
        std::swap(entries[i], entries[i + rng.index(entries.size() - i)]);
      }
      entries.resize(opt.max_entries_per_tensor);
      std::sort(entries.begin(), entries.end());
    }

    for (const auto i : entries) {
      const double saved = values[i];
      std::uint64_t plus_print = 0, minus_print = 0;
      values[i] = saved + opt.step;
      const double f_plus = evaluate(plus_print);
      values[i] = saved - opt.step;
      const double f_minus = evaluate(minus_print);
      values[i] = saved;
      if (plus_print != minus_print || plus_print != base_print) {
        ++tc.skipped;
        continue;
      }
      const double numeric = (f_plus - f_minus) / (2.0 * opt.step);
      tc.max_relative_error = std::max(tc.max_relative_error, relative_error(grad[i], numeric, opt.denominator_floor));
      tc.max_abs_analytic = std::max(tc.max_abs_analytic, std::abs(grad[i]));
      ++tc.checked;
    }
    report.max_relative_error = std::max(report.max_relative_error, tc.max_relative_error);
    report.checked += tc.checked;
    report.skipped += tc.skipped;
    report.tensors.push_back(tc);
  }
  const double total = static_cast<double>(report.checked + report.skipped);
  report.passed = report.checked > 0 && report.max_relative_error < opt.tolerance &&
                  static_cast<double>(report.skipped) <= opt.max_skipped_fraction * total;
  return report;
}

}  // namespace asyncev::nn
