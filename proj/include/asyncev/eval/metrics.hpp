#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>

#include <json.hpp>

#include "asyncev/errors.hpp"

namespace asyncev::eval {

namespace detail {

inline void require_pair(std::span<const double> predicted, std::span<const double> observed, const char* what) {
  if (predicted.size() != observed.size()) {
    throw InvalidInput(std::string(what) + ": length mismatch " + std::to_string(predicted.size()) + " vs " +
                       std::to_string(observed.size()));
  }
  if (predicted.empty()) throw InvalidInput(std::string(what) + ": empty input");
}

/// Population variance, two-pass.
inline double variance(std::span<const double> x) {
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  return ss / static_cast<double>(x.size());
}

}  // namespace detail

/// Root-mean-squared error, in the units of the inputs (degrees).
inline double rmse(std::span<const double> predicted, std::span<const double> observed) {
  detail::require_pair(predicted, observed, "rmse");
  double ss = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const double r = predicted[i] - observed[i];
    ss += r * r;
  }
  return std::sqrt(ss / static_cast<double>(predicted.size()));
}

/// Explained variance 1 - Var(predicted - observed) / Var(observed), with
/// population variances.
inline double eva(std::span<const double> predicted, std::span<const double> observed) {
  detail::require_pair(predicted, observed, "eva");
  if (predicted.size() < 2) throw UndefinedMetric("eva needs at least two samples");
  const double var_obs = detail::variance(observed);
  if (!(var_obs > 0.0)) throw UndefinedMetric("eva: observed values have zero variance");
  std::vector<double> residual(predicted.size());
  for (std::size_t i = 0; i < predicted.size(); ++i) residual[i] = predicted[i] - observed[i];
  return 1.0 - detail::variance(residual) / var_obs;
}

/// Relative RMSE change in percent: (new - baseline) / baseline * 100.
/// Negative means the new RMSE is lower.
inline double improvement(double baseline_rmse, double new_rmse) {
  if (!(baseline_rmse > 0.0)) throw InvalidInput("improvement: baseline RMSE must be positive");
  return (new_rmse - baseline_rmse) / baseline_rmse * 100.0;
}

/// "19.5% lower" / "3.0% higher" style phrasing of an improvement value.
inline std::string describe_improvement(double percent) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f%% %s", std::abs(percent), percent <= 0.0 ? "lower" : "higher");
  return buf;
}

struct MetricReport {
  double rmse = 0.0;
  std::optional<double> eva;  // absent when observed values are constant
  std::size_t n = 0;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["rmse"] = rmse;
    j["eva"] = eva ? nlohmann::json(*eva) : nlohmann::json(nullptr);
    j["n"] = n;
    return j;
  }

  static MetricReport from_json(const nlohmann::json& j) {
    MetricReport r;
    r.rmse = j.at("rmse").get<double>();
    if (!j.at("eva").is_null()) r.eva = j.at("eva").get<double>();
    r.n = j.at("n").get<std::size_t>();
    return r;
  }

  friend bool operator==(const MetricReport&, const MetricReport&) = default;
};

inline MetricReport make_report(std::span<const double> predicted, std::span<const double> observed) {
  MetricReport r;
  r.rmse = rmse(predicted, observed);
  r.n = predicted.size();
  try {
    r.eva = eva(predicted, observed);
  } catch (const UndefinedMetric&) {
    r.eva.reset();
  }
  return r;
}

}  // namespace asyncev::eval
