#pragma once

#include <stdexcept>
#include <string>

namespace asyncev {

/// Malformed or out-of-range input data (bad coordinates, mismatched sizes).
class InvalidInput : public std::invalid_argument {
public:
  explicit InvalidInput(const std::string& what) : std::invalid_argument(what) {}
};

/// A configuration value violates its documented domain.
class ConfigError : public std::invalid_argument {
public:
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

/// Tensor shapes do not agree for the requested operation.
class ShapeError : public std::invalid_argument {
public:
  explicit ShapeError(const std::string& what) : std::invalid_argument(what) {}
};

/// A NaN or infinity reached a place that must stay finite (optimizer, loss).
class NumericalError : public std::runtime_error {
public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

/// A metric is not defined for the given sample (e.g. zero observed variance).
class UndefinedMetric : public std::domain_error {
public:
  explicit UndefinedMetric(const std::string& what) : std::domain_error(what) {}
};

class IoError : public std::runtime_error {
public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace asyncev
