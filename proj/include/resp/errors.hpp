#pragma once

#include <stdexcept>
#include <string>

namespace resp {

// Numeric values double as CLI exit codes.
enum class ErrorCategory : int {
  internal = 1,
  config = 2,
  data = 3,
  numerical = 4,
};

const char* category_name(ErrorCategory c) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}
  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorCategory::config, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorCategory::data, what) {}
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what) : Error(ErrorCategory::numerical, what) {}
};

// Shape disagreement between operands; carries the offending dimension pair.
class DimensionError : public Error {
 public:
  DimensionError(const std::string& context, long long expected, long long actual)
      : Error(ErrorCategory::data, context + ": expected " + std::to_string(expected) +
                                       ", got " + std::to_string(actual)),
        expected_(expected),
        actual_(actual) {}
  long long expected() const noexcept { return expected_; }
  long long actual() const noexcept { return actual_; }

 private:
  long long expected_;
  long long actual_;
};

class SingularMatrixError : public NumericalError {
 public:
  SingularMatrixError(const std::string& what, double smallest_pivot)
      : NumericalError(what + " (smallest pivot " + std::to_string(smallest_pivot) + ")"),
        smallest_pivot_(smallest_pivot) {}
  double smallest_pivot() const noexcept { return smallest_pivot_; }

 private:
  double smallest_pivot_;
};

}  // namespace resp
