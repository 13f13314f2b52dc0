#pragma once

#include "resp/resplike.hpp"
#include "resp/types.hpp"

#include <string>
#include <vector>

namespace resp {

/// Per-location centring and scaling learned from a training scope.
///
/// The response and every non-constant covariate column are standardized per
/// location; remote series are standardized per location and then multiplied
/// by 1/n_r. Covariate columns that are constant over the whole training
/// scope (an intercept) pass through unchanged.
struct AnomalyPipeline {
  bool enabled = false;
  Vector response_mean, response_sd;          // n_s
  std::vector<Vector> covariate_mean;         // p entries, each n_s (empty for pass-through columns)
  std::vector<Vector> covariate_sd;
  Vector remote_mean, remote_sd;              // n_r
  double remote_scale = 1.0;
  std::vector<std::string> training_times;

  /// Identity transform.
  static AnomalyPipeline passthrough();
  /// Statistics from the given time columns of raw; throws DataError on zero variance.
  static AnomalyPipeline fit(const Dataset& raw, const std::vector<Index>& train_columns);

  Dataset apply(const Dataset& raw) const;
  Vector apply_response(const Vector& y) const;
  Matrix apply_design(const Matrix& X_t) const;
  Vector apply_remote(const Vector& z) const;
  /// Maps standardized response values back to the original units.
  Vector invert_response(const Vector& y) const;
};

}  // namespace resp
