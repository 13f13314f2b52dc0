#pragma once

#include "resp/gibbs.hpp"
#include "resp/reducedrank.hpp"
#include "resp/resplike.hpp"
#include "resp/types.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace resp {

/// Linear-interpolation sample quantile (R type 7) of an ascending sample.
double quantile_type7(const std::vector<double>& sorted, double prob);

struct Cutpoints {
  double lower = 0.0;  // 1/3 quantile
  double upper = 0.0;  // 2/3 quantile
};

/// Training terciles; needs at least three values.
Cutpoints tercile_cutpoints(std::vector<double> train);

/// 1 for (-inf, lower], 2 for (lower, upper], 3 for (upper, inf).
int categorize(double x, const Cutpoints& cut);

/// Three-category probabilistic forecast per location.
struct CategoricalForecast {
  Matrix probs;  // n x 3
  std::vector<Cutpoints> cutpoints;

  /// Most probable category; ties go to 2, then to the lower category.
  std::vector<int> point_categories() const;
};

/// Tercile forecast from predictive draws (n x G) with cutpoints from the
/// training responses (n x n_train).
CategoricalForecast discretize(const Matrix& pred_draws, const Matrix& train);

/// Empirical tercile frequencies of the training responses.
CategoricalForecast climatology_forecast(const Matrix& train);

/// Observed categories of one time's values under the forecast's cutpoints.
std::vector<int> observed_categories(const Vector& obs, const std::vector<Cutpoints>& cuts);

/// (p_model - p_ref) / (1 - p_ref) with p_model the fraction of hits.
double heidke(const std::vector<int>& predicted, const std::vector<int>& observed, double p_ref = 1.0 / 3.0);

/// Mean over locations of the squared cumulative-probability differences.
double rps(const CategoricalForecast& forecast, const std::vector<int>& observed);

/// Posterior variance of beta_i with the remote term marginalized, relative to
/// the same quantity with C replaced by I.
double vif_local(Index i, ModelContext& ctx, const ModelState& state, const Priors& priors);
Vector vif_local_all(ModelContext& ctx, const ModelState& state, const Priors& priors);

/// ((R*^{-1} + Z* Z*^T)^{-1})_ii divided by (1/sigma2_alpha + |Z*_i|^2)^{-1}.
double vif_remote(Index i, const ModelState& state, const ReducedRankBasis& basis);
Vector vif_remote_all(const ModelState& state, const ReducedRankBasis& basis);

/// Parameter point at which VIFs are evaluated: posterior mean of a draw set.
ModelState posterior_mean_state(const std::vector<ModelState>& draws);

/// Predictive draws (n_s x G) at a held-out time given a standardized training
/// set, the held-out covariates in the same scale and a seed.
using Forecaster = std::function<Matrix(const Dataset& train, const Matrix& X_t0, const Vector& z_t0, std::uint64_t seed)>;

/// Fits a chain on train and returns predictive draws.
Forecaster resp_forecaster(std::vector<Location> knots, SamplerConfig sampler, Priors priors, Index draws);
/// Returns the training responses themselves, i.e. the climatological distribution.
Forecaster climatology_forecaster();

struct LooConfig {
  bool standardize = false;
  int workers = 1;
  std::uint64_t seed = 0;
};

struct SkillRow {
  std::string year;
  std::string model;  // "RESP" or "CLIM"
  double heidke = 0.0;
  double rps = 0.0;
  double rps_relative = 0.0;
};

struct SkillSummary {
  std::string model;
  double heidke_median = 0.0, heidke_iqr = 0.0;
  double rps_median = 0.0, rps_iqr = 0.0;
  double rps_relative_median = 0.0, rps_relative_iqr = 0.0;
  int years = 0;
};

struct LooReport {
  std::vector<SkillRow> rows;  // ordered by year, RESP before CLIM
  std::vector<std::pair<std::string, std::string>> failures;  // (year, message)

  std::vector<SkillSummary> summaries() const;
};

/// Leave-one-time-out validation. Each fold restandardizes on its training
/// times only (when enabled), forecasts the held-out time, and scores the
/// forecaster and climatology against training terciles. rps_relative is
/// relative to the median climatology RPS over all folds. A failing fold is
/// recorded and skipped.
LooReport loo_validate(const Dataset& full, const Forecaster& forecaster, const LooConfig& cfg);

/// Median and interquartile range (type-7 quantiles).
std::pair<double, double> median_iqr(std::vector<double> values);

}  // namespace resp
