#include "resp/assess.hpp"

#include "resp/anomaly.hpp"
#include "resp/errors.hpp"
#include "resp/posteriorops.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <thread>

namespace resp {

double quantile_type7(const std::vector<double>& sorted, double prob) {
  if (sorted.empty()) throw DataError("quantile of an empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

Cutpoints tercile_cutpoints(std::vector<double> train) {
  if (train.size() < 3) throw DataError("terciles need at least three training values, got " + std::to_string(train.size()));
  std::sort(train.begin(), train.end());
  return {quantile_type7(train, 1.0 / 3.0), quantile_type7(train, 2.0 / 3.0)};
}

int categorize(double x, const Cutpoints& cut) {
  if (x <= cut.lower) return 1;
  if (x <= cut.upper) return 2;
  return 3;
}

std::vector<int> CategoricalForecast::point_categories() const {
  std::vector<int> out(static_cast<std::size_t>(probs.rows()));
  for (Index i = 0; i < probs.rows(); ++i) {
    const double best = probs.row(i).maxCoeff();
    int cat = 0;
    if (probs(i, 1) == best) cat = 2;
    else cat = probs(i, 0) == best ? 1 : 3;
    out[static_cast<std::size_t>(i)] = cat;
  }
  return out;
}

namespace {

std::vector<double> row_values(const Matrix& m, Index i) { return {m.row(i).begin(), m.row(i).end()}; }

std::vector<Cutpoints> training_cutpoints(const Matrix& train) {
  std::vector<Cutpoints> cuts;
  for (Index i = 0; i < train.rows(); ++i) cuts.push_back(tercile_cutpoints(row_values(train, i)));
  return cuts;
}

CategoricalForecast frequencies(const Matrix& values, std::vector<Cutpoints> cuts) {
  if (values.cols() < 1) throw DataError("categorical forecast needs at least one draw");
  CategoricalForecast out;
  out.probs = Matrix::Zero(values.rows(), 3);
  for (Index i = 0; i < values.rows(); ++i) {
    for (Index g = 0; g < values.cols(); ++g) out.probs(i, categorize(values(i, g), cuts[static_cast<std::size_t>(i)]) - 1) += 1.0;
    out.probs.row(i) /= static_cast<double>(values.cols());
  }
  out.cutpoints = std::move(cuts);
  return out;
}

}  // namespace

CategoricalForecast discretize(const Matrix& pred_draws, const Matrix& train) {
  if (pred_draws.rows() != train.rows())
    throw DimensionError("discretize: draw rows vs training locations", train.rows(), pred_draws.rows());
  return frequencies(pred_draws, training_cutpoints(train));
}

CategoricalForecast climatology_forecast(const Matrix& train) { return frequencies(train, training_cutpoints(train)); }

std::vector<int> observed_categories(const Vector& obs, const std::vector<Cutpoints>& cuts) {
  if (static_cast<std::size_t>(obs.size()) != cuts.size())
    throw DimensionError("observed_categories: values vs cutpoints", static_cast<long long>(cuts.size()), obs.size());
  std::vector<int> out;
  for (Index i = 0; i < obs.size(); ++i) out.push_back(categorize(obs[i], cuts[static_cast<std::size_t>(i)]));
  return out;
}

double heidke(const std::vector<int>& predicted, const std::vector<int>& observed, double p_ref) {
  if (predicted.empty()) throw DataError("heidke: empty input");
  if (predicted.size() != observed.size())
    throw DimensionError("heidke: predictions vs observations", static_cast<long long>(observed.size()),
                         static_cast<long long>(predicted.size()));
  if (!(p_ref >= 0.0 && p_ref < 1.0)) throw ConfigError("heidke: reference accuracy must lie in [0, 1)");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (predicted[i] < 1 || predicted[i] > 3 || observed[i] < 1 || observed[i] > 3)
      throw DataError("heidke: categories must be 1, 2 or 3");
    if (predicted[i] == observed[i]) ++hits;
  }
  const double p_model = static_cast<double>(hits) / static_cast<double>(predicted.size());
  return (p_model - p_ref) / (1.0 - p_ref);
}

double rps(const CategoricalForecast& forecast, const std::vector<int>& observed) {
  const Index n = forecast.probs.rows();
  if (forecast.probs.cols() != 3) throw DimensionError("rps: forecast categories", 3, forecast.probs.cols());
  if (static_cast<Index>(observed.size()) != n)
    throw DimensionError("rps: observations vs forecast rows", n, static_cast<long long>(observed.size()));
  if (n == 0) throw DataError("rps: empty forecast");
  double total = 0.0;
  for (Index i = 0; i < n; ++i) {
    const int obs = observed[static_cast<std::size_t>(i)];
    if (obs < 1 || obs > 3) throw DataError("rps: categories must be 1, 2 or 3");
    double cum = 0.0;
    for (int j = 1; j <= 3; ++j) {
      cum += forecast.probs(i, j - 1);
      const double o = obs <= j ? 1.0 : 0.0;
      total += (cum - o) * (cum - o);
    }
  }
  return total / static_cast<double>(n);
}

namespace {

// Posterior covariance diagonal of beta for a given time factor (C or I).
Vector beta_variances(ModelContext& ctx, const ModelState& state, const Priors& priors, const Matrix& time_factor) {
  const Matrix& X = ctx.stacked_design();
  const Matrix sigma_inv = ctx.local(state).unit_inverse / state.sigma2_w;
  Matrix precision = SpdFactor(priors.beta_cov).inverse() + X.transpose() * kron_apply(time_factor, sigma_inv, X);
  precision = 0.5 * (precision + precision.transpose());
  return SpdFactor(precision).inverse().diagonal();
}

}  // namespace

Vector vif_local_all(ModelContext& ctx, const ModelState& state, const Priors& priors) {
  const Index nt = ctx.data().n_t();
  const Vector with_remote = beta_variances(ctx, state, priors, ctx.time(state).c);
  const Vector without = beta_variances(ctx, state, priors, Matrix::Identity(nt, nt));
  return with_remote.cwiseQuotient(without);
}

double vif_local(Index i, ModelContext& ctx, const ModelState& state, const Priors& priors) {
  if (i < 0 || i >= ctx.data().p()) throw DimensionError("vif_local: coefficient index", ctx.data().p() - 1, i);
  return vif_local_all(ctx, state, priors)[i];
}

Vector vif_remote_all(const ModelState& state, const ReducedRankBasis& basis) {
  const Index k = basis.Rstar.rows();
  if (basis.Zstar.rows() != k) throw DimensionError("vif_remote: rows of Z* vs knots", k, basis.Zstar.rows());
  Matrix precision = SpdFactor(basis.Rstar).inverse() + basis.Zstar * basis.Zstar.transpose();
  precision = 0.5 * (precision + precision.transpose());
  const Vector numerator = SpdFactor(precision).inverse().diagonal();
  Vector out(k);
  for (Index i = 0; i < k; ++i) {
    const double denominator = 1.0 / (1.0 / state.sigma2_alpha + basis.Zstar.row(i).squaredNorm());
    out[i] = numerator[i] / denominator;
  }
  return out;
}

double vif_remote(Index i, const ModelState& state, const ReducedRankBasis& basis) {
  if (i < 0 || i >= basis.Rstar.rows()) throw DimensionError("vif_remote: knot index", basis.Rstar.rows() - 1, i);
  return vif_remote_all(state, basis)[i];
}

ModelState posterior_mean_state(const std::vector<ModelState>& draws) {
  if (draws.empty()) throw DataError("posterior mean of an empty draw set");
  ModelState out = draws.front();
  out.beta.setZero();
  out.sigma2_w = out.nugget_ratio = out.sigma2_alpha = out.rho_w = out.rho_alpha = 0.0;
  for (const auto& s : draws) {
    out.beta += s.beta;
    out.sigma2_w += s.sigma2_w;
    out.nugget_ratio += s.nugget_ratio;
    out.sigma2_alpha += s.sigma2_alpha;
    out.rho_w += s.rho_w;
    out.rho_alpha += s.rho_alpha;
  }
  const double n = static_cast<double>(draws.size());
  out.beta /= n;
  out.sigma2_w /= n;
  out.nugget_ratio /= n;
  out.sigma2_alpha /= n;
  out.rho_w /= n;
  out.rho_alpha /= n;
  return out;
}

Forecaster resp_forecaster(std::vector<Location> knots, SamplerConfig sampler, Priors priors, Index draws) {
  return [knots = std::move(knots), sampler, priors, draws](const Dataset& train, const Matrix& X_t0, const Vector& z_t0,
                                                          std::uint64_t seed) {
    ModelContext ctx(train, knots);
    SamplerConfig cfg = sampler;
    cfg.seed = seed;
    cfg.checkpoint_path.clear();
    Priors pr = priors;
    if (pr.beta_cov.rows() != train.p()) pr.beta_cov = Priors::defaults(train.p()).beta_cov;
    const Chain chain = run_chain(ctx, pr, cfg);
    const auto kept = chain.post_burn();
    PredictOptions opts;
    opts.draws = std::min<Index>(draws, static_cast<Index>(kept.size()));
    opts.seed = seed ^ 0x9e3779b97f4a7c15ULL;
    return predict(kept, ctx, X_t0, z_t0, opts).draws;
  };
}

Forecaster climatology_forecaster() {
  return [](const Dataset& train, const Matrix&, const Vector&, std::uint64_t) { return train.response.values; };
}

std::pair<double, double> median_iqr(std::vector<double> values) {
  if (values.empty()) return {std::nan(""), std::nan("")};
  std::sort(values.begin(), values.end());
  return {quantile_type7(values, 0.5), quantile_type7(values, 0.75) - quantile_type7(values, 0.25)};
}

std::vector<SkillSummary> LooReport::summaries() const {
  std::vector<SkillSummary> out;
  for (const char* model : {"RESP", "CLIM"}) {
    std::vector<double> h, r, rr;
    for (const auto& row : rows) {
      if (row.model != model) continue;
      h.push_back(row.heidke);
      r.push_back(row.rps);
      rr.push_back(row.rps_relative);
    }
    SkillSummary s;
    s.model = model;
    s.years = static_cast<int>(h.size());
    std::tie(s.heidke_median, s.heidke_iqr) = median_iqr(h);
    std::tie(s.rps_median, s.rps_iqr) = median_iqr(r);
    std::tie(s.rps_relative_median, s.rps_relative_iqr) = median_iqr(rr);
    out.push_back(s);
  }
  return out;
}

LooReport loo_validate(const Dataset& full, const Forecaster& forecaster, const LooConfig& cfg) {
  full.validate();
  const Index nt = full.n_t();
  if (nt < 4) throw DataError("leave-one-out validation needs at least 4 times, got " + std::to_string(nt));

  struct Fold {
    bool ok = false;
    std::string error;
    SkillRow model, clim;
  };
  std::vector<Fold> folds(static_cast<std::size_t>(nt));

  auto run_fold = [&](Index t) {
    Fold& fold = folds[static_cast<std::size_t>(t)];
    const std::string& year = full.time_index[static_cast<std::size_t>(t)];
    try {
      std::vector<Index> train_cols;
      for (Index c = 0; c < nt; ++c)
        if (c != t) train_cols.push_back(c);
      const AnomalyPipeline pipe = cfg.standardize ? AnomalyPipeline::fit(full, train_cols) : AnomalyPipeline::passthrough();
      const Dataset train = pipe.apply(full.select_times(train_cols));
      const Matrix X_t0 = pipe.apply_design(full.design[static_cast<std::size_t>(t)]);
      const Vector z_t0 = pipe.apply_remote(full.remote.values.col(t));
      const Vector y_t0 = pipe.apply_response(full.response.values.col(t));

      Rng seeder = make_rng(cfg.seed, static_cast<std::uint64_t>(t));
      const Matrix draws = forecaster(train, X_t0, z_t0, seeder());

      const CategoricalForecast model = discretize(draws, train.response.values);
      const CategoricalForecast clim = climatology_forecast(train.response.values);
      const std::vector<int> obs = observed_categories(y_t0, model.cutpoints);
      fold.model = {year, "RESP", heidke(model.point_categories(), obs), rps(model, obs), 0.0};
      fold.clim = {year, "CLIM", heidke(clim.point_categories(), obs), rps(clim, obs), 0.0};
      fold.ok = true;
    } catch (const std::exception& e) {
      fold.error = e.what();
    }
  };

  const int w = std::clamp<int>(cfg.workers, 1, static_cast<int>(nt));
  if (w == 1) {
    for (Index t = 0; t < nt; ++t) run_fold(t);
  } else {
    std::atomic<Index> next{0};
    std::vector<std::thread> pool;
    for (int j = 0; j < w; ++j)
      pool.emplace_back([&] {
        for (Index t = next++; t < nt; t = next++) run_fold(t);
      });
    for (auto& th : pool) th.join();
  }

  LooReport report;
  std::vector<double> clim_rps;
  for (const auto& f : folds)
    if (f.ok) clim_rps.push_back(f.clim.rps);
  const double reference = median_iqr(clim_rps).first;
  for (Index t = 0; t < nt; ++t) {
    Fold& f = folds[static_cast<std::size_t>(t)];
    if (!f.ok) {
      report.failures.emplace_back(full.time_index[static_cast<std::size_t>(t)], f.error);
      continue;
    }
    f.model.rps_relative = f.model.rps - reference;
    f.clim.rps_relative = f.clim.rps - reference;
    report.rows.push_back(f.model);
    report.rows.push_back(f.clim);
  }
  return report;
}

}  // namespace resp
