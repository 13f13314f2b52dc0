#include "resp/anomaly.hpp"

#include "resp/errors.hpp"

#include <cmath>

namespace resp {

namespace {

struct RowStats {
  Vector mean, sd;
};

RowStats row_stats(const Matrix& values, const std::vector<Index>& cols) {
  const Index n = values.rows();
  const double m = static_cast<double>(cols.size());
  RowStats out{Vector::Zero(n), Vector::Zero(n)};
  for (Index c : cols) out.mean += values.col(c);
  out.mean /= m;
  for (Index c : cols) out.sd.array() += (values.col(c) - out.mean).array().square();
  out.sd = (out.sd / (m - 1.0)).cwiseSqrt();
  return out;
}

void require_spread(const Vector& sd, const std::vector<std::string>& ids, const std::string& what) {
  for (Index i = 0; i < sd.size(); ++i)
    if (!(sd[i] > 0.0))
      throw DataError(what + " at location " + (static_cast<std::size_t>(i) < ids.size() ? ids[static_cast<std::size_t>(i)] : std::to_string(i)) +
                      " has zero variance over the training times");
}

}  // namespace

AnomalyPipeline AnomalyPipeline::passthrough() { return {}; }

AnomalyPipeline AnomalyPipeline::fit(const Dataset& raw, const std::vector<Index>& train_columns) {
  if (train_columns.size() < 2) throw DataError("standardization needs at least two training times");
  for (Index c : train_columns)
    if (c < 0 || c >= raw.n_t()) throw DimensionError("standardization: training column", raw.n_t() - 1, c);

  AnomalyPipeline p;
  p.enabled = true;
  for (Index c : train_columns) p.training_times.push_back(raw.time_index[static_cast<std::size_t>(c)]);

  RowStats ys = row_stats(raw.response.values, train_columns);
  require_spread(ys.sd, raw.response.ids, "response");
  p.response_mean = std::move(ys.mean);
  p.response_sd = std::move(ys.sd);

  const Index ns = raw.n_s();
  for (Index j = 0; j < raw.p(); ++j) {
    Matrix column(ns, static_cast<Index>(raw.n_t()));
    for (Index t = 0; t < raw.n_t(); ++t) column.col(t) = raw.design[static_cast<std::size_t>(t)].col(j);
    double lo = column.col(train_columns.front()).minCoeff(), hi = lo;
    for (Index c : train_columns) {
      lo = std::min(lo, column.col(c).minCoeff());
      hi = std::max(hi, column.col(c).maxCoeff());
    }
    if (lo == hi) {
      p.covariate_mean.emplace_back();
      p.covariate_sd.emplace_back();
      continue;
    }
    RowStats xs = row_stats(column, train_columns);
    const std::string name = static_cast<std::size_t>(j) < raw.covariate_names.size()
                                 ? raw.covariate_names[static_cast<std::size_t>(j)]
                                 : "covariate " + std::to_string(j + 1);
    require_spread(xs.sd, raw.response.ids, name);
    p.covariate_mean.push_back(std::move(xs.mean));
    p.covariate_sd.push_back(std::move(xs.sd));
  }

  RowStats zs = row_stats(raw.remote.values, train_columns);
  require_spread(zs.sd, raw.remote.ids, "remote series");
  p.remote_mean = std::move(zs.mean);
  p.remote_sd = std::move(zs.sd);
  p.remote_scale = 1.0 / static_cast<double>(raw.n_r());
  return p;
}

Vector AnomalyPipeline::apply_response(const Vector& y) const {
  if (!enabled) return y;
  if (y.size() != response_mean.size()) throw DimensionError("standardization: response length", response_mean.size(), y.size());
  return (y - response_mean).cwiseQuotient(response_sd);
}

Vector AnomalyPipeline::invert_response(const Vector& y) const {
  if (!enabled) return y;
  return y.cwiseProduct(response_sd) + response_mean;
}

Matrix AnomalyPipeline::apply_design(const Matrix& X_t) const {
  if (!enabled) return X_t;
  if (X_t.cols() != static_cast<Index>(covariate_mean.size()))
    throw DimensionError("standardization: design columns", static_cast<long long>(covariate_mean.size()), X_t.cols());
  Matrix out = X_t;
  for (std::size_t j = 0; j < covariate_mean.size(); ++j) {
    if (covariate_mean[j].size() == 0) continue;
    const auto col = static_cast<Index>(j);
    out.col(col) = (X_t.col(col) - covariate_mean[j]).cwiseQuotient(covariate_sd[j]);
  }
  return out;
}

Vector AnomalyPipeline::apply_remote(const Vector& z) const {
  if (!enabled) return z;
  if (z.size() != remote_mean.size()) throw DimensionError("standardization: remote length", remote_mean.size(), z.size());
  return remote_scale * (z - remote_mean).cwiseQuotient(remote_sd);
}

Dataset AnomalyPipeline::apply(const Dataset& raw) const {
  Dataset out = raw;
  if (!enabled) return out;
  for (Index t = 0; t < raw.n_t(); ++t) {
    out.response.values.col(t) = apply_response(raw.response.values.col(t));
    out.remote.values.col(t) = apply_remote(raw.remote.values.col(t));
    out.design[static_cast<std::size_t>(t)] = apply_design(raw.design[static_cast<std::size_t>(t)]);
  }
  return out;
}

}  // namespace resp
