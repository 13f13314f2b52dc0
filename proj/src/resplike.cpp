#include "resp/resplike.hpp"

#include "resp/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace resp {

void Dataset::validate() const {
  const Index ns = n_s(), nt = n_t();
  if (ns == 0 || nt == 0) throw DataError("Dataset: empty response");
  if (static_cast<Index>(response.locations.size()) != ns)
    throw DimensionError("Dataset: response locations vs rows", ns, static_cast<long long>(response.locations.size()));
  if (static_cast<Index>(time_index.size()) != nt)
    throw DimensionError("Dataset: time labels vs response columns", nt, static_cast<long long>(time_index.size()));
  if (static_cast<Index>(design.size()) != nt)
    throw DimensionError("Dataset: design matrices vs times", nt, static_cast<long long>(design.size()));
  for (const auto& X : design) {
    if (X.rows() != ns) throw DimensionError("Dataset: design rows vs locations", ns, X.rows());
    if (X.cols() != p()) throw DimensionError("Dataset: design columns", p(), X.cols());
    if (!X.allFinite()) throw DataError("Dataset: non-finite design value");
  }
  if (remote.n_times() != nt) throw DimensionError("Dataset: remote times vs response times", nt, remote.n_times());
  if (static_cast<Index>(remote.locations.size()) != remote.n_locations())
    throw DimensionError("Dataset: remote locations vs rows", remote.n_locations(),
                         static_cast<long long>(remote.locations.size()));
  if (!response.values.allFinite()) throw DataError("Dataset: non-finite response value");
  if (!remote.values.allFinite()) throw DataError("Dataset: non-finite remote value");
}

Matrix Dataset::stacked_design() const {
  const Index ns = n_s();
  Matrix X(ns * n_t(), p());
  for (Index t = 0; t < n_t(); ++t) X.middleRows(t * ns, ns) = design[static_cast<std::size_t>(t)];
  return X;
}

Vector Dataset::stacked_response() const {
  const Index ns = n_s();
  Vector y(ns * n_t());
  for (Index t = 0; t < n_t(); ++t) y.segment(t * ns, ns) = response.values.col(t);
  return y;
}

Dataset Dataset::select_times(const std::vector<Index>& columns) const {
  Dataset out;
  out.covariate_names = covariate_names;
  out.response.ids = response.ids;
  out.response.locations = response.locations;
  out.remote.ids = remote.ids;
  out.remote.locations = remote.locations;
  out.response.values.resize(n_s(), static_cast<Index>(columns.size()));
  out.remote.values.resize(n_r(), static_cast<Index>(columns.size()));
  for (std::size_t j = 0; j < columns.size(); ++j) {
    const Index t = columns[j];
    if (t < 0 || t >= n_t()) throw DimensionError("Dataset::select_times: time column", n_t() - 1, t);
    out.response.values.col(static_cast<Index>(j)) = response.values.col(t);
    out.remote.values.col(static_cast<Index>(j)) = remote.values.col(t);
    out.design.push_back(design[static_cast<std::size_t>(t)]);
    out.time_index.push_back(time_index[static_cast<std::size_t>(t)]);
  }
  return out;
}

void ModelState::validate() const {
  for (double v : {sigma2_w, nugget_ratio, sigma2_alpha, rho_w, rho_alpha, nu_w, nu_alpha})
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError("ModelState: variances, ranges and smoothness must be positive");
  if (!beta.allFinite()) throw ConfigError("ModelState: non-finite beta");
}

double InverseGamma::log_density(double x) const {
  if (!(x > 0.0)) return -std::numeric_limits<double>::infinity();
  return shape * std::log(rate) - std::lgamma(shape) - (shape + 1.0) * std::log(x) - rate / x;
}

Priors Priors::defaults(Index p) {
  Priors out;
  out.beta_cov = 10.0 * Matrix::Identity(p, p);
  return out;
}

void Priors::validate(Index p) const {
  if (beta_cov.rows() != p || beta_cov.cols() != p)
    throw DimensionError("Priors: beta covariance size", p, beta_cov.rows());
  for (const auto* ig : {&sigma2_w, &sigma2_alpha, &nugget_ratio})
    if (!(ig->shape > 0.0) || !(ig->rate > 0.0)) throw ConfigError("Priors: inverse-gamma shape and rate must be positive");
  for (const auto* u : {&rho_w, &rho_alpha})
    if (!(u->lower < u->upper) || !(u->lower >= 0.0)) throw ConfigError("Priors: uniform bounds must satisfy 0 <= lower < upper");
  SpdFactor check(beta_cov);
  (void)check;
}

Vector assemble_mean(const Dataset& data, const Vector& beta, const Matrix& Zstar, const Vector& alpha_star) {
  const Index ns = data.n_s(), nt = data.n_t(), k = Zstar.rows();
  if (beta.size() != data.p()) throw DimensionError("assemble_mean: beta length", data.p(), beta.size());
  if (Zstar.cols() != nt) throw DimensionError("assemble_mean: columns of Z*", nt, Zstar.cols());
  if (alpha_star.size() != ns * k) throw DimensionError("assemble_mean: alpha* length", ns * k, alpha_star.size());

  // (I_ns ⊗ Z*^T) alpha* gives the teleconnection term ordered (s, t).
  const Matrix tele = kron_apply(Matrix::Identity(ns, ns), Matrix(Zstar.transpose()), Matrix(alpha_star));
  Vector mu(ns * nt);
  for (Index t = 0; t < nt; ++t) {
    mu.segment(t * ns, ns) = data.design[static_cast<std::size_t>(t)] * beta;
    for (Index i = 0; i < ns; ++i) mu[t * ns + i] += tele(i * nt + t, 0);
  }
  return mu;
}

Matrix residual_matrix(const Dataset& data, const Vector& beta) {
  if (beta.size() != data.p()) throw DimensionError("residual_matrix: beta length", data.p(), beta.size());
  Matrix E = data.response.values;
  for (Index t = 0; t < data.n_t(); ++t) E.col(t) -= data.design[static_cast<std::size_t>(t)] * beta;
  return E;
}

namespace {

Vector stack_columns(const Matrix& E) {
  Vector e(E.size());
  for (Index t = 0; t < E.cols(); ++t) e.segment(t * E.rows(), E.rows()) = E.col(t);
  return e;
}

// e^T (C ⊗ P) e through the blocked product.
double kron_quadratic_form(const Matrix& C, const Matrix& P, const Vector& e) {
  const Matrix y = kron_apply(C, P, Matrix(e));
  return e.dot(y.col(0));
}

}  // namespace

double kron_gaussian_logdensity(const Matrix& residuals, const SpdFactor& cinv, const Matrix& c,
                                const SpdFactor& sigma, const Matrix& sigma_inv) {
  const Index ns = residuals.rows(), nt = residuals.cols();
  if (cinv.dim() != nt) throw DimensionError("kron_gaussian_logdensity: size of C^{-1}", nt, cinv.dim());
  if (sigma.dim() != ns) throw DimensionError("kron_gaussian_logdensity: size of Sigma", ns, sigma.dim());
  const double log_det = static_cast<double>(ns) * cinv.log_det() + static_cast<double>(nt) * sigma.log_det();
  const double quad = kron_quadratic_form(c, sigma_inv, stack_columns(residuals));
  const double n = static_cast<double>(ns * nt);
  const double ll = -0.5 * (n * std::log(2.0 * std::numbers::pi) + log_det + quad);
  if (!std::isfinite(ll))
    throw NumericalError("marginal log-likelihood is not finite (log det " + std::to_string(log_det) +
                         ", quadratic form " + std::to_string(quad) + ")");
  return ll;
}

double marginal_loglik(const Dataset& data, const ModelState& state, const ReducedRankBasis& basis) {
  state.validate();
  const Index nt = data.n_t();
  if (basis.Zstar.cols() != nt) throw DimensionError("marginal_loglik: columns of Z*", nt, basis.Zstar.cols());
  const Matrix sigma = build_local_cov(data.response.locations, state.local_params());
  const SpdFactor sigma_factor(sigma);
  Matrix cinv = Matrix::Identity(nt, nt) + basis.Zstar.transpose() * basis.Rstar * basis.Zstar;
  cinv = 0.5 * (cinv + cinv.transpose());
  const SpdFactor cinv_factor(cinv);
  return kron_gaussian_logdensity(residual_matrix(data, state.beta), cinv_factor, cinv_factor.inverse(),
                                  sigma_factor, sigma_factor.inverse());
}

ModelContext::ModelContext(const Dataset& data, std::vector<Location> knots)
    : data_(&data), knots_(std::move(knots)) {
  data.validate();
  if (knots_.empty()) throw DataError("ModelContext: no knots");
  if (static_cast<Index>(knots_.size()) > data.n_r())
    throw DimensionError("ModelContext: knot count must not exceed remote locations", data.n_r(),
                         static_cast<long long>(knots_.size()));
  if (has_duplicates(knots_)) throw DataError("ModelContext: duplicate knots make R* singular");
  local_dist_ = distance_matrix(data.response.locations);
  knot_dist_ = distance_matrix(knots_);
  remote_knot_dist_ = distance_matrix(data.remote.locations, knots_);
  stacked_x_ = data.stacked_design();
  stacked_y_ = data.stacked_response();
}

const ModelContext::LocalFactor& ModelContext::local(const ModelState& s) {
  const std::array<double, 3> key{s.rho_w, s.nu_w, s.nugget_ratio};
  return local_cache_.get(key, [&] {
    const Matrix& corr = corr_cache_.get({s.rho_w, s.nu_w}, [&] {
      return matern_matrix(local_dist_, {1.0, s.rho_w, s.nu_w});
    });
    Matrix unit = corr;
    unit.diagonal().array() += s.nugget_ratio;
    LocalFactor f;
    f.unit = SpdFactor(unit);
    f.unit_inverse = f.unit.inverse();
    f.unit_log_det = f.unit.log_det();
    return f;
  });
}

const ModelContext::RemoteFactor& ModelContext::remote(const ModelState& s) {
  return remote_cache_.get({s.rho_alpha, s.nu_alpha}, [&] {
    const MaternParams unit{1.0, s.rho_alpha, s.nu_alpha};
    RemoteFactor f;
    f.Rbar = matern_matrix(knot_dist_, unit);
    f.cbar = matern_matrix(remote_knot_dist_, unit);
    f.Rbar_factor = SpdFactor(f.Rbar);
    f.Zstar = induce_covariates(data_->remote.values, f.Rbar_factor, f.cbar);
    f.gram = f.Zstar.transpose() * f.Rbar * f.Zstar;
    f.gram = 0.5 * (f.gram + f.gram.transpose());
    return f;
  });
}

const ModelContext::TimeFactor& ModelContext::time(const ModelState& s) {
  const std::array<double, 3> key{s.rho_alpha, s.nu_alpha, s.sigma2_alpha};
  return time_cache_.get(key, [&] {
    const RemoteFactor& r = remote(s);
    const Index nt = data_->n_t();
    TimeFactor f;
    f.cinv = SpdFactor(Matrix(Matrix::Identity(nt, nt) + s.sigma2_alpha * r.gram));
    f.c = f.cinv.inverse();
    return f;
  });
}

ReducedRankBasis ModelContext::basis(const ModelState& s) {
  const RemoteFactor& r = remote(s);
  return {knots_, s.sigma2_alpha * r.Rbar, s.sigma2_alpha * r.cbar, r.Zstar};
}

Matrix ModelContext::local_cov(const ModelState& s) {
  const Matrix& corr = corr_cache_.get({s.rho_w, s.nu_w}, [&] {
    return matern_matrix(local_dist_, {1.0, s.rho_w, s.nu_w});
  });
  Matrix sigma = s.sigma2_w * corr;
  sigma.diagonal().array() += s.nugget_variance();
  return sigma;
}

double ModelContext::unit_quadratic_form(const ModelState& s, const Vector& beta) {
  const LocalFactor& lf = local(s);
  const TimeFactor& tf = time(s);
  if (beta.size() != stacked_x_.cols()) throw DimensionError("beta", stacked_x_.cols(), beta.size());
  const Vector e = stacked_y_ - stacked_x_ * beta;
  return kron_quadratic_form(tf.c, lf.unit_inverse, e);
}

double ModelContext::marginal_loglik(const ModelState& s) {
  const Index ns = data_->n_s(), nt = data_->n_t();
  const LocalFactor& lf = local(s);
  const TimeFactor& tf = time(s);
  const double n = static_cast<double>(ns * nt);
  const double log_det = static_cast<double>(ns) * tf.cinv.log_det() +
                         static_cast<double>(nt) * (static_cast<double>(ns) * std::log(s.sigma2_w) + lf.unit_log_det);
  const double quad = unit_quadratic_form(s, s.beta) / s.sigma2_w;
  const double ll = -0.5 * (n * std::log(2.0 * std::numbers::pi) + log_det + quad);
  if (!std::isfinite(ll))
    throw NumericalError("marginal log-likelihood is not finite (log det " + std::to_string(log_det) +
                         ", quadratic form " + std::to_string(quad) + ")");
  return ll;
}

Matrix draw_response(const std::vector<Matrix>& design, const ModelState& truth, const Matrix& sigma,
                     const Matrix& Rstar, const Matrix& Zstar, Rng& rng, Vector* alpha_out) {
  const Index ns = sigma.rows(), k = Zstar.rows(), nt = Zstar.cols();
  if (static_cast<Index>(design.size()) != nt) throw DimensionError("draw_response: design matrices", nt, static_cast<long long>(design.size()));
  const SpdFactor sigma_factor(sigma);
  Vector alpha = Vector::Zero(ns * k);
  if (truth.sigma2_alpha > 0.0) {
    const SpdFactor r_factor(Rstar);
    alpha = kron_apply(sigma_factor.lower(), r_factor.lower(), Matrix(standard_normal(ns * k, rng))).col(0);
  }
  const Matrix tele = kron_apply(Matrix::Identity(ns, ns), Matrix(Zstar.transpose()), Matrix(alpha));
  Matrix Y(ns, nt);
  for (Index t = 0; t < nt; ++t) {
    Vector y = design[static_cast<std::size_t>(t)] * truth.beta + sigma_factor.lower() * standard_normal(ns, rng);
    for (Index i = 0; i < ns; ++i) y[i] += tele(i * nt + t, 0);
    Y.col(t) = y;
  }
  if (alpha_out) *alpha_out = std::move(alpha);
  return Y;
}

namespace {

// n_t independent draws of a zero-mean Matérn field at locs, n x n_t.
Matrix draw_field(std::span<const Location> locs, const MaternParams& p, Index nt, Rng& rng) {
  Matrix cov = matern_matrix(distance_matrix(locs), p);
  const SpdFactor f(cov);
  const Index n = cov.rows();
  Matrix out(n, nt);
  for (Index t = 0; t < nt; ++t) out.col(t) = f.lower() * standard_normal(n, rng);
  return out;
}

}  // namespace

SimulationResult simulate(const SimulationSpec& spec) {
  if (spec.locations.empty() || spec.remote_locations.empty() || spec.knots.empty())
    throw DataError("simulate: empty geometry");
  if (spec.n_t < 1) throw ConfigError("simulate: n_t must be positive");
  if (has_duplicates(spec.locations)) throw DataError("simulate: duplicate response locations");
  ModelState truth = spec.truth;
  const Index p = (spec.design.intercept ? 1 : 0) + spec.design.n_field_covariates;
  if (truth.beta.size() != p) throw DimensionError("simulate: beta length vs design columns", p, truth.beta.size());
  if (!(truth.sigma2_alpha >= 0.0)) throw ConfigError("simulate: sigma2_alpha must be non-negative");
  {
    ModelState check = truth;
    check.sigma2_alpha = 1.0;
    check.validate();
  }

  Rng rng = make_rng(spec.seed, 0);
  const Index ns = static_cast<Index>(spec.locations.size());
  const Index nr = static_cast<Index>(spec.remote_locations.size());
  const Index nt = spec.n_t;

  SimulationResult out;
  Dataset& d = out.data;
  d.response.locations = spec.locations;
  d.remote.locations = spec.remote_locations;
  for (Index i = 0; i < ns; ++i) d.response.ids.push_back("s" + std::to_string(i + 1));
  for (Index j = 0; j < nr; ++j) d.remote.ids.push_back("r" + std::to_string(j + 1));
  for (Index t = 0; t < nt; ++t) d.time_index.push_back(std::to_string(t + 1));
  if (spec.design.intercept) d.covariate_names.push_back("intercept");
  for (int c = 0; c < spec.design.n_field_covariates; ++c) d.covariate_names.push_back("x" + std::to_string(c + 1));

  std::vector<Matrix> fields;
  for (int c = 0; c < spec.design.n_field_covariates; ++c)
    fields.push_back(draw_field(spec.locations, {1.0, spec.design.field_range_km, 0.5}, nt, rng));
  for (Index t = 0; t < nt; ++t) {
    Matrix X(ns, p);
    Index col = 0;
    if (spec.design.intercept) X.col(col++).setOnes();
    for (const auto& f : fields) X.col(col++) = f.col(t);
    d.design.push_back(std::move(X));
  }

  // Remote anomalies: smooth field, centred per location, scaled by 1/n_r.
  Matrix z = draw_field(spec.remote_locations, {1.0, spec.remote_range_km, 0.5}, nt, rng);
  const Index centre = spec.centre_times > 0 ? std::min(spec.centre_times, nt) : nt;
  const Vector remote_mean = z.leftCols(centre).rowwise().mean();
  z.colwise() -= remote_mean;
  z /= static_cast<double>(nr);
  d.remote.values = z;

  const MaternParams remote_params{truth.sigma2_alpha > 0.0 ? truth.sigma2_alpha : 1.0, truth.rho_alpha, truth.nu_alpha};
  const RemoteMatrices rm = build_remote_matrices(spec.remote_locations, spec.knots, remote_params);
  const Matrix Zstar = induce_covariates(z, rm.Rstar, rm.cstar);
  const Matrix sigma = build_local_cov(spec.locations, truth.local_params());
  d.response.values = draw_response(d.design, truth, sigma, rm.Rstar, Zstar, rng, &out.alpha_star);
  d.validate();
  return out;
}

}  // namespace resp
