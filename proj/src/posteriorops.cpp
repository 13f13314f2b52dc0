#include "resp/posteriorops.hpp"

#include "resp/errors.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

namespace resp {

StreamingMoments::StreamingMoments(Index dim) : mean_(Vector::Zero(dim)), m2_(Matrix::Zero(dim, dim)) {}

Matrix StreamingMoments::covariance() const {
  if (n_ < 2) throw DataError("StreamingMoments: covariance needs at least two vectors");
  return m2_ / static_cast<double>(n_ - 1);
}

void StreamingMoments::update(const Vector& x) {
  if (n_ == 0 && dim() == 0) *this = StreamingMoments(x.size());
  if (x.size() != dim()) throw DimensionError("StreamingMoments::update: vector length", dim(), x.size());
  if (!x.allFinite()) throw NumericalError("StreamingMoments::update: non-finite vector");
  ++n_;
  const Vector delta = x - mean_;
  mean_ += delta / static_cast<double>(n_);
  const double w = static_cast<double>(n_ - 1) / static_cast<double>(n_);
  m2_.noalias() += w * delta * delta.transpose();
}

void StreamingMoments::merge(const StreamingMoments& other) {
  if (other.n_ == 0) {
    if (n_ == 0 && dim() == 0) *this = other;
    else if (other.dim() != 0 && other.dim() != dim())
      throw DimensionError("StreamingMoments::merge: dimension", dim(), other.dim());
    return;
  }
  if (n_ == 0) {
    if (dim() != 0 && dim() != other.dim()) throw DimensionError("StreamingMoments::merge: dimension", dim(), other.dim());
    *this = other;
    return;
  }
  if (other.dim() != dim()) throw DimensionError("StreamingMoments::merge: dimension", dim(), other.dim());
  const double na = static_cast<double>(n_), nb = static_cast<double>(other.n_);
  const double n = na + nb;
  const Vector delta = other.mean_ - mean_;
  mean_ += delta * (nb / n);
  m2_ += other.m2_;
  m2_.noalias() += (na * nb / n) * delta * delta.transpose();
  n_ += other.n_;
}

StreamingMoments moments_update(StreamingMoments acc, const Vector& x) {
  acc.update(x);
  return acc;
}

StreamingMoments moments_merge(const StreamingMoments& a, const StreamingMoments& b) {
  StreamingMoments out = a;
  out.merge(b);
  return out;
}

Matrix AlphaConditional::covariance() const {
  const Index ns = n_s(), k = this->k();
  Matrix out(ns * k, ns * k);
  for (Index i = 0; i < ns; ++i)
    for (Index j = 0; j < ns; ++j) out.block(i * k, j * k, k, k) = sigma(i, j) * M;
  return out;
}

Vector AlphaConditional::draw(Rng& rng) const {
  const Matrix xi = standard_normal(mean.size(), rng);
  return mean + kron_apply(sigma_sqrt, m_sqrt, xi).col(0);
}

namespace {

AlphaConditional build_conditional(Matrix sigma, Matrix sigma_sqrt, const Matrix& rstar_inverse, const Matrix& Zstar,
                                   const Matrix& residuals) {
  const Index k = Zstar.rows(), nt = Zstar.cols(), ns = sigma.rows();
  if (residuals.cols() != nt) throw DimensionError("alpha_conditional: residual times vs columns of Z*", nt, residuals.cols());
  Matrix precision = rstar_inverse + Zstar * Zstar.transpose();
  precision = 0.5 * (precision + precision.transpose());
  const SpdFactor pf(precision);

  AlphaConditional out;
  out.M = pf.inverse();
  out.m_sqrt = pf.solve_lower(Matrix::Identity(k, k)).transpose();
  out.sigma = std::move(sigma);
  out.sigma_sqrt = std::move(sigma_sqrt);

  const Matrix MZ = pf.solve(Zstar);  // column t is M z*_t
  const Matrix one = Matrix::Ones(1, 1);
  out.mean = Vector::Zero(ns * k);
  for (Index t = 0; t < nt; ++t) out.mean += kron_vec_right(Matrix(residuals.col(t)), MZ.col(t), one).col(0);
  return out;
}

}  // namespace

AlphaConditional alpha_conditional(const Dataset& data, const ModelState& state, const ReducedRankBasis& basis) {
  state.validate();
  if (basis.Zstar.cols() != data.n_t()) throw DimensionError("alpha_conditional: columns of Z*", data.n_t(), basis.Zstar.cols());
  Matrix sigma = build_local_cov(data.response.locations, state.local_params());
  const SpdFactor sf(sigma);
  const Matrix rinv = SpdFactor(basis.Rstar).inverse();
  return build_conditional(std::move(sigma), sf.lower(), rinv, basis.Zstar, residual_matrix(data, state.beta));
}

AlphaConditional alpha_conditional(ModelContext& ctx, const ModelState& state) {
  const auto& lf = ctx.local(state);
  const auto& rf = ctx.remote(state);
  const Matrix rinv = rf.Rbar_factor.inverse() / state.sigma2_alpha;
  return build_conditional(ctx.local_cov(state), std::sqrt(state.sigma2_w) * lf.unit.lower(), rinv, rf.Zstar,
                           residual_matrix(ctx.data(), state.beta));
}

Vector AlphaPosterior::sd() const { return cov.diagonal().cwiseMax(0.0).cwiseSqrt(); }

std::vector<bool> AlphaPosterior::significant() const {
  constexpr double kZ = 1.959963984540054;
  const Vector s = sd();
  std::vector<bool> out(static_cast<std::size_t>(mean.size()));
  for (Index i = 0; i < mean.size(); ++i) out[static_cast<std::size_t>(i)] = std::abs(mean[i]) > kZ * s[i];
  return out;
}

std::vector<std::size_t> stride_indices(std::size_t available, Index G) {
  if (G < 1) throw ConfigError("draw count must be positive");
  if (static_cast<std::size_t>(G) > available)
    throw ConfigError("requested " + std::to_string(G) + " draws but only " + std::to_string(available) +
                      " post-burn-in iterations are available");
  std::vector<std::size_t> out(static_cast<std::size_t>(G));
  for (std::size_t g = 0; g < out.size(); ++g) out[g] = g * available / static_cast<std::size_t>(G);
  return out;
}

namespace {

std::vector<std::string> numbered(const char* prefix, Index n) {
  std::vector<std::string> out;
  for (Index i = 0; i < n; ++i) out.push_back(prefix + std::to_string(i + 1));
  return out;
}

// Runs body(g, ctx, slot) over [0, G) in contiguous blocks, one per worker,
// each worker owning a copy of ctx. Rethrows the first error in index order.
template <class Body>
void parallel_blocks(Index G, int workers, const ModelContext& ctx, Body&& body) {
  const int w = static_cast<int>(std::clamp<Index>(workers, 1, G));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(w));
  auto run = [&](int j) {
    try {
      ModelContext local = ctx;
      const Index begin = G * j / w, end = G * (j + 1) / w;
      for (Index g = begin; g < end; ++g) body(g, local, j);
    } catch (...) {
      errors[static_cast<std::size_t>(j)] = std::current_exception();
    }
  };
  if (w == 1) {
    run(0);
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < w; ++j) pool.emplace_back(run, j);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

AlphaPosterior to_posterior(const StreamingMoments& acc, std::vector<std::string> locations,
                            std::vector<std::string> basis) {
  AlphaPosterior out;
  out.mean = acc.mean();
  out.cov = acc.covariance();
  out.cov = 0.5 * (out.cov + out.cov.transpose());
  out.location_ids = std::move(locations);
  out.basis_ids = std::move(basis);
  return out;
}

}  // namespace

ComposeResult compose_alpha(const std::vector<ModelState>& draws, const ModelContext& ctx, const ComposeOptions& opts) {
  if (opts.draws < 2) throw ConfigError("compose: at least two draws are needed for a covariance");
  const auto picks = stride_indices(draws.size(), opts.draws);
  const Index ns = ctx.data().n_s(), k = ctx.n_knots();
  const bool eof = opts.eof_patterns.has_value();
  if (eof && opts.eof_patterns->rows() != ctx.data().n_r())
    throw DimensionError("compose: EOF pattern rows vs remote locations", ctx.data().n_r(), opts.eof_patterns->rows());
  const Index K = eof ? opts.eof_patterns->cols() : 0;

  const int w = static_cast<int>(std::clamp<Index>(opts.workers, 1, opts.draws));
  std::vector<StreamingMoments> knot_acc(static_cast<std::size_t>(w), StreamingMoments(ns * k));
  std::vector<StreamingMoments> eof_acc(static_cast<std::size_t>(w), StreamingMoments(ns * K));
  const Matrix identity = Matrix::Identity(ns, ns);

  parallel_blocks(opts.draws, w, ctx, [&](Index g, ModelContext& local, int slot) {
    const ModelState& s = draws[picks[static_cast<std::size_t>(g)]];
    Rng rng = make_rng(opts.seed, static_cast<std::uint64_t>(g));
    const Vector alpha = alpha_conditional(local, s).draw(rng);
    knot_acc[static_cast<std::size_t>(slot)].update(alpha);
    if (eof) {
      const auto& rf = local.remote(s);
      // T = W^T cbar Rbar^{-1}; the sigma2_alpha factors cancel.
      const Matrix T = rf.Rbar_factor.solve(Matrix(rf.cbar.transpose() * *opts.eof_patterns)).transpose();
      eof_acc[static_cast<std::size_t>(slot)].update(kron_apply(identity, T, Matrix(alpha)).col(0));
    }
  });

  StreamingMoments knots(ns * k), eofs(ns * K);
  for (int j = 0; j < w; ++j) {
    knots.merge(knot_acc[static_cast<std::size_t>(j)]);
    if (eof) eofs.merge(eof_acc[static_cast<std::size_t>(j)]);
  }
  ComposeResult out;
  out.knots = to_posterior(knots, ctx.data().response.ids, numbered("knot", k));
  if (eof) out.eofs = to_posterior(eofs, ctx.data().response.ids, numbered("eof", K));
  return out;
}

AlphaPosterior transform_to_eof(const AlphaPosterior& post, const ReparamMap& map, std::vector<std::string> eof_ids) {
  const Matrix& T = map.T;
  const Index ns = post.n_s(), k = post.k();
  if (T.cols() != k) throw DimensionError("transform_to_eof: columns of T vs knots", k, T.cols());
  if (post.mean.size() != ns * k) throw DimensionError("transform_to_eof: mean length", ns * k, post.mean.size());
  const Matrix I = Matrix::Identity(ns, ns);
  AlphaPosterior out;
  out.mean = kron_apply(I, T, Matrix(post.mean)).col(0);
  const Matrix half = kron_apply(I, T, post.cov);                   // (I ⊗ T) cov
  out.cov = kron_apply(I, T, Matrix(half.transpose()));             // (I ⊗ T) cov (I ⊗ T)^T
  out.cov = 0.5 * (out.cov + out.cov.transpose());
  out.location_ids = post.location_ids;
  out.basis_ids = eof_ids.empty() ? numbered("eof", T.rows()) : std::move(eof_ids);
  if (static_cast<Index>(out.basis_ids.size()) != T.rows())
    throw DimensionError("transform_to_eof: EOF labels", T.rows(), static_cast<long long>(out.basis_ids.size()));
  return out;
}

PredictiveResult predict(const std::vector<ModelState>& draws, const ModelContext& ctx, const Matrix& X_t0,
                         const Vector& z_t0, const PredictOptions& opts) {
  const Dataset& data = ctx.data();
  const Index ns = data.n_s();
  if (X_t0.rows() != ns) throw DimensionError("predict: rows of X_t0 vs locations", ns, X_t0.rows());
  if (X_t0.cols() != data.p()) throw DimensionError("predict: columns of X_t0 vs covariates", data.p(), X_t0.cols());
  if (z_t0.size() != data.n_r()) throw DimensionError("predict: length of z_t0 vs remote locations", data.n_r(), z_t0.size());
  if (!X_t0.allFinite() || !z_t0.allFinite()) throw DataError("predict: non-finite t0 covariates");
  const auto picks = stride_indices(draws.size(), opts.draws);

  PredictiveResult out;
  out.draws.resize(ns, opts.draws);
  parallel_blocks(opts.draws, opts.workers, ctx, [&](Index g, ModelContext& local, int) {
    const ModelState& s = draws[picks[static_cast<std::size_t>(g)]];
    Rng rng = make_rng(opts.seed, static_cast<std::uint64_t>(g));
    const AlphaConditional cond = alpha_conditional(local, s);
    const Vector alpha = cond.draw(rng);
    const auto& rf = local.remote(s);
    const Vector zstar = rf.Rbar_factor.solve(Vector(rf.cbar.transpose() * z_t0));
    const Index k = zstar.size();
    Vector y = X_t0 * s.beta + cond.sigma_sqrt * standard_normal(ns, rng);
    for (Index i = 0; i < ns; ++i) y[i] += zstar.dot(alpha.segment(i * k, k));
    out.draws.col(g) = y;
  });
  out.mean = out.draws.rowwise().mean();
  out.sd = Vector::Zero(ns);
  if (opts.draws > 1)
    out.sd = ((out.draws.colwise() - out.mean).array().square().rowwise().sum() / static_cast<double>(opts.draws - 1))
                 .sqrt();
  return out;
}

}  // namespace resp
