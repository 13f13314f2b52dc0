#pragma once

#include "resp/kronlinalg.hpp"
#include "resp/reducedrank.hpp"
#include "resp/resplike.hpp"
#include "resp/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace resp {

/// Running mean and co-moment matrix of d-vectors; two accumulators merge
/// exactly as if every vector had been absorbed by one.
class StreamingMoments {
 public:
  explicit StreamingMoments(Index dim = 0);

  Index dim() const { return mean_.size(); }
  long long count() const { return n_; }
  const Vector& mean() const { return mean_; }
  const Matrix& m2() const { return m2_; }
  /// m2 / (n - 1); requires n >= 2.
  Matrix covariance() const;

  void update(const Vector& x);
  void merge(const StreamingMoments& other);

 private:
  long long n_ = 0;
  Vector mean_;
  Matrix m2_;
};

StreamingMoments moments_update(StreamingMoments acc, const Vector& x);
StreamingMoments moments_merge(const StreamingMoments& a, const StreamingMoments& b);

/// Full conditional of alpha* (location-major): N(mean, Sigma ⊗ M) with
/// M = (R*^{-1} + Z* Z*^T)^{-1}.
struct AlphaConditional {
  Vector mean;
  Matrix sigma;         // n_s x n_s
  Matrix M;             // k x k
  Matrix sigma_sqrt;    // lower Cholesky factor of Sigma
  Matrix m_sqrt;        // square root of M (L^{-T} for the precision factor L)

  Index n_s() const { return sigma.rows(); }
  Index k() const { return M.rows(); }
  /// Dense Sigma ⊗ M; for tests and small problems.
  Matrix covariance() const;
  /// mean + (sqrt(Sigma) ⊗ sqrt(M)) xi.
  Vector draw(Rng& rng) const;
};

AlphaConditional alpha_conditional(const Dataset& data, const ModelState& state, const ReducedRankBasis& basis);
AlphaConditional alpha_conditional(ModelContext& ctx, const ModelState& state);

/// Normal approximation to a location-major coefficient vector.
struct AlphaPosterior {
  Vector mean;  // n_s * k
  Matrix cov;
  std::vector<std::string> location_ids;
  std::vector<std::string> basis_ids;  // knot or EOF labels

  Index n_s() const { return static_cast<Index>(location_ids.size()); }
  Index k() const { return static_cast<Index>(basis_ids.size()); }
  Vector sd() const;
  /// 95% central interval excludes zero.
  std::vector<bool> significant() const;
};

struct ComposeOptions {
  Index draws = 1000;  // G
  int workers = 1;
  std::uint64_t seed = 0;
  /// When set, also summarise T alpha*(s) per draw, T built from that draw's
  /// remote parameters and these EOF patterns (n_r x K).
  std::optional<Matrix> eof_patterns;
};

struct ComposeResult {
  AlphaPosterior knots;
  std::optional<AlphaPosterior> eofs;
};

/// Parameter draws taken by uniform stride: index floor(g * n / G).
std::vector<std::size_t> stride_indices(std::size_t available, Index G);

/// Composition sampling of alpha* over parameter draws. Each draw g uses the
/// generator make_rng(seed, g); each worker folds a contiguous block of draws
/// into its own accumulator and the blocks are merged in order, so the
/// result does not depend on the worker count beyond rounding.
ComposeResult compose_alpha(const std::vector<ModelState>& draws, const ModelContext& ctx,
                            const ComposeOptions& opts);

/// mean -> (I ⊗ T) mean, cov -> (I ⊗ T) cov (I ⊗ T)^T.
AlphaPosterior transform_to_eof(const AlphaPosterior& post, const ReparamMap& map,
                                std::vector<std::string> eof_ids = {});

struct PredictiveResult {
  Matrix draws;  // n_s x G
  Vector mean;
  Vector sd;
};

struct PredictOptions {
  Index draws = 1000;
  int workers = 1;
  std::uint64_t seed = 0;
};

/// Posterior predictive of Y at a new time from covariates X_t0 (n_s x p)
/// and the remote field z_t0 (n_r).
PredictiveResult predict(const std::vector<ModelState>& draws, const ModelContext& ctx, const Matrix& X_t0,
                         const Vector& z_t0, const PredictOptions& opts);

}  // namespace resp
