#pragma once

#include "resp/covkernels.hpp"
#include "resp/kronlinalg.hpp"
#include "resp/reducedrank.hpp"
#include "resp/types.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace resp {

/// Space-time field: one row per location, one column per time.
struct GridSeries {
  std::vector<std::string> ids;
  std::vector<Location> locations;
  Matrix values;  // n_loc x n_t

  Index n_locations() const { return values.rows(); }
  Index n_times() const { return values.cols(); }
};

/// Response, local design and remote field over a shared ordered time index.
struct Dataset {
  GridSeries response;                       // Y: n_s x n_t
  std::vector<Matrix> design;                // X_t: n_t matrices, each n_s x p
  std::vector<std::string> covariate_names;  // p names
  GridSeries remote;                         // z: n_r x n_t
  std::vector<std::string> time_index;       // n_t labels

  Index n_s() const { return response.n_locations(); }
  Index n_t() const { return response.n_times(); }
  Index n_r() const { return remote.n_locations(); }
  Index p() const { return design.empty() ? 0 : design.front().cols(); }

  /// Throws DataError/DimensionError on inconsistent shapes or non-finite values.
  void validate() const;
  /// Rows of X_t stacked in time order, (n_s n_t) x p.
  Matrix stacked_design() const;
  /// Y_t stacked in time order, length n_s n_t.
  Vector stacked_response() const;
  /// Subset of time columns, in the given order.
  Dataset select_times(const std::vector<Index>& columns) const;
};

/// One iterate of the sampler. The nugget variance is sigma2_w * nugget_ratio.
struct ModelState {
  Vector beta;
  double sigma2_w = 1.0;
  double nugget_ratio = 0.1;
  double sigma2_alpha = 1.0;
  double rho_w = 100.0;
  double rho_alpha = 500.0;
  double nu_w = 0.5;
  double nu_alpha = 0.5;

  double nugget_variance() const { return sigma2_w * nugget_ratio; }
  LocalCovParams local_params() const { return {{sigma2_w, rho_w, nu_w}, nugget_variance()}; }
  MaternParams remote_params() const { return {sigma2_alpha, rho_alpha, nu_alpha}; }
  void validate() const;
};

struct InverseGamma {
  double shape = 2.0;
  double rate = 1.0;

  double log_density(double x) const;
  double mean() const { return shape > 1.0 ? rate / (shape - 1.0) : rate / shape; }
};

struct UniformPrior {
  double lower = 0.0;
  double upper = 1.0;

  bool contains(double x) const { return x > lower && x < upper; }
  double midpoint() const { return 0.5 * (lower + upper); }
};

struct Priors {
  Matrix beta_cov;  // Lambda, p x p
  InverseGamma sigma2_w{2.0, 1.0};
  InverseGamma sigma2_alpha{6.0, 10.0};
  InverseGamma nugget_ratio{2.0, 1.0};
  UniformPrior rho_w{1.0, 600.0};
  UniformPrior rho_alpha{1.0, 2000.0};

  /// beta ~ N(0, 10 I), IG(2,1) for sigma2_w and the nugget ratio, IG(6,10)
  /// for sigma2_alpha, U(1,600) and U(1,2000) for the ranges.
  static Priors defaults(Index p);
  void validate(Index p) const;
};

/// X_t beta + (I ⊗ z*_t^T) alpha*, stacked over time (length n_s n_t).
/// alpha_star is ordered location-major: [alpha*(s_1); ...; alpha*(s_ns)].
Vector assemble_mean(const Dataset& data, const Vector& beta, const Matrix& Zstar, const Vector& alpha_star);

/// Y - X beta as an n_s x n_t matrix (column t is the time-t residual).
Matrix residual_matrix(const Dataset& data, const Vector& beta);

/// log N(vec(E); 0, C^{-1} ⊗ Sigma) from factors of the two small matrices.
/// Column t of E is the residual at time t.
double kron_gaussian_logdensity(const Matrix& residuals, const SpdFactor& cinv, const Matrix& c,
                                const SpdFactor& sigma, const Matrix& sigma_inv);

/// Marginal log-likelihood log N(Y; X(1 ⊗ beta), C^{-1} ⊗ Sigma) with
/// C^{-1} = I + Z*^T R* Z* and Sigma from build_local_cov. Never forms the
/// (n_s n_t)-square covariance.
double marginal_loglik(const Dataset& data, const ModelState& state, const ReducedRankBasis& basis);

/// Cached evaluation of model quantities for one dataset and knot set.
///
/// The unit-scale local correlation R_w, the knot matrices and the induced
/// covariates are cached per range parameter, so updates to variances reuse
/// them. Instances are not thread-safe; copy one per worker.
class ModelContext {
 public:
  ModelContext(const Dataset& data, std::vector<Location> knots);

  const Dataset& data() const { return *data_; }
  const std::vector<Location>& knots() const { return knots_; }
  Index n_knots() const { return static_cast<Index>(knots_.size()); }
  const Matrix& stacked_design() const { return stacked_x_; }
  const Vector& stacked_response() const { return stacked_y_; }

  /// Factors of R_w + nugget_ratio I (the local covariance divided by sigma2_w).
  struct LocalFactor {
    SpdFactor unit;      // chol(R_w + nugget_ratio I)
    Matrix unit_inverse;
    double unit_log_det = 0.0;
  };
  /// Unit-scale knot matrices and the induced covariates, which do not depend
  /// on sigma2_alpha.
  struct RemoteFactor {
    Matrix Rbar;  // R* / sigma2_alpha
    Matrix cbar;  // c* / sigma2_alpha
    SpdFactor Rbar_factor;
    Matrix Zstar;  // k x n_t
    Matrix gram;   // Z*^T Rbar Z*, n_t x n_t
  };
  /// C^{-1} = I + sigma2_alpha * gram, its factor and C itself.
  struct TimeFactor {
    SpdFactor cinv;
    Matrix c;
  };

  const LocalFactor& local(const ModelState& s);
  const RemoteFactor& remote(const ModelState& s);
  const TimeFactor& time(const ModelState& s);

  ReducedRankBasis basis(const ModelState& s);
  /// Sigma = sigma2_w (R_w + nugget_ratio I).
  Matrix local_cov(const ModelState& s);

  double marginal_loglik(const ModelState& s);
  /// e^T [C ⊗ (Sigma/sigma2_w)^{-1}] e for the residual of beta.
  double unit_quadratic_form(const ModelState& s, const Vector& beta);

 private:
  template <class Key, class Value>
  struct TwoSlot {
    std::array<std::optional<std::pair<Key, Value>>, 2> slots;
    int next = 0;
    template <class Build>
    const Value& get(const Key& key, Build&& build) {
      for (auto& slot : slots)
        if (slot && slot->first == key) return slot->second;
      auto& slot = slots[next];
      next = 1 - next;
      slot.emplace(key, build());
      return slot->second;
    }
  };

  const Dataset* data_;
  std::vector<Location> knots_;
  Matrix local_dist_;
  Matrix knot_dist_;
  Matrix remote_knot_dist_;
  Matrix stacked_x_;
  Vector stacked_y_;

  TwoSlot<std::pair<double, double>, Matrix> corr_cache_;                      // (rho_w, nu_w)
  TwoSlot<std::array<double, 3>, LocalFactor> local_cache_;                    // + nugget_ratio
  TwoSlot<std::pair<double, double>, RemoteFactor> remote_cache_;              // (rho_alpha, nu_alpha)
  TwoSlot<std::array<double, 3>, TimeFactor> time_cache_;                      // + sigma2_alpha
};

/// How simulate builds the local design: an intercept column (optional) plus
/// smooth Gaussian-field covariates with unit variance.
struct DesignRule {
  bool intercept = true;
  int n_field_covariates = 1;
  double field_range_km = 300.0;
};

struct SimulationSpec {
  ModelState truth;                // sigma2_alpha may be 0 for no teleconnection
  std::vector<Location> locations;
  std::vector<Location> remote_locations;
  std::vector<Location> knots;
  Index n_t = 10;
  DesignRule design;
  double remote_range_km = 1500.0;  // range of the Matérn field driving z
  Index centre_times = 0;           // remote series centred over the first centre_times columns (0: all)
  std::uint64_t seed = 0;
};

struct SimulationResult {
  Dataset data;
  Vector alpha_star;  // n_s k
};

/// Draws a dataset from the generative model. The remote field is a centred
/// Matérn GP scaled by 1/n_r; alpha* ~ N(0, Sigma ⊗ R*) via chol(Sigma) ⊗ chol(R*).
SimulationResult simulate(const SimulationSpec& spec);

/// Y given a fixed design and remote field: X_t beta + (I ⊗ z*_t^T) alpha* + w_t + eps_t.
/// Returns Y (n_s x n_t) and writes the alpha* draw to alpha_out when non-null.
Matrix draw_response(const std::vector<Matrix>& design, const ModelState& truth, const Matrix& sigma,
                     const Matrix& Rstar, const Matrix& Zstar, Rng& rng, Vector* alpha_out = nullptr);

}  // namespace resp
