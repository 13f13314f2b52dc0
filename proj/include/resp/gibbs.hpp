#pragma once

#include "resp/errors.hpp"
#include "resp/resplike.hpp"
#include "resp/types.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace resp {

struct SamplerConfig {
  int n_iter = 5000;
  int n_burn = 1000;
  int thin = 1;
  double target_accept = 0.44;
  double adapt_decay = 0.7;
  double initial_scale = 0.1;  // starting proposal variance on the transformed scale
  std::uint64_t seed = 0;
  bool random_init = false;     // perturb the default start by up to +-50%
  int checkpoint_every = 500;
  std::string checkpoint_path;  // empty disables checkpointing
  int halt_after = 0;           // stop (with a checkpoint) after this many iterations; 0 runs to n_iter
  double nu_w = 0.5;            // fixed smoothness carried by every state
  double nu_alpha = 0.5;

  void validate() const;
};

/// Metropolis-updated parameters in per-iteration update order.
enum class MhParam : int { rho_w = 0, nugget_ratio = 1, sigma2_alpha = 2, rho_alpha = 3 };
inline constexpr std::array<MhParam, 4> kMhOrder{MhParam::rho_w, MhParam::nugget_ratio, MhParam::sigma2_alpha,
                                                 MhParam::rho_alpha};
const char* param_name(MhParam p) noexcept;

double& param_ref(ModelState& s, MhParam p);
double param_value(const ModelState& s, MhParam p);

/// Log scale for positive parameters, logit rescaled to (lower, upper) for ranges.
struct Transform {
  bool bounded = false;
  double lower = 0.0;
  double upper = 1.0;

  static Transform log_scale() { return {}; }
  static Transform logit(double lower, double upper) { return {true, lower, upper}; }
  static Transform for_param(MhParam p, const Priors& priors);

  double to_unconstrained(double x) const;
  double from_unconstrained(double u) const;
  /// log |dx/du| at u.
  double log_jacobian(double u) const;
};

/// Log prior density of one Metropolis parameter on its natural scale.
double log_prior(MhParam p, double x, const Priors& priors);

/// Robbins-Monro scaling of the proposal variance.
struct AdaptiveScale {
  double lambda = 0.1;
  long long steps = 0;

  static constexpr double kMin = 1e-6;
  static constexpr double kMax = 1e3;

  /// lambda <- lambda exp(gamma (accept_prob - target)), gamma = steps^-decay.
  void adapt(double accept_prob, double target, double decay);
};

struct MhOutcome {
  double value = 0.0;  // natural-scale value after the step
  double loglik = 0.0;
  double accept_prob = 0.0;
  bool accepted = false;
};

/// One random-walk Metropolis step on the unconstrained scale.
///
/// log_target(u) must return the full log density in u (Jacobian included);
/// non-finite values are rejected. The proposal is N(u, lambda).
template <class LogTarget>
double rw_metropolis(double& u, double& log_current, double lambda, LogTarget&& log_target, Rng& rng,
                     bool* accepted = nullptr) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double proposal = u + std::sqrt(lambda) * normal(rng);
  const double log_prop = log_target(proposal);
  double prob = 0.0;
  if (std::isfinite(log_prop)) prob = log_prop >= log_current ? 1.0 : std::exp(log_prop - log_current);
  const bool take = unif(rng) < prob;
  if (take) {
    u = proposal;
    log_current = log_prop;
  }
  if (accepted) *accepted = take;
  return prob;
}

/// Adaptive Metropolis update of one covariance parameter of state.
///
/// loglik(state) gives the marginal log-likelihood; NumericalError or a
/// non-finite value rejects the proposal. current_loglik must hold the
/// log-likelihood of the incoming state. The scale adapts toward target.
template <class LogLik>
MhOutcome mh_step(MhParam param, ModelState& state, double current_loglik, const Priors& priors,
                  AdaptiveScale& scale, const SamplerConfig& cfg, LogLik&& loglik, Rng& rng) {
  const Transform tr = Transform::for_param(param, priors);
  double& slot = param_ref(state, param);
  const double original = slot;
  double u = tr.to_unconstrained(original);
  double log_current = current_loglik + log_prior(param, original, priors) + tr.log_jacobian(u);
  double proposal_ll = current_loglik;

  auto target = [&](double v) {
    const double x = tr.from_unconstrained(v);
    const double lp = log_prior(param, x, priors);
    if (!std::isfinite(lp) || !(x > 0.0)) return -std::numeric_limits<double>::infinity();
    slot = x;
    double ll;
    try {
      ll = loglik(static_cast<const ModelState&>(state));
    } catch (const NumericalError&) {
      ll = -std::numeric_limits<double>::infinity();
    }
    slot = original;
    proposal_ll = ll;
    return ll + lp + tr.log_jacobian(v);
  };

  MhOutcome out;
  out.accept_prob = rw_metropolis(u, log_current, scale.lambda, target, rng, &out.accepted);
  slot = out.accepted ? tr.from_unconstrained(u) : original;
  out.value = slot;
  out.loglik = out.accepted ? proposal_ll : current_loglik;
  ++scale.steps;
  scale.adapt(out.accept_prob, cfg.target_accept, cfg.adapt_decay);
  return out;
}

/// Gaussian full conditional of beta: precision Lambda^{-1} + X^T (C ⊗ Sigma^{-1}) X.
struct NormalConditional {
  Vector mean;
  SpdFactor precision;

  Matrix covariance() const { return precision.inverse(); }
  double log_density(const Vector& x) const;
  Vector draw(Rng& rng) const;
};

NormalConditional beta_conditional(ModelContext& ctx, const ModelState& state, const Priors& priors);
/// Inverse-gamma full conditional of sigma2_w given beta and the correlation parameters.
InverseGamma sigma2w_conditional(ModelContext& ctx, const ModelState& state, const Priors& priors);

Vector update_beta(ModelContext& ctx, const ModelState& state, const Priors& priors, Rng& rng);
double update_sigma2w(ModelContext& ctx, const ModelState& state, const Priors& priors, Rng& rng);
double draw_inverse_gamma(const InverseGamma& ig, Rng& rng);

struct Chain {
  std::vector<int> iterations;      // 1-based iteration of each kept state
  std::vector<ModelState> states;
  std::vector<double> logliks;
  std::array<long long, 4> accept_counts{};
  std::array<long long, 4> proposal_counts{};
  std::array<double, 4> proposal_scales{};
  std::uint64_t rng_seed = 0;
  int chain_id = 0;
  int n_burn = 0;
  int completed = 0;  // iterations run so far

  double acceptance_rate(MhParam p) const;
  /// Kept states with iteration > n_burn.
  std::vector<ModelState> post_burn() const;
};

/// Default starting point: beta = 0, sigma2_w = var(Y), nugget ratio 0.1,
/// sigma2_alpha at its prior mean and ranges at prior midpoints.
ModelState initial_state(const Dataset& data, const Priors& priors, const SamplerConfig& cfg, Rng& rng);

/// One Gibbs sweep: beta, sigma2_w, then the Metropolis steps in kMhOrder.
/// Returns the log-likelihood of the final state.
double gibbs_sweep(ModelContext& ctx, ModelState& state, const Priors& priors, const SamplerConfig& cfg,
                   std::array<AdaptiveScale, 4>& scales, Chain& tally, Rng& rng);

/// Runs one chain from (seed, chain_id). With a checkpoint path the full
/// sampler state is saved every checkpoint_every iterations and an existing
/// checkpoint for the same (seed, chain_id) is resumed.
Chain run_chain(ModelContext& ctx, const Priors& priors, const SamplerConfig& cfg, int chain_id = 0);

/// Independent chains on private copies of ctx, spread over workers threads.
std::vector<Chain> run_chains(const ModelContext& ctx, const Priors& priors, const SamplerConfig& cfg, int n_chains,
                              int workers);

/// Shortest interval containing a fraction mass of the sample.
std::pair<double, double> hpd_interval(std::vector<double> sample, double mass = 0.95);

}  // namespace resp
