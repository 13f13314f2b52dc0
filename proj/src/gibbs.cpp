#include "resp/gibbs.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <thread>

namespace resp {

void SamplerConfig::validate() const {
  if (n_iter < 1) throw ConfigError("sampler: iterations must be positive");
  if (n_burn < 0 || n_burn >= n_iter) throw ConfigError("sampler: burn must satisfy 0 <= burn < iterations");
  if (thin < 1) throw ConfigError("sampler: thin must be at least 1");
  if (!(target_accept > 0.0 && target_accept < 1.0)) throw ConfigError("sampler: target_accept must lie in (0, 1)");
  if (!(adapt_decay > 0.5 && adapt_decay <= 1.0)) throw ConfigError("sampler: adapt_decay must lie in (0.5, 1]");
  if (!(initial_scale > 0.0)) throw ConfigError("sampler: initial proposal scale must be positive");
  if (checkpoint_every < 1) throw ConfigError("sampler: checkpoint interval must be positive");
  if (halt_after < 0) throw ConfigError("sampler: halt_after must be non-negative");
}

const char* param_name(MhParam p) noexcept {
  switch (p) {
    case MhParam::rho_w: return "rho_w";
    case MhParam::nugget_ratio: return "nugget_ratio";
    case MhParam::sigma2_alpha: return "sigma2_alpha";
    case MhParam::rho_alpha: return "rho_alpha";
  }
  return "unknown";
}

double& param_ref(ModelState& s, MhParam p) {
  switch (p) {
    case MhParam::rho_w: return s.rho_w;
    case MhParam::nugget_ratio: return s.nugget_ratio;
    case MhParam::sigma2_alpha: return s.sigma2_alpha;
    case MhParam::rho_alpha: return s.rho_alpha;
  }
  throw Error(ErrorCategory::internal, "param_ref: unknown parameter");
}

double param_value(const ModelState& s, MhParam p) { return param_ref(const_cast<ModelState&>(s), p); }

Transform Transform::for_param(MhParam p, const Priors& priors) {
  switch (p) {
    case MhParam::rho_w: return logit(priors.rho_w.lower, priors.rho_w.upper);
    case MhParam::rho_alpha: return logit(priors.rho_alpha.lower, priors.rho_alpha.upper);
    default: return log_scale();
  }
}

double Transform::to_unconstrained(double x) const {
  if (!bounded) return std::log(x);
  const double f = (x - lower) / (upper - lower);
  return std::log(f) - std::log1p(-f);
}

double Transform::from_unconstrained(double u) const {
  if (!bounded) return std::exp(u);
  return lower + (upper - lower) / (1.0 + std::exp(-u));
}

double Transform::log_jacobian(double u) const {
  if (!bounded) return u;
  // log[(b - a) s (1 - s)] with s the logistic function of u.
  const double log_s = -std::log1p(std::exp(-u));
  const double log_1ms = -std::log1p(std::exp(u));
  const double lj = std::log(upper - lower) + log_s + log_1ms;
  if (std::isfinite(lj)) return lj;
  return std::log(upper - lower) - std::abs(u);
}

double log_prior(MhParam p, double x, const Priors& priors) {
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  switch (p) {
    case MhParam::rho_w: return priors.rho_w.contains(x) ? -std::log(priors.rho_w.upper - priors.rho_w.lower) : kNegInf;
    case MhParam::rho_alpha:
      return priors.rho_alpha.contains(x) ? -std::log(priors.rho_alpha.upper - priors.rho_alpha.lower) : kNegInf;
    case MhParam::nugget_ratio: return priors.nugget_ratio.log_density(x);
    case MhParam::sigma2_alpha: return priors.sigma2_alpha.log_density(x);
  }
  return kNegInf;
}

void AdaptiveScale::adapt(double accept_prob, double target, double decay) {
  const double gamma = std::pow(static_cast<double>(std::max<long long>(steps, 1)), -decay);
  lambda = std::clamp(lambda * std::exp(gamma * (accept_prob - target)), kMin, kMax);
}

double NormalConditional::log_density(const Vector& x) const {
  const Vector r = precision.lower().transpose() * (x - mean);
  const double n = static_cast<double>(mean.size());
  return -0.5 * (n * std::log(2.0 * std::numbers::pi) - precision.log_det() + r.squaredNorm());
}

Vector NormalConditional::draw(Rng& rng) const {
  return mean + precision.solve_upper(standard_normal(mean.size(), rng));
}

NormalConditional beta_conditional(ModelContext& ctx, const ModelState& state, const Priors& priors) {
  const Matrix& X = ctx.stacked_design();
  const auto& lf = ctx.local(state);
  const auto& tf = ctx.time(state);
  const Matrix sigma_inv = lf.unit_inverse / state.sigma2_w;
  const Matrix W = kron_apply(tf.c, sigma_inv, X);  // (C ⊗ Sigma^{-1}) X
  Matrix precision = SpdFactor(priors.beta_cov).inverse() + X.transpose() * W;
  precision = 0.5 * (precision + precision.transpose());
  NormalConditional out;
  out.precision = SpdFactor(precision);
  out.mean = out.precision.solve(Vector(W.transpose() * ctx.stacked_response()));
  return out;
}

InverseGamma sigma2w_conditional(ModelContext& ctx, const ModelState& state, const Priors& priors) {
  const double n = static_cast<double>(ctx.stacked_response().size());
  const double q = ctx.unit_quadratic_form(state, state.beta);
  if (!(q >= 0.0) || !std::isfinite(q)) throw Error(ErrorCategory::internal, "sigma2_w conditional: invalid quadratic form");
  return {priors.sigma2_w.shape + 0.5 * n, priors.sigma2_w.rate + 0.5 * q};
}

double draw_inverse_gamma(const InverseGamma& ig, Rng& rng) {
  std::gamma_distribution<double> gamma(ig.shape, 1.0 / ig.rate);
  return 1.0 / gamma(rng);
}

Vector update_beta(ModelContext& ctx, const ModelState& state, const Priors& priors, Rng& rng) {
  return beta_conditional(ctx, state, priors).draw(rng);
}

double update_sigma2w(ModelContext& ctx, const ModelState& state, const Priors& priors, Rng& rng) {
  return draw_inverse_gamma(sigma2w_conditional(ctx, state, priors), rng);
}

double Chain::acceptance_rate(MhParam p) const {
  const auto i = static_cast<std::size_t>(p);
  return proposal_counts[i] ? static_cast<double>(accept_counts[i]) / static_cast<double>(proposal_counts[i]) : 0.0;
}

std::vector<ModelState> Chain::post_burn() const {
  std::vector<ModelState> out;
  for (std::size_t i = 0; i < states.size(); ++i)
    if (iterations[i] > n_burn) out.push_back(states[i]);
  return out;
}

ModelState initial_state(const Dataset& data, const Priors& priors, const SamplerConfig& cfg, Rng& rng) {
  ModelState s;
  s.beta = Vector::Zero(data.p());
  s.nu_w = cfg.nu_w;
  s.nu_alpha = cfg.nu_alpha;
  const auto& y = data.response.values;
  const double n = static_cast<double>(y.size());
  const double mean = y.mean();
  s.sigma2_w = n > 1 ? (y.array() - mean).square().sum() / (n - 1.0) : 1.0;
  if (!(s.sigma2_w > 0.0)) s.sigma2_w = 1.0;
  s.nugget_ratio = 0.1;
  s.sigma2_alpha = priors.sigma2_alpha.mean();
  s.rho_w = priors.rho_w.midpoint();
  s.rho_alpha = priors.rho_alpha.midpoint();
  if (cfg.random_init) {
    std::uniform_real_distribution<double> factor(0.5, 1.5);
    s.sigma2_w *= factor(rng);
    s.nugget_ratio *= factor(rng);
    s.sigma2_alpha *= factor(rng);
    s.rho_w = std::clamp(s.rho_w * factor(rng), priors.rho_w.lower + 1e-9, priors.rho_w.upper - 1e-9);
    s.rho_alpha = std::clamp(s.rho_alpha * factor(rng), priors.rho_alpha.lower + 1e-9, priors.rho_alpha.upper - 1e-9);
  }
  return s;
}

double gibbs_sweep(ModelContext& ctx, ModelState& state, const Priors& priors, const SamplerConfig& cfg,
                   std::array<AdaptiveScale, 4>& scales, Chain& tally, Rng& rng) {
  state.beta = update_beta(ctx, state, priors, rng);
  state.sigma2_w = update_sigma2w(ctx, state, priors, rng);
  double ll = ctx.marginal_loglik(state);
  auto loglik = [&ctx](const ModelState& s) { return ctx.marginal_loglik(s); };
  for (MhParam p : kMhOrder) {
    const auto i = static_cast<std::size_t>(p);
    const MhOutcome out = mh_step(p, state, ll, priors, scales[i], cfg, loglik, rng);
    ll = out.loglik;
    ++tally.proposal_counts[i];
    if (out.accepted) ++tally.accept_counts[i];
  }
  return ll;
}

namespace {

using nlohmann::json;

json state_to_json(const ModelState& s) {
  return json{{"beta", std::vector<double>(s.beta.data(), s.beta.data() + s.beta.size())},
              {"sigma2_w", s.sigma2_w},
              {"nugget_ratio", s.nugget_ratio},
              {"sigma2_alpha", s.sigma2_alpha},
              {"rho_w", s.rho_w},
              {"rho_alpha", s.rho_alpha},
              {"nu_w", s.nu_w},
              {"nu_alpha", s.nu_alpha}};
}

ModelState state_from_json(const json& j) {
  ModelState s;
  const auto beta = j.at("beta").get<std::vector<double>>();
  s.beta = Eigen::Map<const Vector>(beta.data(), static_cast<Index>(beta.size()));
  s.sigma2_w = j.at("sigma2_w").get<double>();
  s.nugget_ratio = j.at("nugget_ratio").get<double>();
  s.sigma2_alpha = j.at("sigma2_alpha").get<double>();
  s.rho_w = j.at("rho_w").get<double>();
  s.rho_alpha = j.at("rho_alpha").get<double>();
  s.nu_w = j.at("nu_w").get<double>();
  s.nu_alpha = j.at("nu_alpha").get<double>();
  return s;
}

struct Checkpoint {
  Chain chain;
  ModelState state;
  double loglik = 0.0;
  std::array<AdaptiveScale, 4> scales;
  std::string rng_state;
};

void write_checkpoint(const std::string& path, const Checkpoint& cp) {
  json j;
  j["format"] = "resp-checkpoint-1";
  j["seed"] = cp.chain.rng_seed;
  j["chain_id"] = cp.chain.chain_id;
  j["completed"] = cp.chain.completed;
  j["rng"] = cp.rng_state;
  j["state"] = state_to_json(cp.state);
  j["loglik"] = cp.loglik;
  for (std::size_t i = 0; i < 4; ++i) {
    j["lambda"].push_back(cp.scales[i].lambda);
    j["steps"].push_back(cp.scales[i].steps);
    j["accepts"].push_back(cp.chain.accept_counts[i]);
    j["proposals"].push_back(cp.chain.proposal_counts[i]);
  }
  j["iterations"] = cp.chain.iterations;
  j["logliks"] = cp.chain.logliks;
  j["states"] = json::array();
  for (const auto& s : cp.chain.states) j["states"].push_back(state_to_json(s));

  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw ConfigError("cannot write checkpoint " + tmp);
    out << j.dump();
  }
  std::filesystem::rename(tmp, path);
}

bool read_checkpoint(const std::string& path, Checkpoint& cp) {
  std::ifstream in(path);
  if (!in) return false;
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError("checkpoint " + path + " is unreadable: " + e.what());
  }
  if (j.value("format", "") != "resp-checkpoint-1") throw DataError("checkpoint " + path + " has an unknown format");
  if (j.at("seed").get<std::uint64_t>() != cp.chain.rng_seed || j.at("chain_id").get<int>() != cp.chain.chain_id)
    return false;
  cp.chain.completed = j.at("completed").get<int>();
  cp.rng_state = j.at("rng").get<std::string>();
  cp.state = state_from_json(j.at("state"));
  cp.loglik = j.at("loglik").get<double>();
  for (std::size_t i = 0; i < 4; ++i) {
    cp.scales[i].lambda = j.at("lambda").at(i).get<double>();
    cp.scales[i].steps = j.at("steps").at(i).get<long long>();
    cp.chain.accept_counts[i] = j.at("accepts").at(i).get<long long>();
    cp.chain.proposal_counts[i] = j.at("proposals").at(i).get<long long>();
  }
  cp.chain.iterations = j.at("iterations").get<std::vector<int>>();
  cp.chain.logliks = j.at("logliks").get<std::vector<double>>();
  cp.chain.states.clear();
  for (const auto& s : j.at("states")) cp.chain.states.push_back(state_from_json(s));
  return true;
}

std::string rng_to_string(const Rng& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

}  // namespace

Chain run_chain(ModelContext& ctx, const Priors& priors, const SamplerConfig& cfg, int chain_id) {
  cfg.validate();
  priors.validate(ctx.data().p());

  Checkpoint cp;
  cp.chain.rng_seed = cfg.seed;
  cp.chain.chain_id = chain_id;
  cp.chain.n_burn = cfg.n_burn;
  Rng rng = make_rng(cfg.seed, static_cast<std::uint64_t>(chain_id));

  const bool resumed = !cfg.checkpoint_path.empty() && read_checkpoint(cfg.checkpoint_path, cp);
  if (resumed) {
    std::istringstream is(cp.rng_state);
    is >> rng;
    if (!is) throw DataError("checkpoint " + cfg.checkpoint_path + " has a corrupt generator state");
  } else {
    cp.state = initial_state(ctx.data(), priors, cfg, rng);
    cp.state.validate();
    cp.loglik = ctx.marginal_loglik(cp.state);
    for (auto& s : cp.scales) s.lambda = cfg.initial_scale;
  }

  Chain& chain = cp.chain;
  const int stop = cfg.halt_after > 0 ? std::min(cfg.n_iter, chain.completed + cfg.halt_after) : cfg.n_iter;
  for (int it = chain.completed + 1; it <= stop; ++it) {
    cp.loglik = gibbs_sweep(ctx, cp.state, priors, cfg, cp.scales, chain, rng);
    if (it % cfg.thin == 0) {
      chain.iterations.push_back(it);
      chain.states.push_back(cp.state);
      chain.logliks.push_back(cp.loglik);
    }
    chain.completed = it;
    if (!cfg.checkpoint_path.empty() && (it % cfg.checkpoint_every == 0 || it == stop)) {
      cp.rng_state = rng_to_string(rng);
      write_checkpoint(cfg.checkpoint_path, cp);
    }
  }
  for (std::size_t i = 0; i < 4; ++i) chain.proposal_scales[i] = cp.scales[i].lambda;
  return chain;
}

std::vector<Chain> run_chains(const ModelContext& ctx, const Priors& priors, const SamplerConfig& cfg, int n_chains,
                              int workers) {
  if (n_chains < 1) throw ConfigError("sampler: chain count must be positive");
  std::vector<Chain> chains(static_cast<std::size_t>(n_chains));
  std::vector<std::exception_ptr> errors(chains.size());
  std::atomic<int> next{0};
  auto work = [&] {
    ModelContext local = ctx;
    for (int c = next++; c < n_chains; c = next++) {
      try {
        SamplerConfig chain_cfg = cfg;
        if (!cfg.checkpoint_path.empty() && c > 0) chain_cfg.checkpoint_path += "." + std::to_string(c);
        chains[static_cast<std::size_t>(c)] = run_chain(local, priors, chain_cfg, c);
      } catch (...) {
        errors[static_cast<std::size_t>(c)] = std::current_exception();
      }
    }
  };
  const int n_threads = std::clamp(workers, 1, n_chains);
  if (n_threads == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return chains;
}

std::pair<double, double> hpd_interval(std::vector<double> sample, double mass) {
  if (sample.empty()) throw DataError("hpd_interval: empty sample");
  if (!(mass > 0.0 && mass <= 1.0)) throw ConfigError("hpd_interval: mass must lie in (0, 1]");
  std::sort(sample.begin(), sample.end());
  const std::size_t n = sample.size();
  const std::size_t width = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(mass * static_cast<double>(n))));
  std::size_t best = 0;
  for (std::size_t i = 1; i + width <= n; ++i)
    if (sample[i + width - 1] - sample[i] < sample[best + width - 1] - sample[best]) best = i;
  return {sample[best], sample[best + width - 1]};
}

}  // namespace resp
