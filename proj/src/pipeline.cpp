#include "resp/pipeline.hpp"

#include "resp/assess.hpp"
#include "resp/errors.hpp"
#include "resp/io.hpp"
#include "resp/posteriorops.hpp"
#include "resp/reducedrank.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdlib>
#include <set>
#include <sstream>
#include <tuple>

namespace resp {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------- RunConfig

RunConfig RunConfig::from_file(const fs::path& path) {
  if (!fs::exists(path)) throw ConfigError("config file " + path.string() + " does not exist");
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(path.string(), tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  RunConfig cfg;
  cfg.base_dir_ = path.has_parent_path() ? path.parent_path() : fs::path(".");
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ConfigError("config " + path.string() + ": key '" + section + "' outside a section");
    for (const auto& [key, value] : body) cfg.values_[section + "." + key] = value.get_value<std::string>();
  }
  return cfg;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (key.find('.') == std::string::npos || key.front() == '.' || key.back() == '.')
    throw ConfigError("config override '" + key + "' must have the form section.key");
  values_[key] = value;
}

std::optional<std::string> RunConfig::find(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::string RunConfig::get(const std::string& key, const std::string& fallback) const {
  return find(key).value_or(fallback);
}

std::string RunConfig::require(const std::string& key) const {
  const auto v = find(key);
  if (!v || v->empty()) throw ConfigError("missing required setting " + key);
  return *v;
}

double RunConfig::get_double(const std::string& key, double fallback) const {
  const auto v = find(key);
  if (!v) return fallback;
  try {
    return io::parse_double(*v, "config " + key);
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
}

long long RunConfig::get_int(const std::string& key, long long fallback) const {
  const auto v = find(key);
  if (!v) return fallback;
  try {
    return io::parse_int(*v, "config " + key);
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
}

bool RunConfig::get_bool(const std::string& key, bool fallback) const {
  const auto v = find(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes" || *v == "on") return true;
  if (*v == "false" || *v == "0" || *v == "no" || *v == "off") return false;
  throw ConfigError("config " + key + ": expected true or false, got '" + *v + "'");
}

std::vector<std::string> RunConfig::get_list(const std::string& key) const {
  std::vector<std::string> out;
  const auto v = find(key);
  if (!v) return out;
  std::stringstream ss(*v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t"), e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

fs::path RunConfig::get_path(const std::string& key) const {
  const fs::path p = require(key);
  return p.is_absolute() ? p : base_dir_ / p;
}

std::string RunConfig::canonical() const {
  static const std::set<std::string> kIgnored{"run.workers", "compose.workers", "predict.workers", "validate.workers",
                                              "compose.fit_dir", "predict.fit_dir"};
  std::string out;
  for (const auto& [k, v] : values_)
    if (!kIgnored.count(k)) out += k + "=" + v + "\n";
  return out;
}

fs::path Session::out() const {
  if (output_dir) return *output_dir;
  if (const char* env = std::getenv("RESP_OUT_DIR"); env && *env) return env;
  return ".";
}

// ---------------------------------------------------------------- helpers

namespace {

std::uint64_t require_seed(const RunConfig& cfg, const char* command) {
  const auto v = cfg.find("run.seed");
  if (!v) throw ConfigError(std::string(command) + " requires a seed (--seed or [run] seed)");
  const long long s = cfg.get_int("run.seed", 0);
  if (s < 0) throw ConfigError("seed must be non-negative");
  return static_cast<std::uint64_t>(s);
}

int workers(const RunConfig& cfg, const std::string& section) {
  const long long w = cfg.get_int(section + ".workers", cfg.get_int("run.workers", 1));
  if (w < 1) throw ConfigError("workers must be at least 1");
  return static_cast<int>(w);
}

json base_manifest(const char* command, const RunConfig& cfg) {
  json m;
  m["tool"] = "resp";
  m["version"] = RESP_VERSION_STRING;
  m["subcommand"] = command;
  m["config_hash"] = io::sha256_hex(cfg.canonical());
  m["config"] = json::object();
  std::istringstream lines(cfg.canonical());
  for (std::string line; std::getline(lines, line);) {
    const auto eq = line.find('=');
    m["config"][line.substr(0, eq)] = line.substr(eq + 1);
  }
  return m;
}

void finish_manifest(json& m, const fs::path& out, const std::vector<std::string>& files, const std::string& name) {
  m["outputs"] = json::object();
  for (const auto& f : files) m["outputs"][f] = io::sha256_file(out / f);
  io::write_text(out / name, m.dump(2) + "\n");
}

json read_manifest(const fs::path& path, const char* needed_by) {
  if (!fs::exists(path))
    throw ConfigError(std::string(needed_by) + " requires a prior fit manifest; " + path.string() + " not found");
  try {
    return json::parse(io::read_text(path));
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

// Refuses to continue when the fit was made on different inputs.
void check_fit_matches(const json& manifest, const IngestResult& in, const fs::path& path) {
  const std::string fitted = manifest.value("data_hash", "");
  if (fitted == in.data_hash) return;
  std::string diff;
  const json inputs = manifest.value("inputs", json::object());
  std::set<std::string> roles;
  for (const auto& [role, hash] : inputs.items()) roles.insert(role);
  for (const auto& [role, hash] : in.input_hashes) roles.insert(role);
  for (const auto& role : roles) {
    const std::string a = inputs.contains(role) ? inputs[role].get<std::string>() : "(absent)";
    const auto it = in.input_hashes.find(role);
    const std::string b = it == in.input_hashes.end() ? "(absent)" : it->second;
    if (a != b) diff += "; " + role + ": fit " + a.substr(0, 16) + " vs current " + b.substr(0, 16);
  }
  throw DataError("manifest mismatch with " + path.string() + ": data hash fit " + fitted.substr(0, 16) +
                  " vs current " + in.data_hash.substr(0, 16) + diff);
}

fs::path fit_dir(const Session& s, const char* section) {
  const auto v = s.config.find(std::string(section) + ".fit_dir");
  if (!v) return s.out();
  const fs::path p = *v;
  return p.is_absolute() ? p : s.config.base_dir() / p;
}

std::vector<ModelState> load_post_burn(const json& manifest, const fs::path& dir, Index p, double nu_w, double nu_alpha) {
  const int burn = manifest.at("sampler").at("burn").get<int>();
  std::vector<ModelState> out;
  for (const auto& file : manifest.at("chains")) {
    for (auto& [iter, state] : read_chain_csv(dir / file.get<std::string>(), p, nu_w, nu_alpha))
      if (iter > burn) out.push_back(std::move(state));
  }
  if (out.empty()) throw DataError("fit in " + dir.string() + " has no post-burn-in draws");
  return out;
}

std::pair<double, double> model_nu(const RunConfig& cfg) {
  return {cfg.get_double("model.nu_w", 0.5), cfg.get_double("model.nu_alpha", 0.5)};
}

Matrix select_column(const io::SeriesTable& t, const std::string& label, const std::string& what) {
  const auto it = std::find(t.times.begin(), t.times.end(), label);
  if (it == t.times.end()) throw DataError("missing t0 " + what + " for time '" + label + "'");
  return t.values.col(it - t.times.begin());
}

BoundingBox parse_bbox(const std::vector<std::string>& v, const std::string& key) {
  if (v.size() != 4) throw ConfigError(key + ": expected lon_min,lon_max,lat_min,lat_max");
  auto num = [&](std::size_t i) { return io::parse_double(v[i], "config " + key); };
  return {num(0), num(1), num(2), num(3)};
}

}  // namespace

// ---------------------------------------------------------------- ingest

IngestResult ingest(const RunConfig& cfg, bool apply_standardization) {
  IngestResult out;
  Dataset raw;
  std::string fingerprint;
  auto track = [&](const std::string& role, const fs::path& path) {
    const std::string h = io::sha256_file(path);
    out.input_hashes[role] = h;
    fingerprint += role + ":" + h + "\n";
  };

  const fs::path loc_path = cfg.get_path("data.locations");
  const io::LocationTable locs = io::read_locations(loc_path);
  track("locations", loc_path);
  raw.response.ids = locs.ids;
  raw.response.locations = locs.locations;

  const fs::path resp_path = cfg.get_path("data.response");
  io::SeriesTable y = io::read_series(resp_path, locs.ids);
  track("response", resp_path);
  raw.response.values = std::move(y.values);
  raw.time_index = y.times;

  const bool intercept = cfg.get_bool("data.intercept", true);
  if (intercept) raw.covariate_names.push_back("intercept");
  std::vector<Matrix> columns;
  int c = 0;
  for (const auto& file : cfg.get_list("data.covariates")) {
    const fs::path p = file.front() == '/' ? fs::path(file) : cfg.base_dir() / file;
    io::SeriesTable x = io::read_series(p, locs.ids);
    if (x.times != raw.time_index)
      throw DataError("time index of " + p.string() + " differs from the response: " + io::diff_labels(raw.time_index, x.times));
    track("covariate_" + std::to_string(++c), p);
    raw.covariate_names.push_back(p.stem().string());
    columns.push_back(std::move(x.values));
  }
  if (raw.covariate_names.empty()) throw ConfigError("the design has no columns: enable data.intercept or list data.covariates");
  const Index ns = static_cast<Index>(locs.ids.size()), nt = raw.response.values.cols();
  const Index p = static_cast<Index>(raw.covariate_names.size());
  for (Index t = 0; t < nt; ++t) {
    Matrix X(ns, p);
    Index j = 0;
    if (intercept) X.col(j++).setOnes();
    for (const auto& col : columns) X.col(j++) = col.col(t);
    raw.design.push_back(std::move(X));
  }

  const fs::path rloc_path = cfg.get_path("data.remote_locations");
  const io::LocationTable rlocs = io::read_locations(rloc_path);
  track("remote_locations", rloc_path);
  const fs::path remote_path = cfg.get_path("data.remote");
  io::SeriesTable z = io::read_series(remote_path, rlocs.ids);
  track("remote", remote_path);
  if (z.times != raw.time_index)
    throw DataError("time index of " + remote_path.string() + " differs from the response: " +
                    io::diff_labels(raw.time_index, z.times));
  raw.remote.ids = rlocs.ids;
  raw.remote.locations = rlocs.locations;
  raw.remote.values = std::move(z.values);
  raw.validate();

  if (cfg.has("data.knots")) {
    const fs::path kp = cfg.get_path("data.knots");
    const io::LocationTable k = io::read_locations(kp);
    track("knots", kp);
    out.knots = k.locations;
    out.knot_ids = k.ids;
  } else if (cfg.has("data.knot_grid")) {
    const auto v = cfg.get_list("data.knot_grid");
    if (v.size() != 5) throw ConfigError("data.knot_grid: expected lon_min,lon_max,lat_min,lat_max,k");
    const BoundingBox box = parse_bbox({v[0], v[1], v[2], v[3]}, "data.knot_grid");
    out.knots = place_knot_grid(box, static_cast<int>(io::parse_int(v[4], "config data.knot_grid")));
    for (std::size_t i = 0; i < out.knots.size(); ++i) out.knot_ids.push_back("knot" + std::to_string(i + 1));
    fingerprint += "knot_grid:" + cfg.require("data.knot_grid") + "\n";
  } else {
    throw ConfigError("set data.knots or data.knot_grid");
  }

  const bool standardize = cfg.get_bool("data.standardize", true);
  std::vector<Index> train;
  const auto labels = cfg.get_list("data.train_times");
  if (labels.empty()) {
    for (Index t = 0; t < nt; ++t) train.push_back(t);
  } else {
    for (const auto& l : labels) {
      const auto it = std::find(raw.time_index.begin(), raw.time_index.end(), l);
      if (it == raw.time_index.end()) throw ConfigError("data.train_times: unknown time '" + l + "'");
      train.push_back(it - raw.time_index.begin());
    }
  }
  fingerprint += "standardize:" + std::string(standardize ? "1" : "0") + "\n";
  fingerprint += "intercept:" + std::string(intercept ? "1" : "0") + "\n";
  fingerprint += "train_times:" + cfg.get("data.train_times", "") + "\n";
  out.data_hash = io::sha256_hex(fingerprint);

  if (!apply_standardization) {
    out.pipeline = AnomalyPipeline::passthrough();
    out.data = std::move(raw);
    return out;
  }
  Dataset scoped = labels.empty() ? std::move(raw) : raw.select_times(train);
  if (standardize) {
    std::vector<Index> all(static_cast<std::size_t>(scoped.n_t()));
    for (Index t = 0; t < scoped.n_t(); ++t) all[static_cast<std::size_t>(t)] = t;
    out.pipeline = AnomalyPipeline::fit(scoped, all);
    out.data = out.pipeline.apply(scoped);
  } else {
    out.pipeline = AnomalyPipeline::passthrough();
    const auto& v = scoped.response.values;
    const double scale = std::max(v.cwiseAbs().maxCoeff(), 1e-300);
    if (v.rowwise().mean().cwiseAbs().maxCoeff() > 1e-8 * scale)
      warn("data.standardize is off and the response is not centred per location; using it as given");
    out.data = std::move(scoped);
  }
  return out;
}

Priors priors_from_config(const RunConfig& cfg, Index p) {
  Priors pr = Priors::defaults(p);
  pr.beta_cov = cfg.get_double("model.beta_prior_var", 10.0) * Matrix::Identity(p, p);
  pr.sigma2_w = {cfg.get_double("model.sigma2_w_shape", 2.0), cfg.get_double("model.sigma2_w_rate", 1.0)};
  pr.sigma2_alpha = {cfg.get_double("model.sigma2_alpha_shape", 6.0), cfg.get_double("model.sigma2_alpha_rate", 10.0)};
  pr.nugget_ratio = {cfg.get_double("model.nugget_shape", 2.0), cfg.get_double("model.nugget_rate", 1.0)};
  pr.rho_w = {cfg.get_double("model.rho_w_min", 1.0), cfg.get_double("model.rho_w_max", 600.0)};
  pr.rho_alpha = {cfg.get_double("model.rho_alpha_min", 1.0), cfg.get_double("model.rho_alpha_max", 2000.0)};
  pr.validate(p);
  return pr;
}

SamplerConfig sampler_from_config(const RunConfig& cfg, const std::string& section) {
  auto key = [&](const char* name) {
    const std::string own = section + "." + name;
    return cfg.has(own) ? own : std::string("sampler.") + name;
  };
  SamplerConfig sc;
  sc.n_iter = static_cast<int>(cfg.get_int(key("iterations"), sc.n_iter));
  sc.n_burn = static_cast<int>(cfg.get_int(key("burn"), sc.n_burn));
  sc.thin = static_cast<int>(cfg.get_int(key("thin"), sc.thin));
  sc.target_accept = cfg.get_double(key("target_accept"), sc.target_accept);
  sc.adapt_decay = cfg.get_double(key("adapt_decay"), sc.adapt_decay);
  sc.initial_scale = cfg.get_double(key("initial_scale"), sc.initial_scale);
  sc.checkpoint_every = static_cast<int>(cfg.get_int(key("checkpoint_every"), sc.checkpoint_every));
  const std::string init = cfg.get(key("init"), "default");
  if (init != "default" && init != "random") throw ConfigError("sampler.init must be default or random");
  sc.random_init = init == "random";
  sc.validate();
  return sc;
}

// ---------------------------------------------------------------- chain CSV

void write_chain_csv(const fs::path& path, const Chain& chain, const std::vector<std::string>& covariates) {
  std::string text = "iter";
  for (const auto& c : covariates) text += ",beta_" + c;
  text += ",sigma2_w,nugget_ratio,sigma2_alpha,rho_w,rho_alpha,loglik\n";
  for (std::size_t i = 0; i < chain.states.size(); ++i) {
    const ModelState& s = chain.states[i];
    text += std::to_string(chain.iterations[i]);
    for (Index j = 0; j < s.beta.size(); ++j) text += "," + io::format_double(s.beta[j]);
    for (double v : {s.sigma2_w, s.nugget_ratio, s.sigma2_alpha, s.rho_w, s.rho_alpha, chain.logliks[i]})
      text += "," + io::format_double(v);
    text += "\n";
  }
  io::write_text(path, text);
}

std::vector<std::pair<int, ModelState>> read_chain_csv(const fs::path& path, Index p, double nu_w, double nu_alpha) {
  const io::CsvTable t = io::read_csv(path);
  if (static_cast<Index>(t.header.size()) != p + 7)
    throw DataError(path.string() + ": expected " + std::to_string(p + 7) + " columns for " + std::to_string(p) +
                    " covariates, found " + std::to_string(t.header.size()));
  std::vector<std::pair<int, ModelState>> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::string where = t.where(r);
    ModelState s;
    s.beta.resize(p);
    for (Index j = 0; j < p; ++j) s.beta[j] = io::parse_double(row[static_cast<std::size_t>(1 + j)], where);
    const auto at = [&](Index j) { return io::parse_double(row[static_cast<std::size_t>(1 + p + j)], where); };
    s.sigma2_w = at(0);
    s.nugget_ratio = at(1);
    s.sigma2_alpha = at(2);
    s.rho_w = at(3);
    s.rho_alpha = at(4);
    s.nu_w = nu_w;
    s.nu_alpha = nu_alpha;
    out.emplace_back(static_cast<int>(io::parse_int(row[0], where)), std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------- simulate

void run_simulate(Session& session) {
  const RunConfig& cfg = session.config;
  const fs::path out = session.out();
  const std::uint64_t seed = static_cast<std::uint64_t>(cfg.get_int("run.seed", 1));
  const Index ns = cfg.get_int("simulate.n_s", 30), nt = cfg.get_int("simulate.n_t", 25);
  const Index nr = cfg.get_int("simulate.n_r", 80);
  const int k = static_cast<int>(cfg.get_int("simulate.k", 10));
  const int n_cov = static_cast<int>(cfg.get_int("simulate.covariates", 1));
  const bool intercept = cfg.get_bool("simulate.intercept", true);
  const Index holdout = cfg.get_int("simulate.holdout", 1);
  const long long first_time = cfg.get_int("simulate.first_time", 1981);
  if (ns < 1 || nt < 2 || nr < 1 || k < 1 || n_cov < 0 || holdout < 0)
    throw ConfigError("simulate: sizes must be positive (n_t at least 2)");

  ModelState truth;
  const auto beta_text = cfg.get_list("simulate.beta");
  std::vector<double> beta;
  for (const auto& b : beta_text) beta.push_back(io::parse_double(b, "config simulate.beta"));
  const Index p = (intercept ? 1 : 0) + n_cov;
  if (beta.empty()) beta.assign(static_cast<std::size_t>(p), 0.5);
  if (static_cast<Index>(beta.size()) != p)
    throw ConfigError("simulate.beta needs " + std::to_string(p) + " values (intercept plus covariates)");
  truth.beta = Eigen::Map<const Vector>(beta.data(), p);
  truth.sigma2_w = cfg.get_double("simulate.sigma2_w", 1.0);
  truth.nugget_ratio = cfg.get_double("simulate.nugget_ratio", 0.2);
  truth.sigma2_alpha = cfg.get_double("simulate.sigma2_alpha", 2.0);
  truth.rho_w = cfg.get_double("simulate.rho_w", 150.0);
  truth.rho_alpha = cfg.get_double("simulate.rho_alpha", 1000.0);
  truth.nu_w = cfg.get_double("simulate.nu_w", 0.5);
  truth.nu_alpha = cfg.get_double("simulate.nu_alpha", 0.5);

  const BoundingBox local_box = parse_bbox(
      cfg.has("simulate.local_bbox") ? cfg.get_list("simulate.local_bbox") : std::vector<std::string>{"-109", "-102", "37", "41"},
      "simulate.local_bbox");
  const BoundingBox remote_box = parse_bbox(
      cfg.has("simulate.remote_bbox") ? cfg.get_list("simulate.remote_bbox") : std::vector<std::string>{"150", "-100", "-20", "20"},
      "simulate.remote_bbox");

  auto scatter = [](const BoundingBox& box, Index n, Rng rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Location> pts;
    for (Index i = 0; i < n; ++i) {
      const double lon = box.lon_min + u(rng) * box.lon_width();
      const double lat = box.lat_min + u(rng) * (box.lat_max - box.lat_min);
      pts.emplace_back(lon, lat);
    }
    return pts;
  };

  SimulationSpec spec;
  spec.truth = truth;
  spec.locations = scatter(local_box, ns, make_rng(seed, 101));
  spec.remote_locations = scatter(remote_box, nr, make_rng(seed, 102));
  spec.knots = place_knot_grid(remote_box, k);
  spec.n_t = nt + holdout;
  spec.centre_times = nt;
  spec.design.intercept = intercept;
  spec.design.n_field_covariates = n_cov;
  spec.design.field_range_km = cfg.get_double("simulate.field_range_km", 300.0);
  spec.remote_range_km = cfg.get_double("simulate.remote_range_km", 1500.0);
  spec.seed = seed;
  const SimulationResult sim = simulate(spec);
  const Dataset& d = sim.data;

  std::vector<std::string> times, hold_times;
  for (Index t = 0; t < nt + holdout; ++t) (t < nt ? times : hold_times).push_back(std::to_string(first_time + t));
  auto cols = [&](const Matrix& m, bool train) {
    return train ? Matrix(m.leftCols(nt)) : Matrix(m.rightCols(holdout));
  };

  std::vector<std::string> files;
  auto emit = [&](const std::string& name) { files.push_back(name); return out / name; };
  io::write_locations(emit("locations.csv"), {d.response.ids, d.response.locations});
  io::write_locations(emit("remote_locations.csv"), {d.remote.ids, d.remote.locations});
  std::vector<std::string> knot_ids;
  for (std::size_t i = 0; i < spec.knots.size(); ++i) knot_ids.push_back("knot" + std::to_string(i + 1));
  io::write_locations(emit("knots.csv"), {knot_ids, spec.knots});
  io::write_series(emit("response.csv"), d.response.ids, times, cols(d.response.values, true));
  io::write_series(emit("remote.csv"), d.remote.ids, times, cols(d.remote.values, true));
  std::vector<std::string> cov_files;
  for (int c = 0; c < n_cov; ++c) {
    const Index j = (intercept ? 1 : 0) + c;
    Matrix x(ns, nt + holdout);
    for (Index t = 0; t < nt + holdout; ++t) x.col(t) = d.design[static_cast<std::size_t>(t)].col(j);
    const std::string name = "x" + std::to_string(c + 1) + ".csv";
    cov_files.push_back(name);
    io::write_series(emit(name), d.response.ids, times, cols(x, true));
    if (holdout) io::write_series(emit("holdout/" + name), d.response.ids, hold_times, cols(x, false));
  }
  if (holdout) {
    io::write_series(emit("holdout/response.csv"), d.response.ids, hold_times, cols(d.response.values, false));
    io::write_series(emit("holdout/remote.csv"), d.remote.ids, hold_times, cols(d.remote.values, false));
  }

  std::string alpha = "location_id,knot_id,value\n";
  for (Index i = 0; i < ns; ++i)
    for (std::size_t l = 0; l < spec.knots.size(); ++l)
      alpha += d.response.ids[static_cast<std::size_t>(i)] + "," + knot_ids[l] + "," +
               io::format_double(sim.alpha_star[i * static_cast<Index>(spec.knots.size()) + static_cast<Index>(l)]) + "\n";
  io::write_text(emit("alpha_star.csv"), alpha);

  json truth_json{{"beta", beta},
                  {"covariates", d.covariate_names},
                  {"sigma2_w", truth.sigma2_w},
                  {"nugget_ratio", truth.nugget_ratio},
                  {"sigma2_alpha", truth.sigma2_alpha},
                  {"rho_w", truth.rho_w},
                  {"rho_alpha", truth.rho_alpha},
                  {"nu_w", truth.nu_w},
                  {"nu_alpha", truth.nu_alpha}};
  io::write_text(emit("truth.json"), truth_json.dump(2) + "\n");

  std::string ini;
  ini += "; generated by resp simulate\n[run]\nseed = " + std::to_string(seed) + "\n\n";
  ini += "[data]\nlocations = locations.csv\nresponse = response.csv\n";
  std::string joined;
  for (const auto& f : cov_files) joined += (joined.empty() ? "" : ",") + f;
  if (!joined.empty()) ini += "covariates = " + joined + "\n";
  ini += std::string("intercept = ") + (intercept ? "true" : "false") + "\n";
  ini += "remote_locations = remote_locations.csv\nremote = remote.csv\nknots = knots.csv\nstandardize = false\n\n";
  ini += "[model]\nnu_w = " + io::format_double(truth.nu_w) + "\nnu_alpha = " + io::format_double(truth.nu_alpha) + "\n";
  ini += "eof_count = " + std::to_string(std::min<Index>(3, std::min<Index>(nr, nt - 1))) + "\n";
  if (holdout) {
    std::string hcov;
    for (const auto& f : cov_files) hcov += (hcov.empty() ? "" : ",") + std::string("holdout/") + f;
    ini += "\n[predict]\ntime = " + hold_times.front() + "\nremote = holdout/remote.csv\n";
    if (!hcov.empty()) ini += "covariates = " + hcov + "\n";
  }
  io::write_text(emit("fit.ini"), ini);

  json m = base_manifest("simulate", cfg);
  m["seed"] = seed;
  m["dimensions"] = {{"n_s", ns}, {"n_t", nt}, {"n_r", nr}, {"k", spec.knots.size()}, {"holdout", holdout}};
  finish_manifest(m, out, files, "simulate_manifest.json");
}

// ---------------------------------------------------------------- fit

void run_fit(Session& session) {
  const RunConfig& cfg = session.config;
  const std::uint64_t seed = require_seed(cfg, "fit");
  const fs::path out = session.out();
  const IngestResult in = ingest(cfg);
  const auto [nu_w, nu_alpha] = model_nu(cfg);
  const Priors priors = priors_from_config(cfg, in.data.p());
  SamplerConfig sc = sampler_from_config(cfg);
  sc.seed = seed;
  const int n_chains = static_cast<int>(cfg.get_int("sampler.chains", 1));
  const std::string config_hash = io::sha256_hex(cfg.canonical());
  if (cfg.get_bool("sampler.checkpoint", true)) {
    fs::create_directories(out);
    sc.checkpoint_path = (out / ("checkpoint-" + config_hash.substr(0, 12) + ".json")).string();
  }

  if (!(nu_w > 0.0) || !(nu_alpha > 0.0)) throw ConfigError("model.nu_w and model.nu_alpha must be positive");
  sc.nu_w = nu_w;
  sc.nu_alpha = nu_alpha;
  const ModelContext ctx(in.data, in.knots);
  const std::vector<Chain> chains = run_chains(ctx, priors, sc, n_chains, workers(cfg, "sampler"));

  std::vector<std::string> files;
  json chain_files = json::array();
  json acceptance = json::array();
  for (std::size_t c = 0; c < chains.size(); ++c) {
    const std::string name = c == 0 ? "chain.csv" : "chain_" + std::to_string(c) + ".csv";
    write_chain_csv(out / name, chains[c], in.data.covariate_names);
    files.push_back(name);
    chain_files.push_back(name);
    json a;
    a["chain"] = c;
    for (MhParam p : kMhOrder) {
      a["acceptance"][param_name(p)] = chains[c].acceptance_rate(p);
      a["proposal_variance"][param_name(p)] = chains[c].proposal_scales[static_cast<std::size_t>(p)];
    }
    acceptance.push_back(a);
  }
  for (int c = 0; c < n_chains; ++c) {
    std::error_code ec;
    fs::remove(c == 0 ? fs::path(sc.checkpoint_path) : fs::path(sc.checkpoint_path + "." + std::to_string(c)), ec);
  }

  json m = base_manifest("fit", cfg);
  m["seed"] = seed;
  m["data_hash"] = in.data_hash;
  m["inputs"] = in.input_hashes;
  m["standardization"] = {{"enabled", in.pipeline.enabled}, {"training_times", in.data.time_index}};
  m["dimensions"] = {{"n_s", in.data.n_s()}, {"n_t", in.data.n_t()}, {"n_r", in.data.n_r()}, {"k", in.knots.size()},
                     {"p", in.data.p()}};
  m["covariates"] = in.data.covariate_names;
  m["sampler"] = {{"iterations", sc.n_iter}, {"burn", sc.n_burn}, {"thin", sc.thin}, {"chains", n_chains},
                  {"target_accept", sc.target_accept}, {"adapt_decay", sc.adapt_decay}};
  m["chains"] = chain_files;
  m["mh"] = acceptance;
  finish_manifest(m, out, files, "fit_manifest.json");
}

// ---------------------------------------------------------------- compose

namespace {

void write_alpha_csv(const fs::path& path, const AlphaPosterior& post) {
  const Vector sd = post.sd();
  const auto sig = post.significant();
  std::string text = "location_id,knot_or_eof_id,mean,sd,sig_flag\n";
  const Index k = post.k();
  for (Index i = 0; i < post.n_s(); ++i)
    for (Index l = 0; l < k; ++l) {
      const Index j = i * k + l;
      text += post.location_ids[static_cast<std::size_t>(i)] + "," + post.basis_ids[static_cast<std::size_t>(l)] + "," +
              io::format_double(post.mean[j]) + "," + io::format_double(sd[j]) + "," +
              (sig[static_cast<std::size_t>(j)] ? "1" : "0") + "\n";
    }
  io::write_text(path, text);
}

}  // namespace

void run_compose(Session& session) {
  const RunConfig& cfg = session.config;
  const std::uint64_t seed = require_seed(cfg, "compose");
  const fs::path out = session.out();
  const fs::path fdir = fit_dir(session, "compose");
  const json fit = read_manifest(fdir / "fit_manifest.json", "compose");
  const IngestResult in = ingest(cfg);
  check_fit_matches(fit, in, fdir / "fit_manifest.json");
  const auto [nu_w, nu_alpha] = model_nu(cfg);
  const auto draws = load_post_burn(fit, fdir, in.data.p(), nu_w, nu_alpha);

  ComposeOptions opts;
  opts.draws = cfg.get_int("compose.draws", std::min<long long>(1000, static_cast<long long>(draws.size())));
  opts.workers = workers(cfg, "compose");
  opts.seed = seed;
  const int K = static_cast<int>(cfg.get_int("model.eof_count", 3));
  const bool eofs = cfg.get_bool("compose.eofs", true);
  if (eofs) opts.eof_patterns = compute_eofs(in.data.remote.values, K).W;

  ModelContext ctx(in.data, in.knots);
  ComposeResult res = compose_alpha(draws, ctx, opts);
  res.knots.basis_ids = in.knot_ids;

  std::vector<std::string> files{"alpha_means.csv"};
  write_alpha_csv(out / "alpha_means.csv", res.knots);
  if (res.eofs) {
    write_alpha_csv(out / "alpha_eof_means.csv", *res.eofs);
    files.push_back("alpha_eof_means.csv");
  }
  if (cfg.get_bool("compose.write_covariance", false)) {
    io::write_covariance(out / "alpha_cov.bin", res.knots.cov);
    files.push_back("alpha_cov.bin");
    if (res.eofs) {
      io::write_covariance(out / "alpha_eof_cov.bin", res.eofs->cov);
      files.push_back("alpha_eof_cov.bin");
    }
  }
  json m = base_manifest("compose", cfg);
  m["seed"] = seed;
  m["data_hash"] = in.data_hash;
  m["fit_config_hash"] = fit.value("config_hash", "");
  m["draws"] = opts.draws;
  m["available_draws"] = draws.size();
  m["eof_count"] = eofs ? K : 0;
  finish_manifest(m, out, files, "compose_manifest.json");
}

// ---------------------------------------------------------------- eofs

void run_eofs(Session& session) {
  const RunConfig& cfg = session.config;
  const fs::path out = session.out();
  const IngestResult in = ingest(cfg);
  const int K = static_cast<int>(cfg.get_int("model.eof_count", 3));
  const EofBasis eof = compute_eofs(in.data.remote.values, K);

  std::string patterns = "location_id,eof_id,value\n", scores = "eof_id,time,value\n", explained = "eof_id,explained\n";
  for (Index l = 0; l < K; ++l) {
    const std::string id = "eof" + std::to_string(l + 1);
    for (Index r = 0; r < eof.W.rows(); ++r)
      patterns += in.data.remote.ids[static_cast<std::size_t>(r)] + "," + id + "," + io::format_double(eof.W(r, l)) + "\n";
    for (Index t = 0; t < eof.A.cols(); ++t)
      scores += id + "," + in.data.time_index[static_cast<std::size_t>(t)] + "," + io::format_double(eof.A(l, t)) + "\n";
    explained += id + "," + io::format_double(eof.explained[l]) + "\n";
  }
  io::write_text(out / "eof_patterns.csv", patterns);
  io::write_text(out / "eof_scores.csv", scores);
  io::write_text(out / "eof_explained.csv", explained);
  json m = base_manifest("eofs", cfg);
  m["data_hash"] = in.data_hash;
  finish_manifest(m, out, {"eof_patterns.csv", "eof_scores.csv", "eof_explained.csv"}, "eofs_manifest.json");
}

// ---------------------------------------------------------------- predict

void run_predict(Session& session) {
  const RunConfig& cfg = session.config;
  const std::uint64_t seed = require_seed(cfg, "predict");
  const fs::path out = session.out();
  const fs::path fdir = fit_dir(session, "predict");
  const json fit = read_manifest(fdir / "fit_manifest.json", "predict");
  const IngestResult in = ingest(cfg);
  check_fit_matches(fit, in, fdir / "fit_manifest.json");
  const auto [nu_w, nu_alpha] = model_nu(cfg);
  const auto draws = load_post_burn(fit, fdir, in.data.p(), nu_w, nu_alpha);

  const std::string label = cfg.require("predict.time");
  if (std::find(in.data.time_index.begin(), in.data.time_index.end(), label) != in.data.time_index.end())
    throw ConfigError("predict.time '" + label + "' is part of the training index");
  const auto cov_files = cfg.get_list("predict.covariates");
  const Index n_file_cov = in.data.p() - (cfg.get_bool("data.intercept", true) ? 1 : 0);
  if (static_cast<Index>(cov_files.size()) != n_file_cov)
    throw DataError("missing t0 covariates: predict.covariates lists " + std::to_string(cov_files.size()) +
                    " files, the model has " + std::to_string(n_file_cov));
  Matrix X(in.data.n_s(), in.data.p());
  Index j = 0;
  if (cfg.get_bool("data.intercept", true)) X.col(j++).setOnes();
  for (const auto& f : cov_files) {
    const fs::path p = f.front() == '/' ? fs::path(f) : cfg.base_dir() / f;
    X.col(j++) = select_column(io::read_series(p, in.data.response.ids), label, "covariate " + p.string());
  }
  const Vector z = select_column(io::read_series(cfg.get_path("predict.remote"), in.data.remote.ids), label, "remote field");

  PredictOptions opts;
  opts.draws = cfg.get_int("predict.draws", std::min<long long>(1000, static_cast<long long>(draws.size())));
  opts.workers = workers(cfg, "predict");
  opts.seed = seed;
  ModelContext ctx(in.data, in.knots);
  const PredictiveResult pred = predict(draws, ctx, in.pipeline.apply_design(X), in.pipeline.apply_remote(z), opts);

  std::string text = "location_id,time,mean,sd,lower90,upper90\n";
  for (Index i = 0; i < in.data.n_s(); ++i) {
    std::vector<double> row;
    for (Index g = 0; g < pred.draws.cols(); ++g) {
      row.push_back(in.pipeline.enabled ? pred.draws(i, g) * in.pipeline.response_sd[i] + in.pipeline.response_mean[i]
                                        : pred.draws(i, g));
    }
    std::sort(row.begin(), row.end());
    const double scale = in.pipeline.enabled ? in.pipeline.response_sd[i] : 1.0;
    const double shift = in.pipeline.enabled ? in.pipeline.response_mean[i] : 0.0;
    text += in.data.response.ids[static_cast<std::size_t>(i)] + "," + label + "," +
            io::format_double(pred.mean[i] * scale + shift) + "," + io::format_double(pred.sd[i] * scale) + "," +
            io::format_double(quantile_type7(row, 0.05)) + "," + io::format_double(quantile_type7(row, 0.95)) + "\n";
  }
  io::write_text(out / "predictive_summary.csv", text);
  json m = base_manifest("predict", cfg);
  m["seed"] = seed;
  m["data_hash"] = in.data_hash;
  m["time"] = label;
  m["draws"] = opts.draws;
  finish_manifest(m, out, {"predictive_summary.csv"}, "predict_manifest.json");
}

// ---------------------------------------------------------------- validate

void run_validate(Session& session) {
  const RunConfig& cfg = session.config;
  const std::uint64_t seed = require_seed(cfg, "validate");
  const fs::path out = session.out();
  const IngestResult in = ingest(cfg, false);
  const Priors priors = priors_from_config(cfg, in.data.p());
  SamplerConfig sc = sampler_from_config(cfg, "validate");
  std::tie(sc.nu_w, sc.nu_alpha) = model_nu(cfg);
  const Index draws = cfg.get_int("validate.draws", 500);

  LooConfig lc;
  lc.standardize = cfg.get_bool("data.standardize", true);
  lc.workers = workers(cfg, "validate");
  lc.seed = seed;
  const LooReport report = loo_validate(in.data, resp_forecaster(in.knots, sc, priors, draws), lc);

  std::string text = "year,model,heidke,rps,rps_relative\n";
  for (const auto& r : report.rows)
    text += r.year + "," + r.model + "," + io::format_double(r.heidke) + "," + io::format_double(r.rps) + "," +
            io::format_double(r.rps_relative) + "\n";
  io::write_text(out / "skill.csv", text);

  json summary;
  for (const auto& s : report.summaries()) {
    summary["models"][s.model] = {{"years", s.years},
                                  {"heidke", {{"median", s.heidke_median}, {"iqr", s.heidke_iqr}}},
                                  {"rps", {{"median", s.rps_median}, {"iqr", s.rps_iqr}}},
                                  {"rps_relative", {{"median", s.rps_relative_median}, {"iqr", s.rps_relative_iqr}}}};
  }
  summary["failures"] = json::array();
  for (const auto& [year, msg] : report.failures) summary["failures"].push_back({{"year", year}, {"error", msg}});
  io::write_text(out / "skill_summary.json", summary.dump(2) + "\n");

  json m = base_manifest("validate", cfg);
  m["seed"] = seed;
  m["data_hash"] = in.data_hash;
  m["standardization"] = {{"enabled", lc.standardize}, {"scope", "per fold, training years only"}};
  finish_manifest(m, out, {"skill.csv", "skill_summary.json"}, "validate_manifest.json");
}

// ---------------------------------------------------------------- report

namespace {

std::string svg_strip(const std::string& title, const std::map<std::string, std::vector<double>>& groups) {
  double lo = 0.0, hi = 0.0;
  for (const auto& [name, v] : groups)
    for (double x : v) {
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
  if (hi - lo < 1e-12) hi = lo + 1.0;
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;
  const int width = 120 + 160 * static_cast<int>(groups.size()), height = 360, top = 40, bottom = 320;
  auto y = [&](double v) { return bottom - (v - lo) / (hi - lo) * (bottom - top); };
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n";
  s << "<text x=\"10\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">" << title << "</text>\n";
  s << "<line x1=\"80\" y1=\"" << top << "\" x2=\"80\" y2=\"" << bottom << "\" stroke=\"black\"/>\n";
  for (int tick = 0; tick <= 4; ++tick) {
    const double v = lo + (hi - lo) * tick / 4.0;
    s << "<text x=\"5\" y=\"" << y(v) + 4 << "\" font-family=\"sans-serif\" font-size=\"10\">" << io::format_double(std::round(v * 1000) / 1000)
      << "</text>\n";
  }
  if (lo < 0.0 && hi > 0.0)
    s << "<line x1=\"80\" y1=\"" << y(0.0) << "\" x2=\"" << width - 20 << "\" y2=\"" << y(0.0)
      << "\" stroke=\"grey\" stroke-dasharray=\"4 4\"/>\n";
  int g = 0;
  for (const auto& [name, v] : groups) {
    const double cx = 160 + 160.0 * g++;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double jitter = (static_cast<double>(i % 7) - 3.0) * 6.0;
      s << "<circle cx=\"" << cx + jitter << "\" cy=\"" << y(v[i]) << "\" r=\"3\" fill=\"steelblue\" fill-opacity=\"0.6\"/>\n";
    }
    const double med = median_iqr(v).first;
    if (std::isfinite(med))
      s << "<line x1=\"" << cx - 40 << "\" y1=\"" << y(med) << "\" x2=\"" << cx + 40 << "\" y2=\"" << y(med)
        << "\" stroke=\"firebrick\" stroke-width=\"2\"/>\n";
    s << "<text x=\"" << cx - 20 << "\" y=\"" << bottom + 25 << "\" font-family=\"sans-serif\" font-size=\"12\">" << name
      << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

std::string pad_right(std::string s, std::size_t w) {
  if (s.size() < w) s.append(w - s.size(), ' ');
  return s;
}

std::string fixed(double x, int digits = 4) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(digits);
  s << x;
  return s.str();
}

}  // namespace

void run_report(Session& session, const fs::path& input_dir) {
  const fs::path out = session.out();
  const fs::path in = input_dir.empty() ? out : input_dir;
  std::vector<std::string> files;
  std::string table;

  if (fs::exists(in / "skill.csv")) {
    const io::CsvTable t = io::read_csv(in / "skill.csv");
    const std::size_t yc = t.column("year"), mc = t.column("model"), hc = t.column("heidke"), rc = t.column("rps"),
                      rr = t.column("rps_relative");
    std::map<std::string, std::vector<double>> heidke, rps_rel, rps;
    std::string plot = "model,year,heidke,rps,rps_relative\n";
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      const auto& row = t.rows[r];
      heidke[row[mc]].push_back(io::parse_double(row[hc], t.where(r)));
      rps[row[mc]].push_back(io::parse_double(row[rc], t.where(r)));
      rps_rel[row[mc]].push_back(io::parse_double(row[rr], t.where(r)));
      plot += row[mc] + "," + row[yc] + "," + row[hc] + "," + row[rc] + "," + row[rr] + "\n";
    }
    table += "Skill by model (median [IQR])\n";
    table += pad_right("model", 8) + pad_right("years", 7) + pad_right("heidke", 22) + pad_right("rps", 22) + "rps_relative\n";
    for (const auto& [model, v] : heidke) {
      const auto h = median_iqr(v), r = median_iqr(rps[model]), q = median_iqr(rps_rel[model]);
      table += pad_right(model, 8) + pad_right(std::to_string(v.size()), 7) +
               pad_right(fixed(h.first) + " [" + fixed(h.second) + "]", 22) +
               pad_right(fixed(r.first) + " [" + fixed(r.second) + "]", 22) + fixed(q.first) + " [" + fixed(q.second) + "]\n";
    }
    io::write_text(out / "skill_plot.csv", plot);
    io::write_text(out / "skill_rps_relative.svg", svg_strip("RPS relative to the climatology median", rps_rel));
    io::write_text(out / "skill_heidke.svg", svg_strip("Heidke skill score", heidke));
    files.insert(files.end(), {"skill_plot.csv", "skill_rps_relative.svg", "skill_heidke.svg"});
  }

  if (fs::exists(in / "fit_manifest.json")) {
    const json fit = json::parse(io::read_text(in / "fit_manifest.json"));
    const Index p = fit.at("dimensions").at("p").get<Index>();
    const auto names = fit.at("covariates").get<std::vector<std::string>>();
    const auto draws = load_post_burn(fit, in, p, 0.5, 0.5);
    std::vector<std::pair<std::string, std::vector<double>>> params;
    for (Index j = 0; j < p; ++j) params.push_back({"beta_" + names[static_cast<std::size_t>(j)], {}});
    for (const char* n : {"sigma2_w", "nugget_ratio", "sigma2_alpha", "rho_w", "rho_alpha"}) params.push_back({n, {}});
    for (const auto& s : draws) {
      for (Index j = 0; j < p; ++j) params[static_cast<std::size_t>(j)].second.push_back(s.beta[j]);
      const double v[] = {s.sigma2_w, s.nugget_ratio, s.sigma2_alpha, s.rho_w, s.rho_alpha};
      for (std::size_t q = 0; q < 5; ++q) params[static_cast<std::size_t>(p) + q].second.push_back(v[q]);
    }
    std::string csv = "parameter,mean,sd,hpd95_lower,hpd95_upper\n";
    if (!table.empty()) table += "\n";
    table += "Posterior summary (" + std::to_string(draws.size()) + " post-burn-in draws)\n";
    table += pad_right("parameter", 22) + pad_right("mean", 14) + pad_right("sd", 14) + "95% HPD\n";
    for (const auto& [name, v] : params) {
      const double n = static_cast<double>(v.size());
      double mean = 0.0, ss = 0.0;
      for (double x : v) mean += x / n;
      for (double x : v) ss += (x - mean) * (x - mean);
      const double sd = v.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
      const auto [lo, hi] = hpd_interval(v);
      csv += name + "," + io::format_double(mean) + "," + io::format_double(sd) + "," + io::format_double(lo) + "," +
             io::format_double(hi) + "\n";
      table += pad_right(name, 22) + pad_right(fixed(mean), 14) + pad_right(fixed(sd), 14) + "[" + fixed(lo) + ", " +
               fixed(hi) + "]\n";
    }
    io::write_text(out / "parameter_summary.csv", csv);
    files.push_back("parameter_summary.csv");
  }

  if (files.empty()) throw DataError("nothing to report in " + in.string() + " (no skill.csv or fit_manifest.json)");
  io::write_text(out / "report.txt", table);
  files.push_back("report.txt");
  json m = base_manifest("report", session.config);
  m["input_dir"] = in.string();
  finish_manifest(m, out, files, "report_manifest.json");
}

}  // namespace resp
