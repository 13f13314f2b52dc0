// Command-line front end. Everything goes through the C API in resp/resp.h.
//
// Setting precedence, lowest first: the --config file, --set overrides, then
// the dedicated flags (--seed, --workers, --init). The output directory is
// --out, else $RESP_OUT_DIR, else the current directory.

#include "resp/resp.h"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace {

struct Options {
  std::string config;
  std::optional<long long> seed;
  std::optional<int> workers;
  std::string out;
  std::string init;
  std::vector<std::string> overrides;
  std::string input_dir;
};

int report_error(resp_status status, const std::string& message) {
  nlohmann::json line{{"error", {{"category", resp_status_name(status)}, {"code", static_cast<int>(status)},
                                 {"message", message}}}};
  std::cerr << line.dump() << '\n';
  return static_cast<int>(status);
}

int check(resp_status status) {
  if (status == RESP_OK) return 0;
  return report_error(status, resp_last_error());
}

int run(const std::string& command, const Options& opt) {
  resp_session* raw = nullptr;
  if (int rc = check(resp_session_create(&raw))) return rc;
  std::unique_ptr<resp_session, decltype(&resp_session_destroy)> session(raw, resp_session_destroy);

  for (const auto& kv : opt.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) return report_error(RESP_ERR_CONFIG, "--set expects section.key=value, got '" + kv + "'");
    if (int rc = check(resp_session_set(raw, kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str()))) return rc;
  }
  if (opt.seed && *opt.seed < 0) return report_error(RESP_ERR_CONFIG, "--seed must be non-negative");
  if (opt.seed)
    if (int rc = check(resp_session_set(raw, "run.seed", std::to_string(*opt.seed).c_str()))) return rc;
  if (opt.workers)
    if (int rc = check(resp_session_set(raw, "run.workers", std::to_string(*opt.workers).c_str()))) return rc;
  if (!opt.init.empty())
    if (int rc = check(resp_session_set(raw, "sampler.init", opt.init.c_str()))) return rc;
  if (!opt.config.empty())
    if (int rc = check(resp_session_load_config(raw, opt.config.c_str()))) return rc;
  if (!opt.out.empty())
    if (int rc = check(resp_session_set_output_dir(raw, opt.out.c_str()))) return rc;

  if (command == "simulate") return check(resp_simulate(raw));
  if (command == "fit") return check(resp_fit(raw));
  if (command == "compose") return check(resp_compose(raw));
  if (command == "eofs") return check(resp_eofs(raw));
  if (command == "predict") return check(resp_predict(raw));
  if (command == "validate") return check(resp_validate(raw));
  return check(resp_report(raw, opt.input_dir.empty() ? nullptr : opt.input_dir.c_str()));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Remote-effects spatial process models for teleconnected climate fields"};
  app.set_version_flag("--version", std::string(resp_version()));
  app.require_subcommand(1);
  Options opt;

  const std::vector<std::pair<std::string, std::string>> commands{
      {"simulate", "Draw a synthetic dataset with a ready-to-fit config"},
      {"fit", "Run the Metropolis-within-Gibbs sampler"},
      {"compose", "Posterior of the teleconnection coefficients from a fit"},
      {"eofs", "Empirical orthogonal functions of the remote field"},
      {"predict", "Posterior predictive at a new time"},
      {"validate", "Leave-one-year-out tercile skill against climatology"},
      {"report", "Skill tables, plot CSV/SVG and parameter summaries"}};
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    CLI::Option* config = sub->add_option("-c,--config", opt.config, "INI configuration file")->check(CLI::ExistingFile);
    sub->add_option("--seed", opt.seed, "Random seed (overrides [run] seed)");
    sub->add_option("--workers", opt.workers, "Worker threads (overrides [run] workers)")->check(CLI::PositiveNumber);
    sub->add_option("-o,--out", opt.out, "Output directory");
    sub->add_option("--set", opt.overrides, "Override a setting: section.key=value (repeatable)");
    if (name == "fit" || name == "validate")
      sub->add_option("--init", opt.init, "Sampler start: default or random")->check(CLI::IsMember({"default", "random"}));
    if (name == "report") sub->add_option("--input", opt.input_dir, "Directory holding fit or validate outputs");
    if (name != "simulate" && name != "report") config->required();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return static_cast<int>(RESP_ERR_CONFIG);
  }
  return run(app.get_subcommands().front()->get_name(), opt);
}
