#pragma once

#include "resp/anomaly.hpp"
#include "resp/gibbs.hpp"
#include "resp/resplike.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace resp {

/// Flat view of an INI file: keys are "section.key". Values set later
/// override earlier ones, so command-line overrides are applied after load.
class RunConfig {
 public:
  static RunConfig from_file(const std::filesystem::path& path);

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const { return values_.count(key) > 0; }
  std::optional<std::string> find(const std::string& key) const;
  std::string get(const std::string& key, const std::string& fallback) const;
  std::string require(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<std::string> get_list(const std::string& key) const;
  /// Path value resolved against the directory of the loaded file.
  std::filesystem::path get_path(const std::string& key) const;

  /// "key=value" lines in key order, excluding keys that never change results.
  std::string canonical() const;
  const std::filesystem::path& base_dir() const { return base_dir_; }
  void set_base_dir(std::filesystem::path dir) { base_dir_ = std::move(dir); }

 private:
  std::map<std::string, std::string> values_;
  std::filesystem::path base_dir_ = ".";
};

struct IngestResult {
  Dataset data;
  AnomalyPipeline pipeline;
  std::vector<Location> knots;
  std::vector<std::string> knot_ids;
  std::map<std::string, std::string> input_hashes;  // role -> sha256
  std::string data_hash;
};

/// Reads the [data] section. With standardize on (the default) statistics come
/// from data.train_times (all times when unset) and only those times are kept;
/// apply_standardization = false returns the raw series for every time.
IngestResult ingest(const RunConfig& cfg, bool apply_standardization = true);

Priors priors_from_config(const RunConfig& cfg, Index p);
SamplerConfig sampler_from_config(const RunConfig& cfg, const std::string& section = "sampler");

struct Session {
  RunConfig config;
  std::optional<std::filesystem::path> output_dir;

  /// Explicit directory, else $RESP_OUT_DIR, else the current directory.
  std::filesystem::path out() const;
};

void run_simulate(Session& s);
void run_fit(Session& s);
void run_compose(Session& s);
void run_eofs(Session& s);
void run_predict(Session& s);
void run_validate(Session& s);
void run_report(Session& s, const std::filesystem::path& input_dir);

/// Chain CSV written by fit.
void write_chain_csv(const std::filesystem::path& path, const Chain& chain, const std::vector<std::string>& covariates);
std::vector<std::pair<int, ModelState>> read_chain_csv(const std::filesystem::path& path, Index p, double nu_w,
                                                       double nu_alpha);

}  // namespace resp
