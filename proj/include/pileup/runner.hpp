#pragma once

// Configuration-driven experiment runner: validates a JSON run config,
// expands it into (n, alpha | beta) instances, runs them on a worker pool and
// writes manifest.json, results.csv and per-instance artifacts.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "pileup/continuum.hpp"

namespace pileup {

enum class Mode { solve_discrete, solve_continuum, verify, robin, sweep, check_assumptions, appendix_check };

std::string to_string(Mode m);
Mode parse_mode(const std::string& s);  // throws ConfigError
const std::vector<std::string>& mode_names();

struct RunConfig {
  Mode mode = Mode::verify;
  nlohmann::json potential = {{"kind", "power"}, {"p", 2.0}};
  std::vector<int> n;
  std::vector<double> alpha;             // explicit alpha list
  std::optional<double> alpha_exponent;  // alpha = ceil(n^e)
  std::vector<double> beta;
  Grid grid;

  double discrete_grad_rel = 1e-10;
  double el_rel = 1e-5;
  double sign_rel = 1e-4;
  double support_eps_rel = 1e-10;
  double ratio_spread = 10.0;
  double appendix_rel = 1e-4;
  int discrete_max_iter = 200;
  int continuum_max_iter = 4000;

  double gamma_window = 1.0;         // admissible beta window n/P(n) <= beta <= gamma_window n
  std::string ratio_group = "all";  // "all" | "alpha" | "beta"
  bool skip_large_alpha = false;    // skip alpha > n / log n (default on in sweep mode)

  std::vector<std::string> appendix_functions = {"bump", "gaussian", "piecewise"};
  std::vector<double> appendix_alpha = {1.0, 4.0, 16.0};
  int appendix_points = 5;

  std::string output = "run";
  int workers = 1;
  std::uint64_t seed = 0;  // reserved
};

/// Validates and fills defaults (sweep mode defaults to n = 64..1024 and
/// alpha = 2..32); errors name the offending field path,
/// e.g. "config.tolerances.el_rel: must be positive".  A manifest written by
/// run() is accepted as well (its echoed config is used).
RunConfig parse_config(const nlohmann::json& j);
nlohmann::json to_json(const RunConfig& c);

struct Instance {
  std::string key;
  int n = 0;
  double alpha = 0.0;  // 0 in beta mode until the frame is built
  double beta = 0.0;
  bool skip = false;
  std::string skip_reason;
  // appendix-check
  std::string function;
  double x = 0.0;
};

std::vector<Instance> expand_instances(const RunConfig& c);

struct RunSummary {
  int exit_code = 0;
  int done = 0, skipped = 0, failed = 0;
  bool all_pass = true;
  std::vector<std::string> problems;  // "key: message" for failed or non-passing instances
  std::filesystem::path out;
};

/// Runs every instance, then writes the artifacts into `out`.  Exit code 0
/// when every instance finished and passed its checks, 1 otherwise.
RunSummary run(const RunConfig& c, const std::filesystem::path& out);

/// Tidy plot tables under <run_dir>/plot: density_profiles.csv,
/// particles_vs_quantiles.csv and ratio_curves.csv.  Throws ConfigError
/// naming the first missing artifact.
void plot_data(const std::filesystem::path& run_dir);

}  // namespace pileup
