#pragma once

#include "biopt/upper_level.hpp"

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace biopt {

/// Exit codes shared by every subcommand.
enum ExitCode { kExitOk = 0, kExitSolver = 1, kExitUsage = 2 };

struct ExperimentConfig {
  std::string instance;       // builtin name
  std::string instance_file;  // JSON instance, used when `instance` is empty
  RunConfig run;
  unsigned seed = 0;
  std::string trace_path;
  std::string csv_path;
};

/// Parses a JSON config document; throws Error on unknown or ill-typed keys.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

/// Applies BIOPT_SEED if it is set.
void apply_seed_override(ExperimentConfig& cfg);

ProblemInstance make_instance(const ExperimentConfig& cfg);

void write_ndjson(const RunTrace& trace, std::ostream& os);
/// Throws Error("corrupt trace: ...") on malformed input.
RunTrace read_ndjson(std::istream& is);
RunTrace read_ndjson_file(const std::string& path);

/// Columns: k, F_gap, A, g_k, branch, bisections, lower_iters.
void write_csv(const RunTrace& trace, std::ostream& os);

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  int points = 0;
  std::vector<std::string> warnings;
};

/// Least-squares slope of log(gap) against log(k) over k ∈ [k_min, k_max].
/// Gaps at or below 1e-14 end the range with a warning; fewer than 10
/// usable points is an error.
RateFit rate_fit(const std::vector<std::pair<int, double>>& k_gap, int k_min, int k_max);
RateFit rate_fit(const RunTrace& trace, int k_min, int k_max);

/// One line per run on `out`; diagnostics on `err`.
int cmd_run(const std::vector<std::string>& config_paths, int jobs, std::ostream& out, std::ostream& err);
int cmd_rate_fit(const std::string& trace_path, int k_min, int k_max, std::ostream& out, std::ostream& err);
int cmd_verify(const std::string& trace_path, std::ostream& out, std::ostream& err);

}  // namespace biopt
