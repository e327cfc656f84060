#include "biopt/bench.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"Segment-search proximal-point solvers and benchmark harness"};
  app.require_subcommand(1);

  std::vector<std::string> configs;
  int jobs = 1;
  auto* run = app.add_subcommand("run", "Run one or more experiment configs");
  run->add_option("-c,--config", configs, "JSON config file (repeatable)")->required();
  run->add_option("--jobs", jobs, "Number of configs to run in parallel");

  std::string fit_trace;
  int kmin = 10, kmax = 200;
  auto* fit = app.add_subcommand("rate-fit", "Fit log(F - F*) against log k");
  fit->add_option("trace", fit_trace, "NDJSON trace")->required();
  fit->add_option("--kmin", kmin, "First iteration in the fit");
  fit->add_option("--kmax", kmax, "Last iteration in the fit");

  std::string verify_trace_path;
  auto* verify = app.add_subcommand("verify", "Replay all invariants on a trace");
  verify->add_option("trace", verify_trace_path, "NDJSON trace")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? biopt::kExitOk : biopt::kExitUsage;
  }

  if (*run) return biopt::cmd_run(configs, jobs, std::cout, std::cerr);
  if (*fit) return biopt::cmd_rate_fit(fit_trace, kmin, kmax, std::cout, std::cerr);
  return biopt::cmd_verify(verify_trace_path, std::cout, std::cerr);
}
