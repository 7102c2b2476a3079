// Command-line front end: wpcn <verb> --scenario FILE [options].
// Exit codes: 0 success, 1 internal failure, 2 bad arguments or scenario
// file, 3 a solver did not converge (outputs are still written).

#include "wpcn/runner.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitParse = 2;
constexpr int kExitNoConvergence = 3;

struct Args {
  std::string scenario;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  std::optional<int> slots;
  std::optional<double> tol;
  std::optional<double> grid;
  unsigned threads = 0;
  std::vector<double> periods = wpcn::run::kDefaultSweep;
};

void add_common(CLI::App* cmd, Args& a) {
  cmd->add_option("--scenario", a.scenario, "Scenario file (.json or .toml)")->required();
  cmd->add_option("--out", a.out, "Output root; files go to <out>/<scenario>/<method>/")->capture_default_str();
  cmd->add_option("--seed", a.seed, "Seed for randomized components (tour heuristic)");
  cmd->add_option("--slots", a.slots, "Slots per period for refinement (slot length T/N)")->check(CLI::PositiveNumber);
  cmd->add_option("--tol", a.tol, "Convergence tolerance of the verb's outer iteration")->check(CLI::PositiveNumber);
  cmd->add_option("--grid", a.grid, "Planar search grid step in meters")->check(CLI::PositiveNumber);
  cmd->add_option("--threads", a.threads, "Worker threads (0: all cores)");
}

wpcn::run::Overrides overrides(const Args& a) {
  wpcn::run::Overrides ov;
  ov.seed = a.seed;
  ov.slots = a.slots;
  ov.tol = a.tol;
  ov.grid = a.grid;
  ov.threads = a.threads;
  return ov;
}

int report(const wpcn::run::RunOutput& run, const std::filesystem::path& dir) {
  std::printf("%s: R = %.9g bps/Hz, %s, %s -> %s\n", wpcn::run::method_tag(run.method), run.common_rate,
              run.converged ? "converged" : "NOT converged",
              run.validation.passed() ? "schedule valid" : "schedule INVALID", dir.string().c_str());
  if (!run.validation.passed()) {
    std::fprintf(stderr, "validation failed: %s\n", run.validation.message.c_str());
    return kExitFailure;
  }
  return run.converged ? kExitOk : kExitNoConvergence;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trajectory and resource planning for a UAV that charges ground users and collects their uplink data"};
  app.require_subcommand(1);
  Args args;
  auto* relaxed = app.add_subcommand("solve-relaxed", "Optimal hovering locations and time sharing (upper bound)");
  auto* plan = app.add_subcommand("plan", "Successive hover-and-fly trajectory with its resource allocation");
  auto* optimize = app.add_subcommand("optimize", "Hover-and-fly plan refined by alternating optimization");
  auto* baseline = app.add_subcommand("baseline", "Best single hovering location for the whole period");
  auto* sweep = app.add_subcommand("sweep", "All methods over a list of flight periods");
  for (auto* cmd : {relaxed, plan, optimize, baseline, sweep}) add_common(cmd, args);
  sweep->add_option("--periods", args.periods, "Flight periods in seconds")->delimiter(',')->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitParse;
  }

  wpcn::io::ScenarioFile file;
  try {
    file = wpcn::io::load_scenario(args.scenario);
  } catch (const wpcn::io::ParseError& e) {
    std::fprintf(stderr, "%s: %s\n", args.scenario.c_str(), e.what());
    return kExitParse;
  }

  const auto ov = overrides(args);
  const std::filesystem::path out = args.out;
  try {
    if (*sweep) {
      const auto rows = wpcn::run::sweep(file, args.periods, ov);
      const auto dir = wpcn::run::write_sweep(rows, file, ov, out);
      std::cout << wpcn::run::sweep_csv(rows);
      bool converged = true, valid = true;
      for (const auto& r : rows) {
        converged = converged && r.converged;
        valid = valid && r.valid;
      }
      std::printf("sweep -> %s\n", dir.string().c_str());
      if (!valid) return kExitFailure;
      return converged ? kExitOk : kExitNoConvergence;
    }
    wpcn::run::RunOutput run;
    if (*relaxed) run = wpcn::run::solve_relaxed(file, ov);
    else if (*plan) run = wpcn::run::plan(file, ov);
    else if (*optimize) run = wpcn::run::optimize(file, ov);
    else run = wpcn::run::baseline(file, ov);
    return report(run, wpcn::run::write_output(run, file, out));
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitFailure;
  }
}
