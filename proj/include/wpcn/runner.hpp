#pragma once

// End-to-end pipelines behind the command-line verbs, their validation, and
// the files they leave under out/<scenario>/<method>/.

#include "wpcn/scenario_io.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace wpcn::run {

enum class Method { Relaxed, HoverFly, Scp, Static };

/// Report tag: relaxed, hover-fly, scp, static.
const char* method_tag(Method m);

/// Command-line overrides on top of the scenario's solver section.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> slots;
  std::optional<double> tol;   // dual tolerance for relaxed/plan, SCP tolerance for optimize/sweep
  std::optional<double> grid;  // meters; both planar searches
  unsigned threads = 0;        // 0: hardware concurrency
};

struct Validation {
  bool tiling = true;
  bool speed = true;
  bool neutral = true;
  double max_neutrality_violation = 0.0;
  std::string message;

  bool passed() const { return tiling && speed && neutral; }
};

struct RunOutput {
  Method method = Method::Relaxed;
  std::string directory;  // method directory name
  bool converged = true;
  double common_rate = 0.0;
  Validation validation;
  nlohmann::ordered_json report;
  nlohmann::ordered_json schedule;
  /// Extra CSV files by name (trajectory.csv, trace.csv, ...).
  std::vector<std::pair<std::string, std::string>> csv;
  double seconds = 0.0;  // wall time; written apart from the report
};

io::SolverSettings effective_settings(const io::ScenarioFile& file, Method m, const Overrides& ov);

RunOutput solve_relaxed(const io::ScenarioFile& file, const Overrides& ov = {});
RunOutput plan(const io::ScenarioFile& file, const Overrides& ov = {});
RunOutput optimize(const io::ScenarioFile& file, const Overrides& ov = {});
RunOutput baseline(const io::ScenarioFile& file, const Overrides& ov = {});

/// Writes out_root/<scenario>/<directory>/{report.json, schedule.json, *.csv}
/// and timing.json. Returns the directory.
std::filesystem::path write_output(const RunOutput& run, const io::ScenarioFile& file,
                                   const std::filesystem::path& out_root);

struct SweepRow {
  Method method = Method::Relaxed;
  double period = 0.0;
  double common_rate = 0.0;
  bool converged = true;
  bool valid = true;
};

inline const std::vector<double> kDefaultSweep{1.0, 2.0, 4.0, 8.0, 16.0, 32.0};

/// All four methods at every period; periods are spread over a worker pool.
/// Rows are ordered by period, then relaxed, hover-fly, scp, static.
std::vector<SweepRow> sweep(const io::ScenarioFile& file, const std::vector<double>& periods,
                            const Overrides& ov = {});

/// Long-format table: method,T,R.
std::string sweep_csv(const std::vector<SweepRow>& rows);

/// Writes out_root/<scenario>/sweep/{sweep.csv, report.json}.
std::filesystem::path write_sweep(const std::vector<SweepRow>& rows, const io::ScenarioFile& file,
                                  const Overrides& ov, const std::filesystem::path& out_root);

}  // namespace wpcn::run
