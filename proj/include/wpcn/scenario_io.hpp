#pragma once

// Scenario files: JSON or TOML documents holding the user layout, the radio
// and flight constants in the units engineers quote (dB, dBm), and optional
// solver overrides. Everything is converted to linear SI units on load.

#include "wpcn/model.hpp"

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace wpcn::io {

/// Malformed scenario document. key() names the offending entry (dotted
/// path, empty when the document itself does not parse).
class ParseError : public std::runtime_error {
 public:
  ParseError(std::string key, const std::string& what);
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

/// Users drawn uniformly from [0, width] x [0, height] with a 64-bit
/// Mersenne Twister. The uniform mapping is done by hand so the layout does
/// not depend on the standard library's distribution implementations.
struct RandomLayout {
  std::uint64_t seed = 0;
  std::size_t count = 0;
  double width = 0.0;
  double height = 0.0;

  std::vector<Position2D> generate() const;
};

struct SolverSettings {
  double dual_tol = 1e-7;
  int dual_max_iters = 0;  // 0: size-dependent default
  double recovery_tol = 1e-3;
  double wpt_grid_m = 0.0;     // 0: automatic
  double static_grid_m = 0.0;  // 0: automatic
  int slots = 0;               // 0: ceil(5 T)
  double scp_tol = 1e-4;
  int scp_max_iters = 50;
  std::uint64_t seed = 0;
};

struct ScenarioFile {
  std::string name;
  ScenarioParams params;
  std::optional<RandomLayout> layout;  // set when users came from a layout
  SolverSettings solver;

  Scenario scenario() const { return Scenario(params); }
};

enum class Format { Json, Toml };

/// Picks the format from the extension (.json, .toml).
Format format_for(const std::filesystem::path& path);

ScenarioFile parse_scenario(std::string_view text, Format format, std::string name);

/// Reads and parses a file; the scenario name defaults to the file stem.
ScenarioFile load_scenario(const std::filesystem::path& path);

/// FNV-1a over the exact bit patterns of the linear parameters, as 16 hex
/// digits. Equal digests mean bit-identical instances.
std::string scenario_digest(const Scenario& scn);

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

}  // namespace wpcn::io
