#pragma once

// Global solution of the relaxed problem in which the UAV may time-share
// among hovering locations without flight time. The dual function is
// evaluated in closed form plus a planar search for the charging location,
// minimized with the ellipsoid method, and the primal hovering plan is
// recovered from a small linear program.

#include "wpcn/model.hpp"

#include <Eigen/Dense>

#include <iosfwd>
#include <vector>

namespace wpcn::dual {

inline constexpr double kMuFloor = 1e-9;

struct DualVariables {
  std::vector<double> lambda;  // rate weights, sum to one
  std::vector<double> mu;      // energy prices, per Joule

  /// Throws std::invalid_argument unless lambda >= 0 sums to one and
  /// mu >= kMuFloor, both of size num_users.
  void validate(std::size_t num_users) const;
};

/// Weighted harvested power sum_k eta P mu_k h_k(q).
double phi(const Scenario& scn, Position2D q, std::span<const double> mu);

struct GridSpec {
  double step = 0.0;        // grid step in meters; 0 picks max(0.1, span / 400)
  double rel_tol = 1e-6;    // maximizers within this relative distance of the best are kept
  double refine_tol = 1e-4; // Nelder-Mead stopping size, meters
};

/// Precomputed gains on the search grid over the users' bounding box, so
/// repeated searches with different prices only cost a matrix product.
class WptSearch {
 public:
  WptSearch(const Scenario& scn, GridSpec spec = {});

  /// Refined maximizers of phi, sorted lexicographically. Never empty.
  std::vector<Position2D> maximizers(std::span<const double> mu) const;
  double step() const { return step_; }
  const GridSpec& spec() const { return spec_; }

 private:
  const Scenario* scn_;
  GridSpec spec_;
  double step_;
  int nx_, ny_;
  Eigen::MatrixXd gains_;  // (nx*ny) x K, row index ix*ny + iy
};

std::vector<Position2D> search_wpt_locations(const Scenario& scn, std::span<const double> mu, GridSpec grid = {});

/// Closed-form KKT uplink power (lambda / (T mu ln 2) - H^2 / gamma)^+.
double optimal_uplink_power(const Scenario& scn, double lambda_k, double mu_k);

enum class Mode { Wpt, Wit };

struct SubproblemSolution {
  Mode mode = Mode::Wpt;
  std::size_t user = 0;      // WIT user; unused in WPT mode
  Position2D position;
  double power = 0.0;        // uplink power, zero in WPT mode
  double objective = 0.0;    // max(phi_star, max_k phi_k)
  double phi_star = 0.0;
  Position2D wpt_location;   // lexicographically smallest charging maximizer
  std::vector<double> phi_k; // per-user WIT objectives
  std::vector<double> power_k;
};

SubproblemSolution solve_subproblem(const Scenario& scn, const DualVariables& duals, const WptSearch& search);
SubproblemSolution solve_subproblem(const Scenario& scn, const DualVariables& duals);

struct DualEvaluation {
  double value = 0.0;               // g(lambda, mu) with R* = 0
  std::vector<double> subgradient;  // [d/dlambda_1..K, d/dmu_1..K]
  SubproblemSolution subproblem;
};

DualEvaluation dual_value_and_subgradient(const Scenario& scn, const DualVariables& duals, const WptSearch& search);
DualEvaluation dual_value_and_subgradient(const Scenario& scn, const DualVariables& duals);

/// Relative spread (max - min) / max over {phi_star, phi_1..phi_K}.
double equalization_spread(const SubproblemSolution& sub);

struct DualOptions {
  int max_iterations = 0;   // 0 picks 400 n^2 + 1000 for reduced dimension n
  double tolerance = 1e-7;  // relative gap between best value and the ellipsoid lower bound
  double mu_radius = 1e3;   // initial mu radius as a multiple of the centre
  GridSpec grid;
};

struct DualTraceRow {
  int iteration = 0;
  double value = 0.0;       // g at the evaluated point; NaN for feasibility cuts
  double best = 0.0;
  double lower_bound = 0.0;
  double residual = 0.0;    // equalization spread at the point
  bool feasibility_cut = false;
};

struct DualResult {
  DualVariables duals;
  double value = 0.0;
  double lower_bound = 0.0;
  bool converged = false;
  int iterations = 0;
  std::vector<DualTraceRow> trace;
};

DualResult solve_dual(const Scenario& scn, const DualOptions& opts = {});

struct HoveringSolution {
  std::vector<Position2D> wpt_locations;
  std::vector<double> wpt_durations;
  std::vector<double> wit_durations;  // above user k
  std::vector<double> wit_power;      // Watts
  std::vector<double> user_rate;
  double common_rate = 0.0;
  bool degenerate = false;  // every power zero, all time on charging

  double total_time() const;
  std::size_t num_hover_points() const;  // charging points with positive duration plus K
};

/// Optimal hovering durations for fixed charging locations and uplink powers.
HoveringSolution time_sharing_lp(const Scenario& scn, std::span<const Position2D> wpt_locations,
                                 std::span<const double> powers);

struct RelaxedOptions {
  DualOptions dual;
  double recovery_tol = 1e-3;  // relative phi tolerance for candidate charging points
};

struct RelaxedDiagnostics {
  DualResult dual;
  double equalization_residual = 0.0;  // max_{k,w} |phi(q_w) - phi_k| / |phi(q_1)|
  double equalization_spread = 0.0;
  std::size_t candidate_locations = 0;  // before dropping zero-duration points
};

struct RelaxedResult {
  HoveringSolution solution;
  RelaxedDiagnostics diagnostics;
};

RelaxedResult solve_relaxed(const Scenario& scn, const RelaxedOptions& opts = {});

void write_trace_csv(std::ostream& os, const std::vector<DualTraceRow>& trace);

}  // namespace wpcn::dual
