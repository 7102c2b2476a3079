#pragma once

// Local refinement of a hover-and-fly plan: alternating between the per-slot
// resource allocation and a convex trajectory update built from concave
// minorants of the harvested energy and of the uplink rate.

#include "wpcn/allocation.hpp"
#include "wpcn/barrier.hpp"
#include "wpcn/model.hpp"

#include <iosfwd>
#include <vector>

namespace wpcn::scp {

/// Tangent minorant of eta P beta0 tau0 / (H^2 + ||q - w_k||^2) taken in
/// the squared distance at q_ref. Joules.
double energy_surrogate(const Scenario& scn, std::size_t k, double tau0, Position2D q, Position2D q_ref);

/// Tangent minorant of tau log2(1 + Q gamma / (H^2 + ||q - w_k||^2)) taken
/// in the squared distance at q_ref. bps/Hz times seconds.
double rate_surrogate(const Scenario& scn, std::size_t k, double tau, double power, Position2D q, Position2D q_ref);

/// Slot grid with one waypoint per slot midpoint. The UAV holds q[0] before
/// the first midpoint and q[N-1] after the last one.
struct DiscretizedTrajectory {
  SlotSequence slots;

  std::size_t size() const { return slots.size(); }
  /// Speed bound between consecutive midpoints.
  double leg_limit(const Scenario& scn, std::size_t n) const;
  /// Largest ratio of leg length to its limit.
  double max_speed_ratio(const Scenario& scn) const;
  Trajectory to_trajectory(double period) const;
};

struct StepResult {
  DiscretizedTrajectory trajectory;
  double surrogate_objective = 0.0;  // min-rate of the surrogate problem
  double reference_objective = 0.0;  // true objective of the schedule at q_ref
  double objective = 0.0;            // true objective at the returned trajectory
  bool moved = false;
  bool no_interior = false;          // surrogate problem had no strictly feasible point
  int halvings = 0;
};

/// True min-rate of a fixed schedule along a slot trajectory; -infinity if
/// some user's consumption exceeds its harvest.
double schedule_objective(const Scenario& scn, const DiscretizedTrajectory& traj, const Schedule& sched);

/// One surrogate trajectory update for a fixed schedule whose slots match
/// the reference trajectory's slots.
StepResult trajectory_step(const Scenario& scn, const Schedule& sched, const DiscretizedTrajectory& ref,
                           const barrier::Options& opts = {});

struct ScpOptions {
  double tol = 1e-4;
  int max_iters = 50;
  double power_backoff = 1e-6;  // relative power reduction that gives the step a strict interior
  barrier::Options barrier;
};

struct TraceRow {
  int iteration = 0;
  double rate = 0.0;
  double step_norm = 0.0;
  double improvement = 0.0;
};

struct ScpResult {
  DiscretizedTrajectory trajectory;
  Trajectory path;
  Schedule schedule;
  AllocationSolution allocation;
  double common_rate = 0.0;
  double initial_rate = 0.0;
  bool converged = false;
  int iterations = 0;
  std::vector<TraceRow> trace;  // rate of the best point after each iteration
};

/// Starting point: a slot grid plus the solution it stands for, which may
/// come from a finer model (e.g. a hover-and-fly plan).
struct InitialPoint {
  SlotSequence slots;
  Trajectory path;
  Schedule schedule;
  AllocationSolution allocation;
  double common_rate = 0.0;
};

/// Alternates allocation and trajectory steps from the given slot grid
/// until the relative improvement falls below tol. The result is the best
/// point seen, so its rate never drops below the start's.
ScpResult alternating_optimize(const Scenario& scn, const InitialPoint& start, const ScpOptions& opts = {});
ScpResult alternating_optimize(const Scenario& scn, const SlotSequence& init, const ScpOptions& opts = {});

void write_trace_csv(std::ostream& os, const std::vector<TraceRow>& trace);

}  // namespace wpcn::scp
