#pragma once

// Successive hover-and-fly trajectories built from the relaxed hovering
// solution, the down-scaled variant for short periods, and the
// static-hovering baseline.

#include "wpcn/allocation.hpp"
#include "wpcn/dual.hpp"
#include "wpcn/model.hpp"

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace wpcn::planner {

enum class PointRole { Charging, User };

struct HoverPoint {
  Position2D position;
  PointRole role = PointRole::Charging;
  std::size_t index = 0;  // charging-location index or user index
};

/// Charging points first, then one point above each user.
struct HoverPointSet {
  std::vector<HoverPoint> points;

  static HoverPointSet from_relaxed(const Scenario& scn, const dual::HoveringSolution& relaxed);
  std::vector<Position2D> positions() const;
  std::size_t size() const { return points.size(); }
};

struct TourPlan {
  std::vector<std::size_t> order;  // visiting permutation of point indices
  std::vector<double> legs;        // leg lengths along the order
  double distance = 0.0;
  double fly_time = 0.0;
  bool exact = true;  // false when the heuristic was used
};

inline constexpr std::size_t kExactTourLimit = 16;

/// Shortest open path through all points (any start, any end). Exact up to
/// kExactTourLimit points with lexicographically smallest order among ties;
/// nearest-neighbour plus 2-opt with seeded restarts beyond.
TourPlan plan_tour(std::span<const Position2D> points, double vmax, std::uint64_t seed = 0);

double open_path_length(std::span<const Position2D> points, std::span<const std::size_t> order);

/// Hover at each point in tour order for durations[point index], flying the
/// legs in between at vmax. Durations must sum to T - T_fly.
Trajectory build_hover_and_fly(const Scenario& scn, std::span<const Position2D> points, const TourPlan& tour,
                               std::span<const double> durations);

/// Shrinks a path over [0, T_fly] towards q_fix so it fits in T < T_fly;
/// leg speeds are unchanged.
Trajectory scale_trajectory(const Trajectory& base, Position2D q_fix, double period);

/// Splits every waypoint interval of a trajectory into the fewest equal
/// slots no longer than max_slot, sampling positions at slot midpoints.
SlotSequence segment_slots(const Trajectory& traj, double max_slot);

struct StaticResult {
  Position2D position;
  double common_rate = 0.0;
  StaticSolution solution;
  int evaluations = 0;
};

/// Grid search of solve_static over the user bounding box followed by local
/// refinement of the best cells. step <= 0 picks max(0.25, span / 40).
StaticResult static_hover_search(const Scenario& scn, double step = 0.0, unsigned threads = 0);

Schedule static_schedule(const Scenario& scn, const StaticResult& res);

struct HoverFlyOptions {
  int slots = 0;  // N for slot length T / N; 0 picks ceil(5 T)
  std::uint64_t seed = 0;
  double static_grid = 0.0;
  unsigned threads = 0;
};

double slot_length(const Scenario& scn, int slots);

struct HoverFlyPlan {
  HoverPointSet points;
  TourPlan tour;
  bool scaled = false;
  double nu = 1.0;
  Position2D q_fix;
  std::vector<double> hover_durations;  // per point, zero on the scaled branch
  Trajectory trajectory;
  Schedule schedule;
  SlotSequence slots;  // segment-aligned slot grid used for refinement
  double common_rate = 0.0;
  AllocationSolution allocation;
};

HoverFlyPlan plan_hover_and_fly(const Scenario& scn, const dual::HoveringSolution& relaxed,
                                const HoverFlyOptions& opts = {});

void write_trajectory_csv(std::ostream& os, const Trajectory& traj);

}  // namespace wpcn::planner
