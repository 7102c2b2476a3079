#pragma once

// Convex transmission resource allocation for a fixed UAV path.
//
// Time is organised in pools. A pool has a duration budget shared by its
// options: WPT options (the UAV charges every user from some location) and
// WIT options (one user transmits to the UAV at some location). A flight
// slot is a pool with one WPT option and one WIT option per user, all at the
// slot position. The hover pool of a hover-and-fly plan holds one WPT option
// per charging location and one WIT option per user above that user.
//
// With uplink energies e = tau * Q as variables, every rate term becomes the
// concave perspective tau * log2(1 + c e / tau) and the max-min problem is
// convex; it is solved with the barrier method.

#include "wpcn/barrier.hpp"
#include "wpcn/model.hpp"

#include <optional>
#include <span>
#include <vector>

namespace wpcn {

struct WptOption {
  Position2D location;
  std::vector<double> energy_rate;  // eta * P * h_k(location), Watts, per user
};

struct WitOption {
  std::size_t user = 0;
  Position2D location;
  double snr_per_watt = 0.0;  // h_k(location) / sigma^2
};

struct TimePool {
  double budget = 0.0;  // seconds
  std::vector<WptOption> wpt;
  std::vector<WitOption> wit;
};

struct AllocationProblem {
  std::size_t num_users = 0;
  double period = 0.0;  // rates are averaged over this
  std::vector<TimePool> pools;

  void validate() const;
};

struct PoolAllocation {
  std::vector<double> wpt_time;
  std::vector<double> wit_time;
  std::vector<double> wit_energy;  // Joules; power = energy / time
};

struct AllocationSolution {
  std::vector<PoolAllocation> pools;
  std::vector<double> user_rate;  // bps/Hz
  std::vector<double> harvested;  // Joules
  std::vector<double> consumed;   // Joules
  double common_rate = 0.0;
  double gap = 0.0;  // barrier duality measure at termination
  bool converged = false;
  int newton_steps = 0;
};

/// tau * log2(1 + c * energy / tau). Zero at (0, 0); nullopt for tau = 0
/// with positive energy, which would need infinite power.
std::optional<double> perspective_rate(double tau, double energy, double snr_per_watt);

/// Per-user period-average rates of an allocation (bps/Hz).
std::vector<double> user_rates(const AllocationProblem& prob, std::span<const PoolAllocation> alloc);

/// min over users of user_rates.
double min_user_rate(const AllocationProblem& prob, std::span<const PoolAllocation> alloc);

/// Maximizes the common rate. Durations below 1e-9 s are zeroed afterwards
/// and energies are trimmed so every user's neutrality holds exactly.
AllocationSolution solve_allocation(const AllocationProblem& prob, const barrier::Options& opts = {});

// --- Problem builders -------------------------------------------------------

TimePool make_slot_pool(const Scenario& scn, Position2D q, double duration);

/// Hover pool: WPT at each charging location, WIT above each user.
TimePool make_hover_pool(const Scenario& scn, std::span<const Position2D> wpt_locations, double budget);

/// Slots of a discretized path; positions are midpoint samples.
struct SlotSequence {
  std::vector<double> start;
  std::vector<double> duration;
  std::vector<Position2D> position;

  std::size_t size() const { return start.size(); }
};

/// Hover-and-fly allocation: hover durations at the charging locations and
/// above the users share the budget T - T_fly, flight slots are fixed.
AllocationSolution solve_p3(const AllocationProblem& prob, const barrier::Options& opts = {});

AllocationProblem make_slot_problem(const Scenario& scn, const SlotSequence& slots);

/// Per-slot TDMA allocation along a fixed discretized trajectory.
AllocationSolution solve_slot_allocation(const Scenario& scn, const SlotSequence& slots,
                                         const barrier::Options& opts = {});

/// One slot per pool; pool p must be a flight slot built by make_slot_pool.
Schedule slots_to_schedule(const Scenario& scn, const SlotSequence& slots, const AllocationSolution& sol);

struct StaticSolution {
  AllocationSolution allocation;
  double common_rate = 0.0;
};

/// Best TDMA split when the UAV hovers at q for the whole period.
StaticSolution solve_static(const Scenario& scn, Position2D q, const barrier::Options& opts = {});

}  // namespace wpcn
