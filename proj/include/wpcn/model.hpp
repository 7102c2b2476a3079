#pragma once

// Physical model of the UAV-served wireless powered network: line-of-sight
// channel gains, harvested power, uplink rates and energy accounting over a
// TDMA schedule. Every solver in the library is built on these functions.

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace wpcn {

/// Raised when a trajectory or schedule does not have the required shape
/// (slots not tiling the period, sub-slot sums off, speed bound broken...).
class StructuralError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tolerances shared by validators and solvers.
struct Tolerances {
  double structural = 1e-9;  // relative; time bookkeeping, speed bound
  double physical = 1e-6;    // relative; energy neutrality of solver output
  double position = 1e-6;    // meters; slot position vs trajectory sample
};

inline constexpr Tolerances kTolerances{};

struct Position2D {
  double x = 0.0;
  double y = 0.0;

  friend Position2D operator+(Position2D a, Position2D b) { return {a.x + b.x, a.y + b.y}; }
  friend Position2D operator-(Position2D a, Position2D b) { return {a.x - b.x, a.y - b.y}; }
  friend Position2D operator*(double s, Position2D a) { return {s * a.x, s * a.y}; }
  friend bool operator==(Position2D a, Position2D b) = default;

  double norm() const { return std::hypot(x, y); }
  double squared_norm() const { return x * x + y * y; }
};

inline double squared_distance(Position2D a, Position2D b) { return (a - b).squared_norm(); }
inline double distance(Position2D a, Position2D b) { return (a - b).norm(); }

/// Raw scenario parameters, all in linear SI units.
struct ScenarioParams {
  std::vector<Position2D> users;
  double altitude = 5.0;   // H, meters
  double beta0 = 1e-3;     // reference channel power gain at 1 m
  double sigma2 = 1e-11;   // receiver noise power, Watts
  double eta = 0.5;        // RF-to-DC efficiency
  double power = 10.0;     // UAV downlink transmit power, Watts
  double vmax = 10.0;      // m/s
  double period = 10.0;    // T, seconds
};

/// Immutable, validated problem instance.
class Scenario {
 public:
  explicit Scenario(ScenarioParams params);

  std::span<const Position2D> users() const { return params_.users; }
  Position2D user(std::size_t k) const;
  std::size_t num_users() const { return params_.users.size(); }
  double altitude() const { return params_.altitude; }
  double beta0() const { return params_.beta0; }
  double sigma2() const { return params_.sigma2; }
  double eta() const { return params_.eta; }
  double power() const { return params_.power; }
  double vmax() const { return params_.vmax; }
  double period() const { return params_.period; }
  /// Reference SNR beta0 / sigma2.
  double gamma() const { return params_.beta0 / params_.sigma2; }
  const ScenarioParams& params() const { return params_; }

  /// Same instance with a different flight period.
  Scenario with_period(double period) const;

  /// Axis-aligned bounding box of the user positions.
  struct Box {
    Position2D lo;
    Position2D hi;
  };
  Box user_box() const;

 private:
  ScenarioParams params_;
};

double channel_gain(const Scenario& scn, Position2D q, std::size_t k);
double harvested_power(const Scenario& scn, Position2D q, std::size_t k);
double instantaneous_rate(const Scenario& scn, Position2D q, std::size_t k, double uplink_power);

/// Piecewise-linear UAV path. Consecutive equal positions denote hovering.
class Trajectory {
 public:
  struct Waypoint {
    double time = 0.0;
    Position2D position;
  };

  Trajectory() = default;
  explicit Trajectory(std::vector<Waypoint> waypoints);

  /// Constant trajectory at q over [0, period].
  static Trajectory hover(Position2D q, double period);

  std::span<const Waypoint> waypoints() const { return waypoints_; }
  double duration() const { return waypoints_.empty() ? 0.0 : waypoints_.back().time; }
  Position2D position_at(double t) const;
  /// Largest leg speed over the waypoint list.
  double max_speed() const;
  double path_length() const;

  /// Throws StructuralError unless times are strictly increasing over
  /// [0, period] and every leg respects vmax.
  void validate(const Scenario& scn) const;

 private:
  std::vector<Waypoint> waypoints_;
};

/// One TDMA slot: WPT sub-slot first, then one WIT sub-slot per user.
struct Slot {
  double start = 0.0;
  double duration = 0.0;
  Position2D position;
  double wpt_time = 0.0;
  std::vector<double> wit_time;
  std::vector<double> uplink_power;  // Watts, per user
};

struct Schedule {
  std::vector<Slot> slots;

  /// Throws StructuralError unless the slots tile [0, period] in order and
  /// each slot's sub-slots are nonnegative and sum to its duration.
  void validate(std::size_t num_users, double period) const;
};

struct ThroughputReport {
  std::vector<double> harvested_energy;  // Joules
  std::vector<double> consumed_energy;   // Joules
  std::vector<double> rate;              // bps/Hz, period average
  double common_rate = 0.0;              // min over users
  double max_neutrality_violation = 0.0; // max_k (consumed - harvested)/harvested, clamped at 0
  bool neutral = true;                   // violation within the structural tolerance
};

/// Evaluates a schedule along a trajectory. The slot positions must match
/// the trajectory sampled at each slot midpoint.
ThroughputReport evaluate_schedule(const Scenario& scn, const Trajectory& traj, const Schedule& sched);

}  // namespace wpcn
