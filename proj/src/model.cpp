#include "wpcn/model.hpp"

#include <algorithm>
#include <limits>
#include <numbers>

namespace wpcn {

namespace {

bool positive_finite(double v) { return std::isfinite(v) && v > 0.0; }

void require(bool cond, const std::string& what) {
  if (!cond) throw std::invalid_argument(what);
}

}  // namespace

Scenario::Scenario(ScenarioParams params) : params_(std::move(params)) {
  require(!params_.users.empty(), "scenario needs at least one user");
  for (const auto& w : params_.users)
    require(std::isfinite(w.x) && std::isfinite(w.y), "user positions must be finite");
  require(positive_finite(params_.altitude), "altitude must be positive");
  require(positive_finite(params_.beta0), "beta0 must be positive");
  require(positive_finite(params_.sigma2), "sigma2 must be positive");
  require(std::isfinite(params_.eta) && params_.eta > 0.0 && params_.eta <= 1.0,
          "eta must lie in (0, 1]");
  require(positive_finite(params_.power), "transmit power must be positive");
  require(positive_finite(params_.vmax), "vmax must be positive");
  require(positive_finite(params_.period), "period must be positive");
  require(positive_finite(gamma()), "reference SNR must be finite and positive");
}

Position2D Scenario::user(std::size_t k) const {
  if (k >= params_.users.size()) throw std::invalid_argument("user index out of range");
  return params_.users[k];
}

Scenario Scenario::with_period(double period) const {
  ScenarioParams p = params_;
  p.period = period;
  return Scenario(std::move(p));
}

Scenario::Box Scenario::user_box() const {
  Box box{params_.users.front(), params_.users.front()};
  for (const auto& w : params_.users) {
    box.lo.x = std::min(box.lo.x, w.x);
    box.lo.y = std::min(box.lo.y, w.y);
    box.hi.x = std::max(box.hi.x, w.x);
    box.hi.y = std::max(box.hi.y, w.y);
  }
  return box;
}

double channel_gain(const Scenario& scn, Position2D q, std::size_t k) {
  const Position2D w = scn.user(k);
  const double h2 = scn.altitude() * scn.altitude();
  return scn.beta0() / (squared_distance(q, w) + h2);
}

double harvested_power(const Scenario& scn, Position2D q, std::size_t k) {
  return scn.eta() * scn.power() * channel_gain(scn, q, k);
}

double instantaneous_rate(const Scenario& scn, Position2D q, std::size_t k, double uplink_power) {
  if (!(uplink_power >= 0.0)) throw std::invalid_argument("uplink power must be nonnegative");
  const Position2D w = scn.user(k);
  const double h2 = scn.altitude() * scn.altitude();
  return std::log2(1.0 + uplink_power * scn.gamma() / (squared_distance(q, w) + h2));
}

// ---------------------------------------------------------------------------

Trajectory::Trajectory(std::vector<Waypoint> waypoints) : waypoints_(std::move(waypoints)) {
  if (waypoints_.empty()) throw std::invalid_argument("trajectory needs at least one waypoint");
}

Trajectory Trajectory::hover(Position2D q, double period) {
  return Trajectory({{0.0, q}, {period, q}});
}

Position2D Trajectory::position_at(double t) const {
  if (waypoints_.empty()) throw std::logic_error("empty trajectory");
  if (t <= waypoints_.front().time) return waypoints_.front().position;
  if (t >= waypoints_.back().time) return waypoints_.back().position;
  auto it = std::upper_bound(waypoints_.begin(), waypoints_.end(), t,
                             [](double v, const Waypoint& w) { return v < w.time; });
  const Waypoint& b = *it;
  const Waypoint& a = *(it - 1);
  const double span = b.time - a.time;
  if (span <= 0.0) return b.position;
  const double s = (t - a.time) / span;
  return a.position + s * (b.position - a.position);
}

double Trajectory::max_speed() const {
  double v = 0.0;
  for (std::size_t i = 1; i < waypoints_.size(); ++i) {
    const double dt = waypoints_[i].time - waypoints_[i - 1].time;
    const double d = distance(waypoints_[i].position, waypoints_[i - 1].position);
    if (dt > 0.0) v = std::max(v, d / dt);
    else if (d > 0.0) v = std::numeric_limits<double>::infinity();
  }
  return v;
}

double Trajectory::path_length() const {
  double len = 0.0;
  for (std::size_t i = 1; i < waypoints_.size(); ++i)
    len += distance(waypoints_[i].position, waypoints_[i - 1].position);
  return len;
}

void Trajectory::validate(const Scenario& scn) const {
  const double tol = kTolerances.structural;
  const double period = scn.period();
  if (waypoints_.size() < 2) throw StructuralError("trajectory needs at least two waypoints");
  if (std::abs(waypoints_.front().time) > tol * period)
    throw StructuralError("trajectory must start at t = 0");
  if (std::abs(waypoints_.back().time - period) > tol * period)
    throw StructuralError("trajectory must end at t = T");
  for (std::size_t i = 0; i < waypoints_.size(); ++i) {
    const auto& w = waypoints_[i];
    if (!std::isfinite(w.position.x) || !std::isfinite(w.position.y) || !std::isfinite(w.time))
      throw StructuralError("trajectory waypoint is not finite");
    if (i == 0) continue;
    const double dt = w.time - waypoints_[i - 1].time;
    if (!(dt > 0.0)) throw StructuralError("trajectory times must be strictly increasing");
    const double d = distance(w.position, waypoints_[i - 1].position);
    if (d > scn.vmax() * dt * (1.0 + tol))
      throw StructuralError("trajectory leg " + std::to_string(i) + " exceeds vmax");
  }
}

// ---------------------------------------------------------------------------

void Schedule::validate(std::size_t num_users, double period) const {
  const double tol = kTolerances.structural;
  if (slots.empty()) throw StructuralError("schedule has no slots");
  double cursor = 0.0;
  for (std::size_t n = 0; n < slots.size(); ++n) {
    const Slot& s = slots[n];
    if (s.wit_time.size() != num_users || s.uplink_power.size() != num_users)
      throw StructuralError("slot " + std::to_string(n) + " has wrong user count");
    if (!(s.duration > 0.0)) throw StructuralError("slot durations must be positive");
    if (std::abs(s.start - cursor) > tol * period)
      throw StructuralError("slot " + std::to_string(n) + " does not start where the previous one ended");
    double used = s.wpt_time;
    if (!(s.wpt_time >= 0.0)) throw StructuralError("negative WPT duration");
    for (std::size_t k = 0; k < num_users; ++k) {
      if (!(s.wit_time[k] >= 0.0) || !(s.uplink_power[k] >= 0.0) || !std::isfinite(s.uplink_power[k]))
        throw StructuralError("negative or non-finite WIT duration/power");
      used += s.wit_time[k];
    }
    if (std::abs(used - s.duration) > tol * s.duration)
      throw StructuralError("slot " + std::to_string(n) + " sub-slots do not sum to its duration");
    cursor = s.start + s.duration;
  }
  if (std::abs(cursor - period) > tol * period)
    throw StructuralError("schedule does not cover the whole period");
}

ThroughputReport evaluate_schedule(const Scenario& scn, const Trajectory& traj, const Schedule& sched) {
  const std::size_t K = scn.num_users();
  sched.validate(K, scn.period());
  if (std::abs(traj.duration() - scn.period()) > kTolerances.structural * scn.period())
    throw StructuralError("trajectory and scenario periods differ");

  ThroughputReport rep;
  rep.harvested_energy.assign(K, 0.0);
  rep.consumed_energy.assign(K, 0.0);
  rep.rate.assign(K, 0.0);

  const double h2 = scn.altitude() * scn.altitude();
  for (const Slot& s : sched.slots) {
    const Position2D sample = traj.position_at(s.start + 0.5 * s.duration);
    if (distance(sample, s.position) > kTolerances.position)
      throw StructuralError("slot position does not match the trajectory midpoint sample");
    for (std::size_t k = 0; k < K; ++k) {
      const double gain = scn.beta0() / (squared_distance(s.position, scn.user(k)) + h2);
      rep.harvested_energy[k] += scn.eta() * scn.power() * gain * s.wpt_time;
      const double tau = s.wit_time[k];
      if (tau > 0.0) {
        rep.consumed_energy[k] += tau * s.uplink_power[k];
        rep.rate[k] += tau * std::log2(1.0 + gain * s.uplink_power[k] / scn.sigma2());
      }
    }
  }
  rep.common_rate = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < K; ++k) {
    rep.rate[k] /= scn.period();
    rep.common_rate = std::min(rep.common_rate, rep.rate[k]);
    const double excess = rep.consumed_energy[k] - rep.harvested_energy[k];
    if (excess > 0.0) {
      const double rel = rep.harvested_energy[k] > 0.0 ? excess / rep.harvested_energy[k]
                                                       : std::numeric_limits<double>::infinity();
      rep.max_neutrality_violation = std::max(rep.max_neutrality_violation, rel);
    }
  }
  rep.neutral = rep.max_neutrality_violation <= kTolerances.structural;
  return rep;
}

}  // namespace wpcn
