#include "wpcn/scp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <stdexcept>

namespace wpcn::scp {

double energy_surrogate(const Scenario& scn, std::size_t k, double tau0, Position2D q, Position2D q_ref) {
  if (!(tau0 >= 0.0)) throw std::invalid_argument("WPT duration must be nonnegative");
  const double H2 = scn.altitude() * scn.altitude();
  const double dref = H2 + squared_distance(q_ref, scn.user(k));
  const double c = scn.eta() * scn.beta0() * scn.power() * tau0;
  return 2.0 * c / dref - c * (H2 + squared_distance(q, scn.user(k))) / (dref * dref);
}

double rate_surrogate(const Scenario& scn, std::size_t k, double tau, double power, Position2D q, Position2D q_ref) {
  if (!(tau >= 0.0) || !(power >= 0.0)) throw std::invalid_argument("duration and power must be nonnegative");
  if (tau == 0.0 || power == 0.0) return 0.0;
  const double H2 = scn.altitude() * scn.altitude();
  const double sref = squared_distance(q_ref, scn.user(k));
  const double s = squared_distance(q, scn.user(k));
  const double qg = power * scn.gamma();
  const double dref = H2 + sref;
  const double slope = tau * qg * std::numbers::log2e / (dref * (dref + qg));
  return tau * std::log2(1.0 + qg / dref) - slope * (s - sref);
}

double DiscretizedTrajectory::leg_limit(const Scenario& scn, std::size_t n) const {
  return scn.vmax() * 0.5 * (slots.duration[n] + slots.duration[n + 1]);
}

double DiscretizedTrajectory::max_speed_ratio(const Scenario& scn) const {
  double r = 0.0;
  for (std::size_t n = 0; n + 1 < size(); ++n)
    r = std::max(r, distance(slots.position[n], slots.position[n + 1]) / leg_limit(scn, n));
  return r;
}

Trajectory DiscretizedTrajectory::to_trajectory(double period) const {
  if (size() == 0) throw std::invalid_argument("empty slot trajectory");
  std::vector<Trajectory::Waypoint> wp{{0.0, slots.position.front()}};
  for (std::size_t n = 0; n < size(); ++n)
    wp.push_back({slots.start[n] + 0.5 * slots.duration[n], slots.position[n]});
  wp.push_back({period, slots.position.back()});
  return Trajectory(std::move(wp));
}

double schedule_objective(const Scenario& scn, const DiscretizedTrajectory& traj, const Schedule& sched) {
  const std::size_t K = scn.num_users();
  std::vector<double> rate(K, 0.0), harvest(K, 0.0), spent(K, 0.0);
  for (std::size_t n = 0; n < traj.size(); ++n) {
    const Slot& s = sched.slots[n];
    const Position2D q = traj.slots.position[n];
    for (std::size_t k = 0; k < K; ++k) {
      harvest[k] += harvested_power(scn, q, k) * s.wpt_time;
      if (s.wit_time[k] > 0.0) {
        spent[k] += s.wit_time[k] * s.uplink_power[k];
        rate[k] += s.wit_time[k] * instantaneous_rate(scn, q, k, s.uplink_power[k]);
      }
    }
  }
  double r = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < K; ++k) {
    if (spent[k] > harvest[k] * (1.0 + kTolerances.structural)) return -std::numeric_limits<double>::infinity();
    r = std::min(r, rate[k] / scn.period());
  }
  return r;
}

namespace {

// Variables [x_0, y_0, ..., x_{N-1}, y_{N-1}, R]. Constraints: K surrogate
// rate rows, K surrogate energy rows, N-1 speed rows. Every surrogate is
// const - coef * ||q_n - w_k||^2.
class StepProgram final : public barrier::ConcaveProgram {
 public:
  StepProgram(const Scenario& scn, const Schedule& sched, const DiscretizedTrajectory& ref)
      : scn_(scn), N_(static_cast<int>(ref.size())), K_(static_cast<int>(scn.num_users())) {
    const double H2 = scn.altitude() * scn.altitude();
    rate_const_.assign(K_, 0.0);
    energy_const_.assign(K_, 0.0);
    spent_.assign(K_, 0.0);
    rate_coef_.assign(K_, std::vector<double>(N_, 0.0));
    energy_coef_.assign(K_, std::vector<double>(N_, 0.0));
    for (int n = 0; n < N_; ++n) {
      const Slot& s = sched.slots[n];
      const Position2D qr = ref.slots.position[n];
      for (int k = 0; k < K_; ++k) {
        const double sref = squared_distance(qr, scn.user(k));
        const double dref = H2 + sref;
        const double e0 = scn.eta() * scn.beta0() * scn.power() * s.wpt_time / dref;
        energy_coef_[k][n] = e0 / dref;
        energy_const_[k] += e0 + energy_coef_[k][n] * sref;
        const double tau = s.wit_time[k], Q = s.uplink_power[k];
        if (tau > 0.0 && Q > 0.0) {
          spent_[k] += tau * Q;
          const double qg = Q * scn.gamma();
          rate_coef_[k][n] = tau * qg * std::numbers::log2e / (dref * (dref + qg));
          rate_const_[k] += tau * std::log2(1.0 + qg / dref) + rate_coef_[k][n] * sref;
        }
      }
    }
    for (int n = 0; n + 1 < N_; ++n) limit_.push_back(ref.leg_limit(scn, static_cast<std::size_t>(n)));
  }

  int num_variables() const override { return 2 * N_ + 1; }
  int num_constraints() const override { return 2 * K_ + N_ - 1; }
  Eigen::VectorXd objective() const override {
    Eigen::VectorXd c = Eigen::VectorXd::Zero(num_variables());
    c(2 * N_) = 1.0;
    return c;
  }
  Eigen::VectorXd lower_bounds() const override {
    return Eigen::VectorXd::Constant(num_variables(), -std::numeric_limits<double>::infinity());
  }
  double constraint_scale(int j) const override {
    if (j < K_) return scn_.period();
    if (j < 2 * K_) return std::max(spent_[j - K_], 1e-300);
    return limit_[j - 2 * K_] * limit_[j - 2 * K_];
  }

  bool evaluate(const Eigen::VectorXd& x, bool derivatives, std::vector<barrier::ConstraintValue>& out) const override {
    out.resize(num_constraints());
    for (auto& c : out) c.reset();
    for (int k = 0; k < K_; ++k) {
      const Position2D w = scn_.user(k);
      auto& rc = out[k];
      auto& ec = out[K_ + k];
      rc.value = rate_const_[k] - scn_.period() * x(2 * N_);
      ec.value = energy_const_[k] - spent_[k];
      if (derivatives) rc.add_gradient(2 * N_, -scn_.period());
      for (int n = 0; n < N_; ++n) {
        const double dx = x(2 * n) - w.x, dy = x(2 * n + 1) - w.y;
        const double s = dx * dx + dy * dy;
        for (auto [c, coef] : {std::pair{&rc, rate_coef_[k][n]}, std::pair{&ec, energy_coef_[k][n]}}) {
          if (coef == 0.0) continue;
          c->value -= coef * s;
          if (derivatives) {
            c->add_gradient(2 * n, -2.0 * coef * dx);
            c->add_gradient(2 * n + 1, -2.0 * coef * dy);
            c->hessian.emplace_back(2 * n, 2 * n, -2.0 * coef);
            c->hessian.emplace_back(2 * n + 1, 2 * n + 1, -2.0 * coef);
          }
        }
      }
    }
    for (int n = 0; n + 1 < N_; ++n) {
      auto& c = out[2 * K_ + n];
      const double dx = x(2 * n + 2) - x(2 * n), dy = x(2 * n + 3) - x(2 * n + 1);
      c.value = limit_[n] * limit_[n] - dx * dx - dy * dy;
      if (derivatives) {
        c.add_gradient(2 * n, 2 * dx);
        c.add_gradient(2 * n + 1, 2 * dy);
        c.add_gradient(2 * n + 2, -2 * dx);
        c.add_gradient(2 * n + 3, -2 * dy);
        for (int d = 0; d < 2; ++d) {
          const int a = 2 * n + d, b = 2 * n + 2 + d;
          c.hessian.emplace_back(a, a, -2.0);
          c.hessian.emplace_back(b, b, -2.0);
          c.hessian.emplace_back(a, b, 2.0);
          c.hessian.emplace_back(b, a, 2.0);
        }
      }
    }
    return true;
  }

  double surrogate_min_rate(const Eigen::VectorXd& x) const {
    std::vector<barrier::ConstraintValue> v;
    Eigen::VectorXd y = x;
    y(2 * N_) = 0.0;
    evaluate(y, false, v);
    double r = std::numeric_limits<double>::infinity();
    for (int k = 0; k < K_; ++k) r = std::min(r, v[k].value / scn_.period());
    return r;
  }
  bool has_rate_terms() const {
    for (const auto& row : rate_coef_)
      for (double c : row)
        if (c > 0.0) return true;
    return false;
  }

 private:
  const Scenario& scn_;
  int N_, K_;
  std::vector<double> rate_const_, energy_const_, spent_, limit_;
  std::vector<std::vector<double>> rate_coef_, energy_coef_;
};

DiscretizedTrajectory with_positions(const DiscretizedTrajectory& ref, const Eigen::VectorXd& x) {
  DiscretizedTrajectory out = ref;
  for (std::size_t n = 0; n < ref.size(); ++n)
    out.slots.position[n] = {x(static_cast<Eigen::Index>(2 * n)), x(static_cast<Eigen::Index>(2 * n + 1))};
  return out;
}

}  // namespace

StepResult trajectory_step(const Scenario& scn, const Schedule& sched, const DiscretizedTrajectory& ref,
                           const barrier::Options& opts) {
  if (sched.slots.size() != ref.size()) throw std::invalid_argument("schedule and trajectory slot counts differ");
  const std::size_t N = ref.size();
  StepResult res;
  res.trajectory = ref;
  res.reference_objective = schedule_objective(scn, ref, sched);
  res.objective = res.reference_objective;
  res.surrogate_objective = res.reference_objective;
  if (!std::isfinite(res.reference_objective))
    throw std::invalid_argument("schedule is not energy neutral on the reference trajectory");

  const StepProgram prog(scn, sched, ref);
  if (!prog.has_rate_terms()) return res;

  Eigen::VectorXd x0(2 * N + 1);
  for (std::size_t n = 0; n < N; ++n) {
    x0(static_cast<Eigen::Index>(2 * n)) = ref.slots.position[n].x;
    x0(static_cast<Eigen::Index>(2 * n + 1)) = ref.slots.position[n].y;
  }
  const double r0 = prog.surrogate_min_rate(x0);
  x0(static_cast<Eigen::Index>(2 * N)) = r0 - std::max(1e-3 * std::abs(r0), 1e-6);

  const auto start = barrier::find_interior(prog, x0, opts);
  if (!start) {
    res.no_interior = true;
    return res;
  }
  const barrier::Result br = barrier::maximize(prog, *start, opts);
  res.surrogate_objective = prog.surrogate_min_rate(br.x);

  // Minorization makes this an ascent step; the check only catches solver
  // round-off, halving back towards the reference.
  DiscretizedTrajectory cand = with_positions(ref, br.x);
  const double floor = res.reference_objective - 1e-12 * std::abs(res.reference_objective);
  for (int h = 0; h <= 30; ++h) {
    const double obj = schedule_objective(scn, cand, sched);
    if (obj >= floor && cand.max_speed_ratio(scn) <= 1.0 + kTolerances.structural) {
      res.trajectory = std::move(cand);
      res.objective = obj;
      double shift = 0.0;
      for (std::size_t n = 0; n < N; ++n)
        shift = std::max(shift, distance(res.trajectory.slots.position[n], ref.slots.position[n]));
      res.moved = shift > 0.0;
      res.halvings = h;
      return res;
    }
    for (std::size_t n = 0; n < N; ++n)
      cand.slots.position[n] = 0.5 * (cand.slots.position[n] + ref.slots.position[n]);
  }
  return res;
}

namespace {

Schedule backed_off(const Schedule& s, double backoff) {
  Schedule out = s;
  for (auto& slot : out.slots)
    for (double& q : slot.uplink_power) q *= 1.0 - backoff;
  return out;
}

double max_displacement(const DiscretizedTrajectory& a, const DiscretizedTrajectory& b) {
  double d = 0.0;
  for (std::size_t n = 0; n < a.size(); ++n) d = std::max(d, distance(a.slots.position[n], b.slots.position[n]));
  return d;
}

}  // namespace

ScpResult alternating_optimize(const Scenario& scn, const SlotSequence& init, const ScpOptions& opts) {
  if (init.size() == 0) throw std::invalid_argument("initial trajectory has no slots");
  InitialPoint start;
  start.slots = init;
  DiscretizedTrajectory d{init};
  start.path = d.to_trajectory(scn.period());
  start.allocation = solve_slot_allocation(scn, init, opts.barrier);
  start.schedule = slots_to_schedule(scn, init, start.allocation);
  start.common_rate = start.allocation.common_rate;
  return alternating_optimize(scn, start, opts);
}

ScpResult alternating_optimize(const Scenario& scn, const InitialPoint& start, const ScpOptions& opts) {
  if (start.slots.size() == 0) throw std::invalid_argument("initial trajectory has no slots");
  DiscretizedTrajectory cur{start.slots};
  if (cur.max_speed_ratio(scn) > 1.0 + kTolerances.structural)
    throw std::invalid_argument("initial trajectory violates the speed bound");
  cur.to_trajectory(scn.period()).validate(scn);

  // The reported solution is the best point seen, starting with the given
  // one; the iteration itself runs on the slot grid.
  ScpResult res;
  res.trajectory = cur;
  res.path = start.path;
  res.schedule = start.schedule;
  res.allocation = start.allocation;
  res.common_rate = start.common_rate;
  res.initial_rate = start.common_rate;
  res.trace.push_back({0, res.common_rate, 0.0, 0.0});
  bool start_is_best = true;

  AllocationSolution alloc = solve_slot_allocation(scn, cur.slots, opts.barrier);
  double rate = alloc.common_rate;
  const auto accept = [&](int it, double step_norm) {
    if (rate <= res.common_rate) {
      res.trace.push_back({it, res.common_rate, step_norm, 0.0});
      return 0.0;
    }
    const double gain = (rate - res.common_rate) / std::max(std::abs(res.common_rate), 1e-300);
    res.trace.push_back({it, rate, step_norm, gain});
    res.trajectory = cur;
    res.allocation = alloc;
    res.common_rate = rate;
    start_is_best = false;
    return gain;
  };

  for (int it = 1; it <= opts.max_iters; ++it) {
    res.iterations = it;
    const Schedule sched = backed_off(slots_to_schedule(scn, cur.slots, alloc), opts.power_backoff);
    const StepResult step = trajectory_step(scn, sched, cur, opts.barrier);
    if (!step.moved) {
      res.converged = true;
      accept(it, 0.0);
      break;
    }
    // Re-allocate on the new path; fall back towards the current path when
    // round-off would make the rate drop.
    DiscretizedTrajectory cand = step.trajectory;
    AllocationSolution next = solve_slot_allocation(scn, cand.slots, opts.barrier);
    for (int h = 0; h < 10 && next.common_rate < rate; ++h) {
      for (std::size_t n = 0; n < cand.size(); ++n)
        cand.slots.position[n] = 0.5 * (cand.slots.position[n] + cur.slots.position[n]);
      next = solve_slot_allocation(scn, cand.slots, opts.barrier);
    }
    if (next.common_rate < rate) {
      res.converged = true;
      accept(it, 0.0);
      break;
    }
    const double step_norm = max_displacement(cand, cur);
    const double improvement = (next.common_rate - rate) / std::max(std::abs(rate), 1e-300);
    cur = std::move(cand);
    alloc = std::move(next);
    rate = alloc.common_rate;
    accept(it, step_norm);
    if (improvement < opts.tol) {
      res.converged = true;
      break;
    }
  }
  if (!start_is_best) {
    res.path = res.trajectory.to_trajectory(scn.period());
    res.schedule = slots_to_schedule(scn, res.trajectory.slots, res.allocation);
  }
  return res;
}

void write_trace_csv(std::ostream& os, const std::vector<TraceRow>& trace) {
  os << "iteration,rate,step_norm,improvement\n";
  os.precision(17);
  for (const auto& r : trace) os << r.iteration << ',' << r.rate << ',' << r.step_norm << ',' << r.improvement << '\n';
}

}  // namespace wpcn::scp
