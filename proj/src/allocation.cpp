#include "wpcn/allocation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace wpcn {

namespace {

constexpr double kZeroDuration = 1e-9;

// Barrier view of an AllocationProblem. Variable layout per active pool:
// [wpt times | wit times | wit energies], followed by the common rate R.
class AllocationProgram final : public barrier::ConcaveProgram {
 public:
  AllocationProgram(const AllocationProblem& prob, std::vector<std::size_t> active)
      : prob_(prob), active_(std::move(active)) {
    int off = 0;
    for (std::size_t p : active_) {
      offset_.push_back(off);
      off += static_cast<int>(prob_.pools[p].wpt.size() + 2 * prob_.pools[p].wit.size());
    }
    r_index_ = off;
    K_ = static_cast<int>(prob_.num_users);
    energy_scale_.assign(K_, 0.0);
    for (std::size_t p : active_) {
      for (const auto& w : prob_.pools[p].wpt)
        for (int k = 0; k < K_; ++k) energy_scale_[k] = std::max(energy_scale_[k], w.energy_rate[k] * prob_.pools[p].budget);
    }
  }

  int num_variables() const override { return r_index_ + 1; }
  int num_constraints() const override { return 2 * K_; }
  int r_index() const { return r_index_; }
  int offset(std::size_t a) const { return offset_[a]; }
  const std::vector<std::size_t>& active() const { return active_; }

  Eigen::VectorXd objective() const override {
    Eigen::VectorXd c = Eigen::VectorXd::Zero(num_variables());
    c(r_index_) = 1.0;
    return c;
  }
  Eigen::VectorXd lower_bounds() const override {
    Eigen::VectorXd lb = Eigen::VectorXd::Zero(num_variables());
    // Rates are nonnegative, so R > -1 never binds; the bound gives the
    // Newton system curvature in R.
    lb(r_index_) = -1.0;
    return lb;
  }
  Eigen::SparseMatrix<double> equality_matrix() const override {
    std::vector<Eigen::Triplet<double>> t;
    for (std::size_t a = 0; a < active_.size(); ++a) {
      const auto& pool = prob_.pools[active_[a]];
      const int n = static_cast<int>(pool.wpt.size() + pool.wit.size());
      for (int i = 0; i < n; ++i) t.emplace_back(static_cast<int>(a), offset_[a] + i, 1.0);
    }
    Eigen::SparseMatrix<double> A(static_cast<int>(active_.size()), num_variables());
    A.setFromTriplets(t.begin(), t.end());
    return A;
  }
  Eigen::VectorXd equality_rhs() const override {
    Eigen::VectorXd b(active_.size());
    for (std::size_t a = 0; a < active_.size(); ++a) b(a) = prob_.pools[active_[a]].budget;
    return b;
  }
  double constraint_scale(int j) const override {
    if (j < K_) return prob_.period;
    return energy_scale_[j - K_] > 0.0 ? energy_scale_[j - K_] : 1.0;
  }

  bool evaluate(const Eigen::VectorXd& x, bool derivatives,
                std::vector<barrier::ConstraintValue>& out) const override {
    out.resize(2 * K_);
    for (auto& c : out) c.reset();
    const double inv_ln2 = 1.0 / std::numbers::ln2;
    for (std::size_t a = 0; a < active_.size(); ++a) {
      const auto& pool = prob_.pools[active_[a]];
      const int W = static_cast<int>(pool.wpt.size());
      const int V = static_cast<int>(pool.wit.size());
      const int base = offset_[a];
      for (int w = 0; w < W; ++w) {
        const double t = x(base + w);
        for (int k = 0; k < K_; ++k) {
          const double rate = pool.wpt[w].energy_rate[k];
          if (rate == 0.0) continue;
          out[K_ + k].value += rate * t;
          if (derivatives) out[K_ + k].add_gradient(base + w, rate);
        }
      }
      for (int v = 0; v < V; ++v) {
        const int si = base + W + v;
        const int ei = base + W + V + v;
        const double s = x(si);
        const double e = x(ei);
        if (!(s > 0.0) || e < 0.0) return false;
        const int k = static_cast<int>(pool.wit[v].user);
        const double c = pool.wit[v].snr_per_watt;
        auto& rc = out[k];
        auto& ec = out[K_ + k];
        ec.value -= e;
        if (derivatives) ec.add_gradient(ei, -1.0);
        const double u = c * e / s;
        rc.value += s * std::log1p(u) * inv_ln2;
        if (derivatives) {
          const double denom = s + c * e;
          rc.add_gradient(si, (std::log1p(u) - c * e / denom) * inv_ln2);
          rc.add_gradient(ei, c * s / denom * inv_ln2);
          // Rank-one negative semidefinite Hessian of the perspective.
          const double kappa = c * c / (s * denom * denom) * inv_ln2;
          if (kappa > 0.0) {
            rc.hessian.emplace_back(ei, ei, -kappa * s * s);
            rc.hessian.emplace_back(ei, si, kappa * s * e);
            rc.hessian.emplace_back(si, ei, kappa * s * e);
            rc.hessian.emplace_back(si, si, -kappa * e * e);
          }
        }
      }
    }
    const double R = x(r_index_);
    for (int k = 0; k < K_; ++k) {
      out[k].value -= prob_.period * R;
      if (derivatives) out[k].add_gradient(r_index_, -prob_.period);
    }
    return true;
  }

 private:
  const AllocationProblem& prob_;
  std::vector<std::size_t> active_;
  std::vector<int> offset_;
  std::vector<double> energy_scale_;
  int r_index_ = 0;
  int K_ = 0;
};

std::vector<double> harvest(const AllocationProblem& prob, std::span<const PoolAllocation> alloc) {
  std::vector<double> h(prob.num_users, 0.0);
  for (std::size_t p = 0; p < prob.pools.size(); ++p)
    for (std::size_t w = 0; w < prob.pools[p].wpt.size(); ++w)
      for (std::size_t k = 0; k < prob.num_users; ++k)
        h[k] += prob.pools[p].wpt[w].energy_rate[k] * alloc[p].wpt_time[w];
  return h;
}

std::vector<double> consumption(const AllocationProblem& prob, std::span<const PoolAllocation> alloc) {
  std::vector<double> c(prob.num_users, 0.0);
  for (std::size_t p = 0; p < prob.pools.size(); ++p)
    for (std::size_t v = 0; v < prob.pools[p].wit.size(); ++v)
      c[prob.pools[p].wit[v].user] += alloc[p].wit_energy[v];
  return c;
}

// Zeroes negligible durations (their time moves to the pool's longest WPT
// option), drops energy on zeroed WIT options and trims energies so that
// consumption never exceeds harvest.
void cleanup(const AllocationProblem& prob, std::vector<PoolAllocation>& alloc) {
  for (std::size_t p = 0; p < prob.pools.size(); ++p) {
    auto& a = alloc[p];
    const double budget = prob.pools[p].budget;
    double freed = 0.0;
    for (double& t : a.wpt_time)
      if (t < kZeroDuration) {
        freed += std::max(t, 0.0);
        t = 0.0;
      }
    for (std::size_t v = 0; v < a.wit_time.size(); ++v) {
      if (a.wit_time[v] < kZeroDuration) {
        freed += std::max(a.wit_time[v], 0.0);
        a.wit_time[v] = 0.0;
        a.wit_energy[v] = 0.0;
      }
      a.wit_energy[v] = std::max(a.wit_energy[v], 0.0);
    }
    // Restore the exact budget on the longest WPT option, or the longest WIT
    // option for pools without charging.
    double used = 0.0;
    for (double t : a.wpt_time) used += t;
    for (double t : a.wit_time) used += t;
    double* sink = nullptr;
    if (!a.wpt_time.empty()) sink = &*std::max_element(a.wpt_time.begin(), a.wpt_time.end());
    else if (!a.wit_time.empty()) sink = &*std::max_element(a.wit_time.begin(), a.wit_time.end());
    if (sink) *sink = std::max(0.0, *sink + (budget - used));
    (void)freed;
  }
  const auto h = harvest(prob, alloc);
  const auto c = consumption(prob, alloc);
  for (std::size_t k = 0; k < prob.num_users; ++k) {
    if (c[k] <= h[k]) continue;
    const double f = c[k] > 0.0 ? h[k] / c[k] : 0.0;
    for (std::size_t p = 0; p < prob.pools.size(); ++p)
      for (std::size_t v = 0; v < prob.pools[p].wit.size(); ++v)
        if (prob.pools[p].wit[v].user == k) alloc[p].wit_energy[v] *= f;
  }
}

}  // namespace

void AllocationProblem::validate() const {
  if (num_users == 0) throw std::invalid_argument("allocation problem has no users");
  if (!(period > 0.0)) throw std::invalid_argument("allocation period must be positive");
  for (const auto& pool : pools) {
    if (!(pool.budget >= 0.0) || !std::isfinite(pool.budget))
      throw std::invalid_argument("pool budgets must be nonnegative");
    if (pool.wpt.empty() && pool.wit.empty() && pool.budget > 0.0)
      throw std::invalid_argument("pool with positive budget has no options");
    for (const auto& w : pool.wpt) {
      if (w.energy_rate.size() != num_users) throw std::invalid_argument("WPT option has wrong user count");
      for (double r : w.energy_rate)
        if (!(r >= 0.0) || !std::isfinite(r)) throw std::invalid_argument("energy rates must be nonnegative");
    }
    for (const auto& v : pool.wit) {
      if (v.user >= num_users) throw std::invalid_argument("WIT option refers to an unknown user");
      if (!(v.snr_per_watt >= 0.0) || !std::isfinite(v.snr_per_watt))
        throw std::invalid_argument("WIT gains must be nonnegative");
    }
  }
}

std::optional<double> perspective_rate(double tau, double energy, double snr_per_watt) {
  if (tau < 0.0 || energy < 0.0) return std::nullopt;
  if (tau == 0.0) {
    if (energy == 0.0) return 0.0;
    return std::nullopt;
  }
  return tau * std::log1p(snr_per_watt * energy / tau) / std::numbers::ln2;
}

std::vector<double> user_rates(const AllocationProblem& prob, std::span<const PoolAllocation> alloc) {
  std::vector<double> r(prob.num_users, 0.0);
  for (std::size_t p = 0; p < prob.pools.size(); ++p) {
    const auto& pool = prob.pools[p];
    for (std::size_t v = 0; v < pool.wit.size(); ++v) {
      auto term = perspective_rate(alloc[p].wit_time[v], alloc[p].wit_energy[v], pool.wit[v].snr_per_watt);
      if (!term) throw std::domain_error("allocation spends energy in a zero-length sub-slot");
      r[pool.wit[v].user] += *term;
    }
  }
  for (double& x : r) x /= prob.period;
  return r;
}

double min_user_rate(const AllocationProblem& prob, std::span<const PoolAllocation> alloc) {
  const auto r = user_rates(prob, alloc);
  return *std::min_element(r.begin(), r.end());
}

AllocationSolution solve_allocation(const AllocationProblem& prob, const barrier::Options& opts) {
  prob.validate();
  std::vector<std::size_t> active;
  for (std::size_t p = 0; p < prob.pools.size(); ++p)
    if (prob.pools[p].budget > 0.0) active.push_back(p);
  if (active.empty()) throw std::invalid_argument("allocation problem has no time to allocate");

  AllocationProgram program(prob, active);
  const int K = static_cast<int>(prob.num_users);

  // Strictly feasible start: equal split of every pool, half of each
  // user's harvest spread over its WIT options, R below every rate.
  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(program.num_variables());
  std::vector<double> harvest0(K, 0.0);
  std::vector<int> wit_count(K, 0);
  for (std::size_t a = 0; a < active.size(); ++a) {
    const auto& pool = prob.pools[active[a]];
    const double share = pool.budget / static_cast<double>(pool.wpt.size() + pool.wit.size());
    const int base = program.offset(a);
    for (std::size_t w = 0; w < pool.wpt.size(); ++w) {
      x0(base + static_cast<int>(w)) = share;
      for (int k = 0; k < K; ++k) harvest0[k] += pool.wpt[w].energy_rate[k] * share;
    }
    for (std::size_t v = 0; v < pool.wit.size(); ++v) {
      x0(base + static_cast<int>(pool.wpt.size() + v)) = share;
      ++wit_count[pool.wit[v].user];
    }
  }
  for (std::size_t a = 0; a < active.size(); ++a) {
    const auto& pool = prob.pools[active[a]];
    const int base = program.offset(a);
    for (std::size_t v = 0; v < pool.wit.size(); ++v) {
      const std::size_t k = pool.wit[v].user;
      double e = 0.5 * harvest0[k] / wit_count[k];
      if (!(e > 0.0)) e = 1e-300;
      x0(base + static_cast<int>(pool.wpt.size() + pool.wit.size() + v)) = e;
    }
  }
  {
    std::vector<barrier::ConstraintValue> vals;
    x0(program.r_index()) = 0.0;
    program.evaluate(x0, false, vals);
    double minrate = std::numeric_limits<double>::infinity();
    for (int k = 0; k < K; ++k) minrate = std::min(minrate, vals[k].value / prob.period);
    x0(program.r_index()) = minrate > 0.0 ? 0.5 * minrate : -0.5;
  }

  const barrier::Result res = barrier::maximize(program, x0, opts);

  AllocationSolution sol;
  sol.pools.resize(prob.pools.size());
  for (std::size_t p = 0; p < prob.pools.size(); ++p) {
    sol.pools[p].wpt_time.assign(prob.pools[p].wpt.size(), 0.0);
    sol.pools[p].wit_time.assign(prob.pools[p].wit.size(), 0.0);
    sol.pools[p].wit_energy.assign(prob.pools[p].wit.size(), 0.0);
  }
  for (std::size_t a = 0; a < active.size(); ++a) {
    const auto& pool = prob.pools[active[a]];
    auto& out = sol.pools[active[a]];
    const int base = program.offset(a);
    const int W = static_cast<int>(pool.wpt.size());
    const int V = static_cast<int>(pool.wit.size());
    for (int w = 0; w < W; ++w) out.wpt_time[w] = res.x(base + w);
    for (int v = 0; v < V; ++v) {
      out.wit_time[v] = res.x(base + W + v);
      out.wit_energy[v] = res.x(base + W + V + v);
    }
  }
  cleanup(prob, sol.pools);
  sol.user_rate = user_rates(prob, sol.pools);
  sol.harvested = harvest(prob, sol.pools);
  sol.consumed = consumption(prob, sol.pools);
  sol.common_rate = *std::min_element(sol.user_rate.begin(), sol.user_rate.end());
  sol.gap = res.gap;
  sol.converged = res.converged;
  sol.newton_steps = res.newton_steps;
  return sol;
}

TimePool make_slot_pool(const Scenario& scn, Position2D q, double duration) {
  const std::size_t K = scn.num_users();
  TimePool pool;
  pool.budget = duration;
  WptOption w{q, std::vector<double>(K)};
  for (std::size_t k = 0; k < K; ++k) w.energy_rate[k] = harvested_power(scn, q, k);
  pool.wpt.push_back(std::move(w));
  for (std::size_t k = 0; k < K; ++k)
    pool.wit.push_back({k, q, channel_gain(scn, q, k) / scn.sigma2()});
  return pool;
}

TimePool make_hover_pool(const Scenario& scn, std::span<const Position2D> wpt_locations, double budget) {
  const std::size_t K = scn.num_users();
  TimePool pool;
  pool.budget = budget;
  for (const Position2D& q : wpt_locations) {
    WptOption w{q, std::vector<double>(K)};
    for (std::size_t k = 0; k < K; ++k) w.energy_rate[k] = harvested_power(scn, q, k);
    pool.wpt.push_back(std::move(w));
  }
  for (std::size_t k = 0; k < K; ++k) {
    const Position2D wk = scn.user(k);
    pool.wit.push_back({k, wk, channel_gain(scn, wk, k) / scn.sigma2()});
  }
  return pool;
}

AllocationSolution solve_p3(const AllocationProblem& prob, const barrier::Options& opts) {
  return solve_allocation(prob, opts);
}

AllocationProblem make_slot_problem(const Scenario& scn, const SlotSequence& slots) {
  AllocationProblem prob;
  prob.num_users = scn.num_users();
  prob.period = scn.period();
  for (std::size_t n = 0; n < slots.size(); ++n)
    prob.pools.push_back(make_slot_pool(scn, slots.position[n], slots.duration[n]));
  return prob;
}

AllocationSolution solve_slot_allocation(const Scenario& scn, const SlotSequence& slots,
                                         const barrier::Options& opts) {
  return solve_allocation(make_slot_problem(scn, slots), opts);
}

Schedule slots_to_schedule(const Scenario& scn, const SlotSequence& slots, const AllocationSolution& sol) {
  const std::size_t K = scn.num_users();
  if (sol.pools.size() != slots.size()) throw std::invalid_argument("allocation does not match the slots");
  Schedule sched;
  for (std::size_t n = 0; n < slots.size(); ++n) {
    const auto& a = sol.pools[n];
    if (a.wpt_time.size() != 1 || a.wit_time.size() != K)
      throw std::invalid_argument("pool is not a flight slot");
    Slot s;
    s.start = slots.start[n];
    s.duration = slots.duration[n];
    s.position = slots.position[n];
    s.wpt_time = a.wpt_time[0];
    s.wit_time = a.wit_time;
    s.uplink_power.assign(K, 0.0);
    for (std::size_t k = 0; k < K; ++k)
      if (a.wit_time[k] > kZeroDuration) s.uplink_power[k] = a.wit_energy[k] / a.wit_time[k];
    sched.slots.push_back(std::move(s));
  }
  return sched;
}

StaticSolution solve_static(const Scenario& scn, Position2D q, const barrier::Options& opts) {
  SlotSequence one;
  one.start = {0.0};
  one.duration = {scn.period()};
  one.position = {q};
  StaticSolution out;
  out.allocation = solve_slot_allocation(scn, one, opts);
  out.common_rate = out.allocation.common_rate;
  return out;
}

}  // namespace wpcn
