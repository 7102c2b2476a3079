#include "wpcn/planner.hpp"

#include "nelder_mead.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <stdexcept>
#include <thread>

namespace wpcn::planner {

HoverPointSet HoverPointSet::from_relaxed(const Scenario& scn, const dual::HoveringSolution& relaxed) {
  HoverPointSet set;
  for (std::size_t w = 0; w < relaxed.wpt_locations.size(); ++w)
    set.points.push_back({relaxed.wpt_locations[w], PointRole::Charging, w});
  for (std::size_t k = 0; k < scn.num_users(); ++k) set.points.push_back({scn.user(k), PointRole::User, k});
  return set;
}

std::vector<Position2D> HoverPointSet::positions() const {
  std::vector<Position2D> out;
  for (const auto& p : points) out.push_back(p.position);
  return out;
}

double open_path_length(std::span<const Position2D> points, std::span<const std::size_t> order) {
  double len = 0.0;
  for (std::size_t i = 1; i < order.size(); ++i) len += distance(points[order[i - 1]], points[order[i]]);
  return len;
}

namespace {

std::vector<std::size_t> held_karp(std::span<const Position2D> pts) {
  const std::size_t n = pts.size();
  const std::size_t full = (std::size_t{1} << n) - 1;
  // rest[mask * n + i]: shortest path starting at i that visits every point
  // outside mask (i itself is in mask).
  std::vector<double> rest((full + 1) * n, std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < n; ++i) rest[full * n + i] = 0.0;
  for (std::size_t mask = full; mask-- > 0;) {
    for (std::size_t i = 0; i < n; ++i) {
      if (!(mask >> i & 1)) continue;
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < n; ++j) {
        if (mask >> j & 1) continue;
        best = std::min(best, distance(pts[i], pts[j]) + rest[(mask | std::size_t{1} << j) * n + j]);
      }
      rest[mask * n + i] = best;
    }
  }
  // Greedy reconstruction picks the smallest index among (near-)ties, which
  // yields the lexicographically smallest optimal order.
  double total = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) total = std::min(total, rest[(std::size_t{1} << i) * n + i]);
  const double tie = 1e-9 * (1.0 + total);
  std::vector<std::size_t> order;
  std::size_t mask = 0, cur = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (rest[(std::size_t{1} << i) * n + i] <= total + tie) {
      cur = i;
      break;
    }
  order.push_back(cur);
  mask = std::size_t{1} << cur;
  while (mask != full) {
    const double target = rest[mask * n + cur];
    for (std::size_t j = 0; j < n; ++j) {
      if (mask >> j & 1) continue;
      const std::size_t next = mask | std::size_t{1} << j;
      if (distance(pts[cur], pts[j]) + rest[next * n + j] <= target + tie) {
        cur = j;
        mask = next;
        order.push_back(j);
        break;
      }
    }
  }
  return order;
}

// 2-opt on an open path: the path ends carry free edges to the dummy node,
// so reversing a prefix or suffix only pays for one new edge.
void two_opt(std::span<const Position2D> pts, std::vector<std::size_t>& order) {
  const std::size_t n = order.size();
  auto d = [&](std::size_t a, std::size_t b) { return distance(pts[order[a]], pts[order[b]]); };
  bool improved = true;
  while (improved) {
    improved = false;
    for (std::size_t i = 0; i + 1 < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        const double before = (i > 0 ? d(i - 1, i) : 0.0) + (j + 1 < n ? d(j, j + 1) : 0.0);
        const double after = (i > 0 ? d(i - 1, j) : 0.0) + (j + 1 < n ? d(i, j + 1) : 0.0);
        if (after < before - 1e-12) {
          std::reverse(order.begin() + static_cast<std::ptrdiff_t>(i), order.begin() + static_cast<std::ptrdiff_t>(j) + 1);
          improved = true;
        }
      }
  }
}

std::vector<std::size_t> heuristic_tour(std::span<const Position2D> pts, std::uint64_t seed) {
  const std::size_t n = pts.size();
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> best;
  double best_len = std::numeric_limits<double>::infinity();
  constexpr int kRestarts = 50;
  for (int r = 0; r < kRestarts; ++r) {
    const std::size_t start = r == 0 ? 0 : static_cast<std::size_t>(rng() % n);
    std::vector<bool> used(n, false);
    std::vector<std::size_t> order{start};
    used[start] = true;
    while (order.size() < n) {
      std::size_t next = n;
      double dn = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < n; ++j)
        if (!used[j] && distance(pts[order.back()], pts[j]) < dn) dn = distance(pts[order.back()], pts[j]), next = j;
      used[next] = true;
      order.push_back(next);
    }
    two_opt(pts, order);
    const double len = open_path_length(pts, order);
    if (len < best_len - 1e-12 || (std::abs(len - best_len) <= 1e-12 && order < best)) {
      best_len = len;
      best = order;
    }
  }
  return best;
}

}  // namespace

TourPlan plan_tour(std::span<const Position2D> points, double vmax, std::uint64_t seed) {
  if (points.empty()) throw std::invalid_argument("tour needs at least one point");
  if (!(vmax > 0.0)) throw std::invalid_argument("vmax must be positive");
  TourPlan plan;
  if (points.size() == 1) {
    plan.order = {0};
  } else if (points.size() <= kExactTourLimit) {
    plan.order = held_karp(points);
  } else {
    plan.order = heuristic_tour(points, seed);
    plan.exact = false;
  }
  for (std::size_t i = 1; i < plan.order.size(); ++i)
    plan.legs.push_back(distance(points[plan.order[i - 1]], points[plan.order[i]]));
  plan.distance = std::accumulate(plan.legs.begin(), plan.legs.end(), 0.0);
  plan.fly_time = plan.distance / vmax;
  return plan;
}

Trajectory build_hover_and_fly(const Scenario& scn, std::span<const Position2D> points, const TourPlan& tour,
                               std::span<const double> durations) {
  const double T = scn.period();
  if (durations.size() != points.size()) throw std::invalid_argument("one hover duration per point is required");
  if (tour.fly_time > T * (1.0 + kTolerances.structural))
    throw std::invalid_argument("period is shorter than the flight time; use the scaled trajectory");
  double hover = 0.0;
  for (double d : durations) {
    if (!(d >= 0.0)) throw std::invalid_argument("hover durations must be nonnegative");
    hover += d;
  }
  if (std::abs(hover + tour.fly_time - T) > 1e-9 * T)
    throw std::invalid_argument("hover durations must fill the period minus the flight time");

  std::vector<Trajectory::Waypoint> wp{{0.0, points[tour.order.front()]}};
  double t = 0.0;
  for (std::size_t i = 0; i < tour.order.size(); ++i) {
    const std::size_t p = tour.order[i];
    if (durations[p] > 0.0) {
      t += durations[p];
      wp.push_back({t, points[p]});
    }
    if (i + 1 < tour.order.size() && tour.legs[i] > 0.0) {
      t += tour.legs[i] / scn.vmax();
      wp.push_back({t, points[tour.order[i + 1]]});
    }
  }
  if (wp.size() == 1) wp.push_back({T, wp.front().position});
  wp.back().time = T;
  return Trajectory(std::move(wp));
}

Trajectory scale_trajectory(const Trajectory& base, Position2D q_fix, double period) {
  const double T_fly = base.duration();
  if (!(period > 0.0)) throw std::invalid_argument("period must be positive");
  const double nu = period / T_fly;
  if (!(nu < 1.0)) throw std::invalid_argument("scaling needs a period shorter than the base path");
  std::vector<Trajectory::Waypoint> wp;
  for (const auto& w : base.waypoints()) wp.push_back({nu * w.time, nu * w.position + (1.0 - nu) * q_fix});
  wp.back().time = period;
  return Trajectory(std::move(wp));
}

SlotSequence segment_slots(const Trajectory& traj, double max_slot) {
  if (!(max_slot > 0.0)) throw std::invalid_argument("slot length must be positive");
  SlotSequence s;
  const auto wp = traj.waypoints();
  for (std::size_t i = 1; i < wp.size(); ++i) {
    const double t0 = wp[i - 1].time, t1 = wp[i].time;
    const double dt = t1 - t0;
    if (!(dt > 0.0)) continue;
    const int m = std::max(1, static_cast<int>(std::ceil(dt / max_slot - 1e-9)));
    for (int j = 0; j < m; ++j) {
      const double a = t0 + dt * j / m;
      const double b = j + 1 == m ? t1 : t0 + dt * (j + 1) / m;
      const double f = (j + 0.5) / m;
      s.start.push_back(a);
      s.duration.push_back(b - a);
      s.position.push_back(wp[i - 1].position + f * (wp[i].position - wp[i - 1].position));
    }
  }
  return s;
}

StaticResult static_hover_search(const Scenario& scn, double step, unsigned threads) {
  const auto box = scn.user_box();
  const double span = std::max(box.hi.x - box.lo.x, box.hi.y - box.lo.y);
  const double h = step > 0.0 ? step : std::max(0.25, span / 40.0);
  const int nx = static_cast<int>(std::floor((box.hi.x - box.lo.x) / h + 1e-9)) + 1;
  const int ny = static_cast<int>(std::floor((box.hi.y - box.lo.y) / h + 1e-9)) + 1;
  const int cells = nx * ny;
  std::vector<double> value(cells);
  auto point = [&](int c) { return Position2D{box.lo.x + (c / ny) * h, box.lo.y + (c % ny) * h}; };

  std::atomic<int> next{0};
  auto work = [&] {
    for (int c = next++; c < cells; c = next++) value[c] = solve_static(scn, point(c)).common_rate;
  };
  unsigned nthreads = threads ? threads : std::max(1u, std::thread::hardware_concurrency());
  nthreads = std::min<unsigned>(nthreads, static_cast<unsigned>(cells));
  std::vector<std::thread> pool;
  for (unsigned i = 1; i < nthreads; ++i) pool.emplace_back(work);
  work();
  for (auto& th : pool) th.join();

  // Refine from the few best cells; ties resolve to the smaller cell index.
  std::vector<int> idx(cells);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return value[a] > value[b]; });
  StaticResult best;
  best.common_rate = -1.0;
  best.evaluations = cells;
  auto f = [&](Position2D q) { return solve_static(scn, q).common_rate; };
  for (std::size_t r = 0; r < std::min<std::size_t>(3, idx.size()); ++r) {
    const auto res = detail::nelder_mead_max(f, point(idx[r]), box.lo, box.hi, 0.5 * h, 1e-3, 400);
    best.evaluations += res.evaluations;
    const Position2D q = res.value >= value[idx[r]] ? res.point : point(idx[r]);
    const double v = std::max(res.value, value[idx[r]]);
    if (v > best.common_rate) {
      best.common_rate = v;
      best.position = q;
    }
  }
  best.solution = solve_static(scn, best.position);
  best.common_rate = best.solution.common_rate;
  return best;
}

Schedule static_schedule(const Scenario& scn, const StaticResult& res) {
  SlotSequence one;
  one.start = {0.0};
  one.duration = {scn.period()};
  one.position = {res.position};
  return slots_to_schedule(scn, one, res.solution.allocation);
}

double slot_length(const Scenario& scn, int slots) {
  const double T = scn.period();
  const int n = slots > 0 ? slots : std::max(1, static_cast<int>(std::ceil(5.0 * T - 1e-9)));
  return T / n;
}

namespace {

// Schedule for the hover branch: one slot per hover point with positive
// duration and the flight slots of each leg, in time order.
struct HoverBranch {
  Trajectory trajectory;
  Schedule schedule;
  AllocationSolution allocation;
  std::vector<double> durations;
};

HoverBranch hover_branch(const Scenario& scn, const HoverPointSet& set, const TourPlan& tour, double max_slot) {
  const std::size_t K = scn.num_users();
  const double T = scn.period();
  const auto pts = set.positions();
  std::vector<Position2D> charging;
  for (const auto& p : set.points)
    if (p.role == PointRole::Charging) charging.push_back(p.position);

  AllocationProblem prob{.num_users = K, .period = T};
  prob.pools.push_back(make_hover_pool(scn, charging, std::max(0.0, T - tour.fly_time)));

  // Flight slots of every leg, in relative time.
  struct LegSlots {
    std::size_t first_pool;
    std::vector<double> frac_start, frac_len;
    std::vector<Position2D> pos;
  };
  std::vector<LegSlots> legs;
  for (std::size_t i = 0; i + 1 < tour.order.size(); ++i) {
    LegSlots ls{prob.pools.size(), {}, {}, {}};
    const double dt = tour.legs[i] / scn.vmax();
    if (dt > 0.0) {
      const Position2D a = pts[tour.order[i]], b = pts[tour.order[i + 1]];
      const int m = std::max(1, static_cast<int>(std::ceil(dt / max_slot - 1e-9)));
      for (int j = 0; j < m; ++j) {
        const Position2D q = a + ((j + 0.5) / m) * (b - a);
        ls.pos.push_back(q);
        prob.pools.push_back(make_slot_pool(scn, q, dt / m));
      }
    }
    legs.push_back(std::move(ls));
  }

  HoverBranch out;
  out.allocation = solve_p3(prob);
  const PoolAllocation& hov = out.allocation.pools[0];

  out.durations.assign(set.size(), 0.0);
  std::size_t charging_seen = 0;
  for (std::size_t p = 0; p < set.size(); ++p) {
    const auto& hp = set.points[p];
    out.durations[p] = hp.role == PointRole::Charging ? hov.wpt_time[charging_seen++] : hov.wit_time[hp.index];
  }
  // Exact fill of T - T_fly despite rounding in the pool sum.
  double hover_sum = std::accumulate(out.durations.begin(), out.durations.end(), 0.0);
  const double target = std::max(0.0, T - tour.fly_time);
  if (hover_sum > 0.0) {
    auto longest = std::max_element(out.durations.begin(), out.durations.end());
    *longest = std::max(0.0, *longest + target - hover_sum);
  }
  out.trajectory = build_hover_and_fly(scn.with_period(T), pts, tour, out.durations);

  double t = 0.0;
  auto push = [&](Slot s) {
    s.start = t;
    t += s.duration;
    out.schedule.slots.push_back(std::move(s));
  };
  for (std::size_t i = 0; i < tour.order.size(); ++i) {
    const std::size_t p = tour.order[i];
    const auto& hp = set.points[p];
    if (out.durations[p] > 0.0) {
      Slot s;
      s.duration = out.durations[p];
      s.position = hp.position;
      s.wit_time.assign(K, 0.0);
      s.uplink_power.assign(K, 0.0);
      if (hp.role == PointRole::Charging) {
        s.wpt_time = s.duration;
      } else {
        s.wit_time[hp.index] = s.duration;
        s.uplink_power[hp.index] = hov.wit_energy[hp.index] / hov.wit_time[hp.index];
      }
      push(std::move(s));
    }
    if (i + 1 < tour.order.size()) {
      const auto& ls = legs[i];
      for (std::size_t j = 0; j < ls.pos.size(); ++j) {
        const auto& a = out.allocation.pools[ls.first_pool + j];
        Slot s;
        s.duration = prob.pools[ls.first_pool + j].budget;
        s.position = ls.pos[j];
        s.wpt_time = a.wpt_time[0];
        s.wit_time = a.wit_time;
        s.uplink_power.assign(K, 0.0);
        for (std::size_t k = 0; k < K; ++k)
          if (a.wit_time[k] > 1e-9) s.uplink_power[k] = a.wit_energy[k] / a.wit_time[k];
        push(std::move(s));
      }
    }
  }
  // Flight slot starts are accumulated; pin the end of the last slot to T.
  if (!out.schedule.slots.empty()) {
    Slot& last = out.schedule.slots.back();
    const double fix = T - (last.start + last.duration);
    last.duration += fix;
    if (last.wpt_time > 0.0 || std::all_of(last.wit_time.begin(), last.wit_time.end(), [](double v) { return v == 0.0; }))
      last.wpt_time += fix;
    else
      *std::max_element(last.wit_time.begin(), last.wit_time.end()) += fix;
  }
  return out;
}

}  // namespace

HoverFlyPlan plan_hover_and_fly(const Scenario& scn, const dual::HoveringSolution& relaxed,
                                const HoverFlyOptions& opts) {
  const double T = scn.period();
  HoverFlyPlan plan;
  plan.points = HoverPointSet::from_relaxed(scn, relaxed);
  const auto pts = plan.points.positions();
  plan.tour = plan_tour(pts, scn.vmax(), opts.seed);
  const double max_slot = slot_length(scn, opts.slots);

  if (T >= plan.tour.fly_time) {
    HoverBranch hb = hover_branch(scn, plan.points, plan.tour, max_slot);
    plan.hover_durations = std::move(hb.durations);
    plan.trajectory = std::move(hb.trajectory);
    plan.schedule = std::move(hb.schedule);
    plan.allocation = std::move(hb.allocation);
    plan.common_rate = plan.allocation.common_rate;
  } else {
    plan.scaled = true;
    plan.nu = T / plan.tour.fly_time;
    plan.hover_durations.assign(pts.size(), 0.0);
    const Scenario flight = scn.with_period(plan.tour.fly_time);
    const Trajectory base = build_hover_and_fly(flight, pts, plan.tour, plan.hover_durations);
    plan.q_fix = static_hover_search(scn, opts.static_grid, opts.threads).position;
    plan.trajectory = scale_trajectory(base, plan.q_fix, T);
    const SlotSequence slots = segment_slots(plan.trajectory, max_slot);
    plan.allocation = solve_slot_allocation(scn, slots);
    plan.schedule = slots_to_schedule(scn, slots, plan.allocation);
    plan.common_rate = plan.allocation.common_rate;
  }
  plan.slots = segment_slots(plan.trajectory, max_slot);
  return plan;
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  os << "t,x,y\n";
  os.precision(17);
  for (const auto& w : traj.waypoints()) os << w.time << ',' << w.position.x << ',' << w.position.y << '\n';
}

}  // namespace wpcn::planner
