#include <doctest.h>

#include "oracles.hpp"
#include "wpcn/allocation.hpp"

#include <cmath>
#include <random>

using namespace wpcn;

namespace {

Scenario pair(double D, double T = 10.0) {
  return Scenario(ScenarioParams{.users = {{-D / 2, 0.0}, {D / 2, 0.0}}, .period = T});
}

}  // namespace

TEST_CASE("perspective rate domain") {
  CHECK(*perspective_rate(0.0, 0.0, 1e6) == 0.0);
  CHECK_FALSE(perspective_rate(0.0, 1e-6, 1e6).has_value());
  CHECK(*perspective_rate(2.0, 1e-6, 1e6) == doctest::Approx(2.0 * std::log2(1.5)));
}

TEST_CASE("perspective rate is jointly concave") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double c = 4e6;
  for (int i = 0; i < 2000; ++i) {
    const double t1 = u(rng), t2 = u(rng), e1 = 1e-5 * u(rng), e2 = 1e-5 * u(rng);
    const double mid = *perspective_rate(0.5 * (t1 + t2), 0.5 * (e1 + e2), c);
    const double avg = 0.5 * (*perspective_rate(t1, e1, c) + *perspective_rate(t2, e2, c));
    CHECK(mid >= avg - 1e-12);
  }
}

TEST_CASE("single user hovering over the user matches the 1D oracle") {
  const Scenario scn(ScenarioParams{.users = {{0.0, 0.0}}});
  const auto sol = solve_static(scn, {0.0, 0.0});
  const double a = harvested_power(scn, {0, 0}, 0);
  const double c = channel_gain(scn, {0, 0}, 0) / scn.sigma2();
  const double ref = oracle::single_user_split(a, c, scn.period());
  CHECK(sol.common_rate == doctest::Approx(ref).epsilon(1e-3));
  CHECK(sol.common_rate >= ref - 1e-9);
  CHECK(sol.allocation.consumed[0] <= sol.allocation.harvested[0] * (1 + 1e-12));
}

TEST_CASE("single user off-centre static hover matches the oracle") {
  const Scenario scn(ScenarioParams{.users = {{0.0, 0.0}}});
  const Position2D q{3.0, -2.0};
  const auto sol = solve_static(scn, q);
  const double a = harvested_power(scn, q, 0);
  const double c = channel_gain(scn, q, 0) / scn.sigma2();
  CHECK(sol.common_rate == doctest::Approx(oracle::single_user_split(a, c, scn.period())).epsilon(1e-3));
}

TEST_CASE("symmetric pair at the midpoint") {
  const Scenario scn = pair(10.0);
  const auto sol = solve_static(scn, {0.0, 0.0});
  const auto& p = sol.allocation.pools[0];
  CHECK(p.wit_time[0] == doctest::Approx(p.wit_time[1]).epsilon(1e-6));
  CHECK(sol.allocation.user_rate[0] == doctest::Approx(sol.allocation.user_rate[1]).epsilon(1e-6));
  const double a[2] = {harvested_power(scn, {0, 0}, 0), harvested_power(scn, {0, 0}, 1)};
  const double c[2] = {channel_gain(scn, {0, 0}, 0) / scn.sigma2(), channel_gain(scn, {0, 0}, 1) / scn.sigma2()};
  CHECK(sol.common_rate == doctest::Approx(oracle::two_user_split(a, c, scn.period(), 1e-3)).epsilon(1e-3));
  // Off-centre static positions are never better.
  for (double x : {-4.0, -2.0, 1.0, 3.0})
    for (double y : {-2.0, 0.0, 2.0}) CHECK(solve_static(scn, {x, y}).common_rate <= sol.common_rate + 1e-9);
}

TEST_CASE("hover pool with one charging point above a single user") {
  const Scenario scn(ScenarioParams{.users = {{0.0, 0.0}}});
  AllocationProblem prob{.num_users = 1, .period = scn.period()};
  const std::vector<Position2D> wpt{{0.0, 0.0}};
  prob.pools.push_back(make_hover_pool(scn, wpt, scn.period()));
  const auto sol = solve_p3(prob);
  const double a = harvested_power(scn, {0, 0}, 0);
  const double c = channel_gain(scn, {0, 0}, 0) / scn.sigma2();
  CHECK(sol.common_rate == doctest::Approx(oracle::single_user_split(a, c, scn.period())).epsilon(1e-3));
}

TEST_CASE("identical slots receive identical allocations") {
  const Scenario scn = pair(6.0);
  SlotSequence slots;
  for (int n = 0; n < 5; ++n) {
    slots.start.push_back(2.0 * n);
    slots.duration.push_back(2.0);
    slots.position.push_back({1.0, 0.5});
  }
  const auto sol = solve_slot_allocation(scn, slots);
  const auto stat = solve_static(scn, {1.0, 0.5});
  CHECK(sol.common_rate == doctest::Approx(stat.common_rate).epsilon(1e-6));
  for (int n = 1; n < 5; ++n)
    CHECK(sol.pools[n].wpt_time[0] == doctest::Approx(sol.pools[0].wpt_time[0]).epsilon(1e-4));
  // Min-rate users: both rates equal R.
  CHECK(sol.user_rate[0] == doctest::Approx(sol.common_rate).epsilon(1e-6));
  CHECK(sol.user_rate[1] == doctest::Approx(sol.common_rate).epsilon(1e-6));

  const Schedule sched = slots_to_schedule(scn, slots, sol);
  Trajectory traj({{0.0, {1.0, 0.5}}, {10.0, {1.0, 0.5}}});
  const auto rep = evaluate_schedule(scn, traj, sched);
  CHECK(rep.neutral);
  CHECK(rep.common_rate == doctest::Approx(sol.common_rate).epsilon(1e-9));
}

TEST_CASE("far-away slots still give a feasible allocation") {
  const Scenario scn = pair(2.0);
  const auto sol = solve_static(scn, {5000.0, 0.0});
  CHECK(sol.common_rate >= 0.0);
  CHECK(sol.common_rate < 1e-6);
}

TEST_CASE("empty problem is rejected") {
  AllocationProblem prob{.num_users = 1, .period = 1.0};
  CHECK_THROWS_AS(solve_allocation(prob), std::invalid_argument);
}
