#include <doctest.h>

#include "wpcn/model.hpp"

#include <cmath>

using namespace wpcn;

namespace {
Scenario one_user() { return Scenario(ScenarioParams{.users = {{0.0, 0.0}}}); }
}  // namespace

TEST_CASE("channel gain and harvested power") {
  const Scenario scn = one_user();
  CHECK(channel_gain(scn, {0, 0}, 0) == doctest::Approx(4.0e-5).epsilon(1e-12));
  CHECK(channel_gain(scn, {3, 4}, 0) == doctest::Approx(2.0e-5).epsilon(1e-12));
  CHECK(harvested_power(scn, {0, 0}, 0) == doctest::Approx(2.0e-4).epsilon(1e-12));
  CHECK_THROWS_AS(channel_gain(scn, {0, 0}, 1), std::invalid_argument);
  double prev = channel_gain(scn, {0, 0}, 0);
  for (double d = 1; d < 1e4; d *= 2) {
    const double g = channel_gain(scn, {d, 0}, 0);
    CHECK(g < prev);
    prev = g;
  }
}

TEST_CASE("scenario invariants") {
  ScenarioParams p{.users = {{0, 0}}};
  p.eta = 0.0;
  CHECK_THROWS_AS(Scenario{p}, std::invalid_argument);
  p.eta = 0.5;
  p.users.clear();
  CHECK_THROWS_AS(Scenario{p}, std::invalid_argument);
  ScenarioParams q{.users = {{0, 0}}};
  q.power = 20.0;
  CHECK(harvested_power(Scenario(q), {1, 1}, 0) == doctest::Approx(2 * harvested_power(one_user(), {1, 1}, 0)));
}

TEST_CASE("instantaneous rate") {
  const Scenario scn = one_user();
  CHECK(instantaneous_rate(scn, {0, 0}, 0, 0.0) == 0.0);
  CHECK(instantaneous_rate(scn, {0, 0}, 0, 1e-3) == doctest::Approx(std::log2(4001.0)).epsilon(1e-12));
  CHECK(instantaneous_rate(scn, {0, 0}, 0, 1e-3) == doctest::Approx(11.9660).epsilon(2e-5));
  CHECK_THROWS_AS(instantaneous_rate(scn, {0, 0}, 0, -1.0), std::invalid_argument);
  CHECK(instantaneous_rate(scn, {1, 0}, 0, 1e-3) < instantaneous_rate(scn, {0.5, 0}, 0, 1e-3));
}

TEST_CASE("translation invariance of the gain") {
  ScenarioParams p{.users = {{1, 2}, {-3, 4}}};
  ScenarioParams shifted = p;
  for (auto& u : shifted.users) u = u + Position2D{7, -5};
  const Scenario a(p), b(shifted);
  for (std::size_t k = 0; k < 2; ++k)
    CHECK(channel_gain(a, {0.5, 0.25}, k) == doctest::Approx(channel_gain(b, {7.5, -4.75}, k)).epsilon(1e-14));
}

TEST_CASE("evaluate_schedule on a single hovering user") {
  const Scenario scn = one_user();
  const Trajectory traj = Trajectory::hover({0, 0}, 10.0);
  Schedule sched;
  const int N = 4;
  const double Q = 1e-4;
  for (int n = 0; n < N; ++n)
    sched.slots.push_back({n * 2.5, 2.5, {0, 0}, 1.25, {1.25}, {Q}});
  const ThroughputReport r = evaluate_schedule(scn, traj, sched);
  CHECK(r.harvested_energy[0] == doctest::Approx(2e-4 * 5.0));
  CHECK(r.consumed_energy[0] == doctest::Approx(Q * 5.0));
  CHECK(r.rate[0] == doctest::Approx(0.5 * std::log2(1 + Q * 4e-5 / 1e-11)));
  CHECK(r.common_rate == r.rate[0]);
  CHECK(r.neutral);

  // Scaling every duration by c scales energies and (per-period) rate sums.
  Schedule idle = sched;
  for (auto& s : idle.slots) s.uplink_power = {0.0};
  const ThroughputReport zero = evaluate_schedule(scn, traj, idle);
  CHECK(zero.common_rate == 0.0);
  CHECK(zero.consumed_energy[0] == 0.0);
  CHECK(zero.neutral);

  Schedule greedy = sched;
  for (auto& s : greedy.slots) s.uplink_power = {1.0};
  CHECK_FALSE(evaluate_schedule(scn, traj, greedy).neutral);
}

TEST_CASE("schedule structure checks") {
  const Scenario scn = one_user();
  const Trajectory traj = Trajectory::hover({0, 0}, 10.0);
  Schedule gap;
  gap.slots.push_back({0.0, 4.0, {0, 0}, 2.0, {2.0}, {0.0}});
  gap.slots.push_back({5.0, 5.0, {0, 0}, 2.5, {2.5}, {0.0}});
  CHECK_THROWS_AS(evaluate_schedule(scn, traj, gap), StructuralError);
  Schedule bad_split;
  bad_split.slots.push_back({0.0, 10.0, {0, 0}, 2.0, {2.0}, {0.0}});
  CHECK_THROWS_AS(evaluate_schedule(scn, traj, bad_split), StructuralError);
}

TEST_CASE("trajectory speed bound") {
  const Scenario scn = one_user();
  Trajectory ok({{0.0, {0, 0}}, {1.0, {10, 0}}, {10.0, {10, 0}}});
  CHECK_NOTHROW(ok.validate(scn));
  CHECK(ok.path_length() == doctest::Approx(10.0));
  CHECK(ok.position_at(0.5).x == doctest::Approx(5.0));
  Trajectory fast({{0.0, {0, 0}}, {1.0, {10.01, 0}}, {10.0, {10, 0}}});
  CHECK_THROWS_AS(fast.validate(scn), StructuralError);
}
