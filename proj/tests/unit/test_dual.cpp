#include <doctest.h>

#include "oracles.hpp"
#include "wpcn/dual.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace wpcn;
using namespace wpcn::dual;

namespace {

Scenario pair(double D, double T = 10.0) {
  return Scenario(ScenarioParams{.users = {{-D / 2, 0.0}, {D / 2, 0.0}}, .period = T});
}

double epsilon_formula(double D, double H) {
  return std::sqrt(-(D * D / 4 + H * H) + std::sqrt(std::pow(D, 4) / 4 + H * H * D * D));
}

}  // namespace

TEST_CASE("phi") {
  const Scenario one(ScenarioParams{.users = {{0, 0}}});
  const std::vector<double> zero{0.0}, unit{1.0};
  CHECK(phi(one, {2, 3}, zero) == 0.0);
  CHECK(phi(one, {0, 0}, unit) == doctest::Approx(2.0e-4));
  const Scenario a(ScenarioParams{.users = {{0, 0}, {4, 1}}});
  const Scenario b(ScenarioParams{.users = {{4, 1}, {0, 0}}});
  const std::vector<double> m{3.0, 7.0}, mr{7.0, 3.0};
  CHECK(phi(a, {1, 2}, m) == doctest::Approx(phi(b, {1, 2}, mr)).epsilon(1e-14));
}

TEST_CASE("charging location search") {
  const std::vector<double> eq{1.0, 1.0};
  SUBCASE("single user") {
    const Scenario one(ScenarioParams{.users = {{3, -2}}});
    const std::vector<double> m{1.0};
    const auto locs = search_wpt_locations(one, m);
    REQUIRE(locs.size() == 1);
    CHECK(distance(locs[0], {3, -2}) < 1e-9);
  }
  SUBCASE("two users D=10 split into two maximizers") {
    const Scenario scn = pair(10.0);
    const double eps = epsilon_formula(10.0, 5.0);
    CHECK(eps == doctest::Approx(4.5510).epsilon(1e-4));
    // Fine 1D scan oracle along the axis.
    double best = -1, arg = 0;
    for (double x = 0.0; x <= 5.0; x += 1e-5) {
      const double v = phi(scn, {x, 0}, eq);
      if (v > best) best = v, arg = x;
    }
    CHECK(arg == doctest::Approx(eps).epsilon(1e-4));
    const auto locs = search_wpt_locations(scn, eq);
    REQUIRE(locs.size() == 2);
    CHECK(locs[0].x == doctest::Approx(-eps).epsilon(1e-4));
    CHECK(locs[1].x == doctest::Approx(eps).epsilon(1e-4));
  }
  SUBCASE("two users D=5 share the midpoint") {
    const auto locs = search_wpt_locations(pair(5.0), eq);
    REQUIRE(locs.size() == 1);
    CHECK(std::abs(locs[0].x) < 1e-3);
  }
}

TEST_CASE("closed-form uplink power") {
  const Scenario scn(ScenarioParams{.users = {{0, 0}}});
  CHECK(optimal_uplink_power(scn, 0.0, 100.0) == 0.0);
  CHECK(optimal_uplink_power(scn, 0.5, 100.0) == doctest::Approx(0.5 / (1000 * std::numbers::ln2) - 25e-8));
  CHECK(optimal_uplink_power(scn, 0.5, 100.0) == doctest::Approx(7.2110e-4).epsilon(1e-4));
  CHECK(optimal_uplink_power(scn, 0.5, 200.0) < optimal_uplink_power(scn, 0.5, 100.0));
  CHECK(optimal_uplink_power(scn, 0.7, 100.0) > optimal_uplink_power(scn, 0.5, 100.0));
  CHECK_THROWS_AS(optimal_uplink_power(scn, 0.5, 0.0), std::invalid_argument);
}

TEST_CASE("subproblem modes") {
  const Scenario scn(ScenarioParams{.users = {{0, 0}}});
  DualVariables bad{{0.0}, {1.0}};
  CHECK_THROWS_AS(solve_subproblem(scn, bad), std::invalid_argument);

  DualVariables huge{{1.0}, {1e12}};
  const auto s = solve_subproblem(scn, huge);
  CHECK(s.power_k[0] == 0.0);
  CHECK(s.mode == Mode::Wpt);

  // K = 1 brute force over both candidate modes.
  for (double mu : {10.0, 100.0, 1000.0, 5000.0}) {
    DualVariables d{{1.0}, {mu}};
    const auto sol = solve_subproblem(scn, d);
    const double wpt = mu * 2e-4;
    double wit = -1e300;
    for (double Q = 0; Q < 0.05; Q += 1e-7) wit = std::max(wit, std::log2(1 + Q * 4e6) / 10.0 - mu * Q);
    CHECK(sol.objective == doctest::Approx(std::max(wpt, wit)).epsilon(1e-6));
    CHECK(sol.objective == std::max(sol.phi_star, sol.phi_k[0]));
  }
}

TEST_CASE("subgradient structure and validity") {
  const Scenario scn(ScenarioParams{.users = {{-4, 1}, {3, 0}, {0, 5}}});
  const WptSearch search(scn);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto random_duals = [&] {
    DualVariables d;
    double sum = 0;
    for (int k = 0; k < 3; ++k) {
      d.lambda.push_back(u(rng) + 1e-3);
      sum += d.lambda.back();
      d.mu.push_back(std::pow(10.0, 1.0 + 3.0 * u(rng)));
    }
    for (double& l : d.lambda) l /= sum;
    d.lambda[2] = 1.0 - d.lambda[0] - d.lambda[1];
    return d;
  };
  int wpt = 0, wit = 0;
  for (int i = 0; i < 100; ++i) {
    const DualVariables a = random_duals(), b = random_duals();
    const auto ea = dual_value_and_subgradient(scn, a, search);
    const auto eb = dual_value_and_subgradient(scn, b, search);
    double lin = ea.value;
    for (int k = 0; k < 3; ++k) {
      lin += ea.subgradient[k] * (b.lambda[k] - a.lambda[k]);
      lin += ea.subgradient[3 + k] * (b.mu[k] - a.mu[k]);
    }
    CHECK(eb.value >= lin - 1e-9 * std::abs(eb.value));
    if (ea.subproblem.mode == Mode::Wpt) {
      ++wpt;
      for (int k = 0; k < 3; ++k) CHECK(ea.subgradient[k] == 0.0);
    } else {
      ++wit;
      const std::size_t k = ea.subproblem.user;
      for (std::size_t j = 0; j < 3; ++j) {
        CHECK(ea.subgradient[3 + j] == (j == k ? -10.0 * ea.subproblem.power : 0.0));
        if (j != k) CHECK(ea.subgradient[j] == 0.0);
      }
    }
  }
  CHECK(wpt > 0);
  CHECK(wit > 0);
}

TEST_CASE("single-user dual matches the equalization bisection") {
  const Scenario scn(ScenarioParams{.users = {{0, 0}}});
  const auto res = solve_dual(scn);
  CHECK(res.converged);
  auto diff = [&](double mu) {
    DualVariables d{{1.0}, {mu}};
    const auto s = solve_subproblem(scn, d);
    return s.phi_star - s.phi_k[0];
  };
  double lo = 1e-3, hi = 1e6;
  for (int i = 0; i < 200; ++i) {
    const double mid = std::sqrt(lo * hi);
    (diff(mid) < 0 ? lo : hi) = mid;
  }
  CHECK(res.duals.mu[0] == doctest::Approx(lo).epsilon(1e-3));
  double best = std::numeric_limits<double>::infinity();
  for (const auto& row : res.trace) {
    CHECK(row.best <= best);
    best = row.best;
  }
}

TEST_CASE("symmetric pair has equal weights") {
  const auto res = solve_dual(pair(10.0));
  CHECK(res.converged);
  CHECK(res.duals.lambda[0] == doctest::Approx(0.5).epsilon(1e-3));
  CHECK(res.duals.lambda[1] == doctest::Approx(0.5).epsilon(1e-3));
  double best = std::numeric_limits<double>::infinity();
  for (const auto& row : res.trace) {
    CHECK(row.best <= best);
    best = row.best;
  }
}

TEST_CASE("time sharing LP against a 1D grid") {
  const Scenario scn(ScenarioParams{.users = {{0, 0}}});
  const std::vector<Position2D> w{{0, 0}};
  const std::vector<double> Q{2e-4};
  const auto sol = time_sharing_lp(scn, w, Q);
  const double a = 2e-4, r = std::log2(1 + 2e-4 * 4e6);
  double best = 0.0;
  for (double s = 0; s <= 10.0; s += 1e-4)
    if (s * Q[0] <= (10.0 - s) * a) best = std::max(best, s * r / 10.0);
  CHECK(sol.common_rate == doctest::Approx(best).epsilon(1e-3));
  CHECK(sol.total_time() == doctest::Approx(10.0).epsilon(1e-12));

  const Scenario two = pair(10.0);
  const std::vector<Position2D> w2{{-4.551, 0}, {4.551, 0}};
  const std::vector<double> Q2{1e-3, 1e-3};
  const auto s2 = time_sharing_lp(two, w2, Q2);
  CHECK(s2.wit_durations[0] == doctest::Approx(s2.wit_durations[1]).epsilon(1e-6));
  const auto s2t = time_sharing_lp(pair(10.0, 20.0), w2, Q2);
  CHECK(s2t.common_rate == doctest::Approx(s2.common_rate).epsilon(1e-9));
  CHECK(s2t.wit_durations[0] == doctest::Approx(2 * s2.wit_durations[0]).epsilon(1e-9));

  const std::vector<double> none{0.0, 0.0};
  const auto deg = time_sharing_lp(two, w2, none);
  CHECK(deg.degenerate);
  CHECK(deg.common_rate == 0.0);
  CHECK(deg.total_time() == doctest::Approx(10.0));
}

TEST_CASE("relaxed solution geometry") {
  SUBCASE("D=10: four hovering points") {
    const auto r = solve_relaxed(pair(10.0));
    const double eps = epsilon_formula(10.0, 5.0);
    REQUIRE(r.solution.wpt_locations.size() == 2);
    CHECK(std::abs(r.solution.wpt_locations[0].x + eps) < 5e-3);
    CHECK(std::abs(r.solution.wpt_locations[1].x - eps) < 5e-3);
    CHECK(r.solution.num_hover_points() == 4);
    CHECK(r.diagnostics.equalization_residual < 1e-2);
    CHECK(r.solution.total_time() == doctest::Approx(10.0).epsilon(1e-9));
    // Weak duality.
    CHECK(r.diagnostics.dual.value >= r.solution.common_rate * (1 - 1e-7));
    CHECK(r.solution.common_rate >= r.diagnostics.dual.value * (1 - 1e-4));
  }
  SUBCASE("D=5: three hovering points") {
    const auto r = solve_relaxed(pair(5.0));
    REQUIRE(r.solution.wpt_locations.size() == 1);
    CHECK(std::abs(r.solution.wpt_locations[0].x) < 5e-3);
    CHECK(r.solution.num_hover_points() == 3);
    CHECK(r.diagnostics.equalization_residual < 1e-2);
  }
  SUBCASE("rate does not depend on the period") {
    const auto a = solve_relaxed(pair(10.0, 10.0));
    const auto b = solve_relaxed(pair(10.0, 20.0));
    CHECK(a.solution.common_rate == doctest::Approx(b.solution.common_rate).epsilon(1e-4));
  }
}
