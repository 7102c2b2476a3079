#include <doctest.h>

#include "wpcn/runner.hpp"
#include "wpcn/scenario_io.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

using namespace wpcn;
using namespace wpcn::io;

namespace {

const char* kJson = R"({
  "name": "pair",
  "users": [[-5, 0], [5, 0]],
  "altitude_m": 5, "beta0_db": -30, "sigma2_dbm": -80, "eta": 0.5,
  "p_dbm": 40, "vmax_mps": 10, "period_s": 10
})";

const char* kToml = R"(
name = "pair"
users = [[-5.0, 0.0], [5.0, 0.0]]
altitude_m = 5
beta0_db = -30.0
sigma2_dbm = -80.0
eta = 0.5
p_dbm = 40.0
vmax_mps = 10.0
period_s = 10.0
)";

std::string error_key(std::string_view text, Format f = Format::Json) {
  try {
    parse_scenario(text, f, "x");
  } catch (const ParseError& e) {
    return e.key();
  }
  return "<no error>";
}

}  // namespace

TEST_CASE("unit conversions") {
  CHECK(db_to_linear(-30.0) == doctest::Approx(1e-3).epsilon(1e-14));
  CHECK(dbm_to_watts(-80.0) == doctest::Approx(1e-11).epsilon(1e-14));
  CHECK(dbm_to_watts(40.0) == doctest::Approx(10.0).epsilon(1e-14));
}

TEST_CASE("JSON and TOML documents describe the same instance") {
  const auto a = parse_scenario(kJson, Format::Json, "ignored");
  const auto b = parse_scenario(kToml, Format::Toml, "ignored");
  CHECK(a.name == "pair");
  CHECK(b.name == "pair");
  CHECK(scenario_digest(a.scenario()) == scenario_digest(b.scenario()));
  CHECK(a.params.sigma2 == doctest::Approx(1e-11));
  CHECK(a.params.power == doctest::Approx(10.0));
  CHECK(a.params.beta0 == doctest::Approx(1e-3));
}

TEST_CASE("digest tracks every parameter") {
  const auto base = parse_scenario(kJson, Format::Json, "x");
  auto moved = base;
  moved.params.period = std::nextafter(10.0, 11.0);
  CHECK(scenario_digest(base.scenario()) != scenario_digest(moved.scenario()));
  auto user = base;
  user.params.users[0].y = 1e-12;
  CHECK(scenario_digest(base.scenario()) != scenario_digest(user.scenario()));
  CHECK(scenario_digest(base.scenario()).size() == 16);
}

TEST_CASE("defaults fill in the physical constants") {
  const auto f = parse_scenario(R"({"users": [[0, 0]], "period_s": 4})", Format::Json, "stem");
  CHECK(f.name == "stem");
  CHECK(f.params.altitude == 5.0);
  CHECK(f.params.eta == 0.5);
  CHECK(f.params.vmax == 10.0);
  CHECK(f.params.power == doctest::Approx(10.0));
}

TEST_CASE("seeded layouts are reproducible and inside the area") {
  const RandomLayout l{3, 9, 20.0, 20.0};
  const auto a = l.generate();
  const auto b = l.generate();
  REQUIRE(a.size() == 9);
  CHECK(a == b);
  for (const auto& u : a) {
    CHECK(u.x >= 0.0);
    CHECK(u.x < 20.0);
    CHECK(u.y >= 0.0);
    CHECK(u.y < 20.0);
  }
  CHECK(RandomLayout{4, 9, 20.0, 20.0}.generate() != a);

  const auto f = parse_scenario(R"(
period_s = 12
[layout]
seed = 3
count = 9
width_m = 20
height_m = 20
)",
                                Format::Toml, "n");
  REQUIRE(f.layout);
  CHECK(f.params.users == a);
}

TEST_CASE("malformed documents name the offending key") {
  CHECK(error_key(R"({"users": [[0, 0]], "period_s": 10, "eta": 1.5})") == "eta");
  CHECK(error_key(R"({"users": [[0, 0]], "period_s": -1})") == "period_s");
  CHECK(error_key(R"({"users": [[0, 0]]})") == "period_s");
  CHECK(error_key(R"({"users": [[0, 0]], "period_s": 1, "altitud_m": 5})") == "altitud_m");
  CHECK(error_key(R"({"users": [[0, 0], [1]], "period_s": 1})") == "users[1]");
  CHECK(error_key(R"({"users": [], "period_s": 1})") == "users");
  CHECK(error_key(R"({"period_s": 1})") == "users");
  CHECK(error_key(R"({"users": [[0, 0]], "period_s": "ten"})") == "period_s");
  CHECK(error_key(R"({"users": [[0, 0]], "period_s": 1, "solver": {"slots": -2}})") == "solver.slots");
  CHECK(error_key(R"({"users": [[0, 0]], "period_s": 1, "solver": {"tol": 1}})") == "solver.tol");
  CHECK(error_key(R"({"period_s": 1, "layout": {"seed": 1, "count": 3, "width_m": 5}})") == "layout.height_m");
  CHECK(error_key(R"({"users": [[0, 0]], "period_s": 1, "name": "a/b"})") == "name");
  CHECK(error_key("{not json") == "");
  CHECK(error_key("period_s = ", Format::Toml) == "");
  CHECK_THROWS_AS(format_for("scenario.yaml"), ParseError);
}

TEST_CASE("solver overrides are read") {
  const auto f = parse_scenario(
      R"({"users": [[0, 0]], "period_s": 1, "solver": {"scp_tol": 1e-5, "slots": 40, "seed": 7, "wpt_grid_m": 0.2}})",
      Format::Json, "x");
  CHECK(f.solver.scp_tol == 1e-5);
  CHECK(f.solver.slots == 40);
  CHECK(f.solver.seed == 7);
  CHECK(f.solver.wpt_grid_m == 0.2);
  run::Overrides ov;
  ov.tol = 1e-3;
  ov.grid = 0.5;
  CHECK(run::effective_settings(f, run::Method::Scp, ov).scp_tol == 1e-3);
  CHECK(run::effective_settings(f, run::Method::Relaxed, ov).dual_tol == 1e-3);
  CHECK(run::effective_settings(f, run::Method::Relaxed, ov).scp_tol == 1e-5);
  CHECK(run::effective_settings(f, run::Method::Static, ov).static_grid_m == 0.5);
}

TEST_CASE("load_scenario reads files and uses the stem as default name") {
  const auto dir = std::filesystem::temp_directory_path() / "wpcn_io_test";
  std::filesystem::create_directories(dir);
  {
    std::ofstream(dir / "fromfile.toml") << "users = [[1.0, 2.0]]\nperiod_s = 3.0\n";
  }
  const auto f = load_scenario(dir / "fromfile.toml");
  CHECK(f.name == "fromfile");
  CHECK(f.params.users[0] == Position2D{1.0, 2.0});
  CHECK_THROWS_AS(load_scenario(dir / "missing.json"), ParseError);
  std::filesystem::remove_all(dir);
}
