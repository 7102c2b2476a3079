#include <doctest.h>

#include "wpcn/runner.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace wpcn;

namespace {

io::ScenarioFile pair_file(double D, double T) {
  io::ScenarioFile f;
  f.name = "pair";
  f.params.users = {{-D / 2, 0.0}, {D / 2, 0.0}};
  f.params.period = T;
  return f;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

}  // namespace

TEST_CASE("relaxed report for two users lists four hovering locations") {
  const auto run = run::solve_relaxed(pair_file(10.0, 10.0));
  CHECK(run.converged);
  CHECK(run.validation.passed());
  CHECK(run.report["hovering_locations"].size() == 4);
  CHECK(run.report["num_wpt_locations"] == 2);
  CHECK(run.report["method"] == "relaxed");
}

TEST_CASE("single user is charged and served from directly above") {
  io::ScenarioFile f;
  f.name = "one";
  f.params.users = {{3.0, -1.0}};
  f.params.period = 5.0;
  const auto run = run::solve_relaxed(f);
  CHECK(run.common_rate > 0.0);
  // Charging and uplink both happen above the user: two roles, one place.
  const auto& pts = run.report["hovering_locations"];
  REQUIRE(pts.size() == 2);
  for (const auto& p : pts) {
    CHECK(p["duration_s"].get<double>() > 0.0);
    CHECK(p["position"][0].get<double>() == doctest::Approx(3.0).epsilon(1e-3));
    CHECK(p["position"][1].get<double>() == doctest::Approx(-1.0).epsilon(1e-3));
  }
}

TEST_CASE("short period takes the scaled branch") {
  // Tour through +-4.551 and +-5 is 10 m long, T_fly = 1 s; nu = 0.5.
  const auto run = run::plan(pair_file(10.0, 0.5));
  CHECK(run.report["plan"]["scaled"] == true);
  CHECK(run.report["plan"]["nu"].get<double>() == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(run.report["trajectory"]["path_length_m"].get<double>() == doctest::Approx(5.0).epsilon(1e-9));
  CHECK(run.validation.passed());
}

TEST_CASE("period equal to the fly time leaves no hovering") {
  const auto run = run::plan(pair_file(10.0, 1.0));
  CHECK(run.validation.passed());
  double hover = 0.0;
  for (const auto& p : run.report["plan"]["hover_points"]) hover += p["hover_s"].get<double>();
  CHECK(hover == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(run.report["trajectory"]["max_speed_mps"].get<double>() == doctest::Approx(10.0).epsilon(1e-9));
}

TEST_CASE("nine seeded users at T = 12 s visit 13 hover points") {
  io::ScenarioFile f;
  f.name = "nine";
  f.layout = io::RandomLayout{3, 9, 20.0, 20.0};
  f.params.users = f.layout->generate();
  f.params.period = 12.0;
  const auto run = run::plan(f);
  CHECK(run.report["plan"]["hover_points"].size() == 13);
  CHECK(run.report["plan"]["scaled"] == false);
  CHECK(run.validation.passed());
}

TEST_CASE("outputs are written and reports are reproducible") {
  const auto root = std::filesystem::temp_directory_path() / "wpcn_runner_test";
  std::filesystem::remove_all(root);
  const auto f = pair_file(10.0, 4.0);
  const auto a = run::write_output(run::optimize(f), f, root / "a");
  const auto b = run::write_output(run::optimize(f), f, root / "b");
  CHECK(a == root / "a" / "pair" / "scp");
  for (const char* name : {"report.json", "schedule.json", "trajectory.csv", "trace.csv"}) {
    CAPTURE(name);
    REQUIRE(std::filesystem::exists(a / name));
    CHECK(slurp(a / name) == slurp(b / name));
  }
  CHECK(std::filesystem::exists(a / "timing.json"));
  CHECK(slurp(a / "trace.csv").rfind("iteration,rate,step_norm,improvement\n", 0) == 0);
  CHECK(slurp(a / "trajectory.csv").rfind("t,x,y\n", 0) == 0);
  std::filesystem::remove_all(root);
}

TEST_CASE("sweep rows are ordered and sweep CSV is long format") {
  const auto rows = run::sweep(pair_file(10.0, 10.0), {2.0, 1.0});
  REQUIRE(rows.size() == 8);
  CHECK(rows[0].period == 2.0);
  CHECK(rows[0].method == run::Method::Relaxed);
  CHECK(rows[3].method == run::Method::Static);
  CHECK(rows[4].period == 1.0);
  for (const auto& r : rows) CHECK(r.valid);
  const auto csv = run::sweep_csv(rows);
  CHECK(csv.rfind("method,T,R\nrelaxed,2,", 0) == 0);
  CHECK_THROWS_AS(run::sweep(pair_file(10.0, 10.0), {0.0}), std::invalid_argument);
}
