#include "wpcn/runner.hpp"

#include "wpcn/dual.hpp"
#include "wpcn/planner.hpp"
#include "wpcn/scp.hpp"

#include <atomic>
#include <chrono>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

namespace wpcn::run {

using nlohmann::ordered_json;

const char* method_tag(Method m) {
  switch (m) {
    case Method::Relaxed: return "relaxed";
    case Method::HoverFly: return "hover-fly";
    case Method::Scp: return "scp";
    case Method::Static: return "static";
  }
  return "?";
}

io::SolverSettings effective_settings(const io::ScenarioFile& file, Method m, const Overrides& ov) {
  io::SolverSettings s = file.solver;
  if (ov.seed) s.seed = *ov.seed;
  if (ov.slots) s.slots = *ov.slots;
  if (ov.grid) s.wpt_grid_m = s.static_grid_m = *ov.grid;
  if (ov.tol) {
    if (m == Method::Scp) s.scp_tol = *ov.tol;
    else if (m != Method::Static) s.dual_tol = *ov.tol;
  }
  return s;
}

namespace {

using Clock = std::chrono::steady_clock;

ordered_json point_json(Position2D q) { return ordered_json::array({q.x, q.y}); }

ordered_json scenario_json(const io::ScenarioFile& file, const Scenario& scn) {
  ordered_json j;
  j["name"] = file.name;
  j["digest"] = io::scenario_digest(scn);
  if (file.layout) {
    j["layout"] = {{"seed", file.layout->seed},
                   {"count", file.layout->count},
                   {"width_m", file.layout->width},
                   {"height_m", file.layout->height}};
  }
  ordered_json users = ordered_json::array();
  for (const auto& u : scn.users()) users.push_back(point_json(u));
  j["users"] = std::move(users);
  j["altitude_m"] = scn.altitude();
  j["beta0"] = scn.beta0();
  j["sigma2_w"] = scn.sigma2();
  j["eta"] = scn.eta();
  j["power_w"] = scn.power();
  j["vmax_mps"] = scn.vmax();
  j["period_s"] = scn.period();
  return j;
}

ordered_json settings_json(const io::SolverSettings& s) {
  return {{"seed", s.seed},
          {"dual_tol", s.dual_tol},
          {"dual_max_iters", s.dual_max_iters},
          {"recovery_tol", s.recovery_tol},
          {"wpt_grid_m", s.wpt_grid_m},
          {"static_grid_m", s.static_grid_m},
          {"slots", s.slots},
          {"scp_tol", s.scp_tol},
          {"scp_max_iters", s.scp_max_iters}};
}

ordered_json users_json(const std::vector<double>& rate, const std::vector<double>& harvested,
                        const std::vector<double>& consumed) {
  ordered_json arr = ordered_json::array();
  for (std::size_t k = 0; k < rate.size(); ++k)
    arr.push_back({{"user", k}, {"rate", rate[k]}, {"harvested_j", harvested[k]}, {"consumed_j", consumed[k]}});
  return arr;
}

ordered_json validation_json(const Validation& v) {
  ordered_json j{{"passed", v.passed()},
                 {"tiling", v.tiling},
                 {"speed", v.speed},
                 {"neutral", v.neutral},
                 {"max_neutrality_violation", v.max_neutrality_violation}};
  if (!v.message.empty()) j["message"] = v.message;
  return j;
}

ordered_json schedule_json(const Schedule& s, double period) {
  ordered_json slots = ordered_json::array();
  for (const auto& slot : s.slots)
    slots.push_back({{"start", slot.start},
                     {"duration", slot.duration},
                     {"position", point_json(slot.position)},
                     {"wpt_time", slot.wpt_time},
                     {"wit_time", slot.wit_time},
                     {"uplink_power_w", slot.uplink_power}});
  return {{"kind", "tdma"}, {"period_s", period}, {"slots", std::move(slots)}};
}

double relative_violation(double consumed, double harvested) {
  if (consumed <= harvested) return 0.0;
  return harvested > 0.0 ? (consumed - harvested) / harvested : std::numeric_limits<double>::infinity();
}

// Tiling, speed and neutrality of a trajectory-plus-schedule pair, with the
// throughput evaluated independently of the solver.
Validation validate(const Scenario& scn, const Trajectory& traj, const Schedule& sched, ThroughputReport& rep) {
  Validation v;
  try {
    sched.validate(scn.num_users(), scn.period());
  } catch (const StructuralError& e) {
    v.tiling = false;
    v.message = e.what();
  }
  try {
    traj.validate(scn);
  } catch (const StructuralError& e) {
    v.speed = false;
    v.message = e.what();
  }
  if (!v.tiling || !v.speed) {
    v.neutral = false;
    return v;
  }
  try {
    rep = evaluate_schedule(scn, traj, sched);
  } catch (const StructuralError& e) {
    v.tiling = false;
    v.neutral = false;
    v.message = e.what();
    return v;
  }
  for (std::size_t k = 0; k < scn.num_users(); ++k)
    v.max_neutrality_violation =
        std::max(v.max_neutrality_violation, relative_violation(rep.consumed_energy[k], rep.harvested_energy[k]));
  v.neutral = v.max_neutrality_violation <= kTolerances.physical;
  return v;
}

// Trajectory-based methods share the report layout.
void finish_trajectory_run(RunOutput& out, const io::ScenarioFile& file, const Scenario& scn,
                           const io::SolverSettings& settings, const Trajectory& traj, const Schedule& sched) {
  ThroughputReport rep;
  out.validation = validate(scn, traj, sched, rep);
  if (out.validation.passed()) out.common_rate = rep.common_rate;

  ordered_json& r = out.report;
  r["method"] = method_tag(out.method);
  r["scenario"] = scenario_json(file, scn);
  r["settings"] = settings_json(settings);
  r["converged"] = out.converged;
  r["common_rate"] = out.common_rate;
  r["users"] = users_json(rep.rate, rep.harvested_energy, rep.consumed_energy);
  r["trajectory"] = {{"waypoints", traj.waypoints().size()},
                     {"path_length_m", traj.path_length()},
                     {"max_speed_mps", traj.max_speed()}};
  r["schedule"] = {{"slots", sched.slots.size()}};
  r["validation"] = validation_json(out.validation);

  out.schedule = schedule_json(sched, scn.period());
  std::ostringstream os;
  planner::write_trajectory_csv(os, traj);
  out.csv.emplace_back("trajectory.csv", os.str());
}

dual::RelaxedOptions relaxed_options(const io::SolverSettings& s) {
  dual::RelaxedOptions o;
  o.dual.tolerance = s.dual_tol;
  o.dual.max_iterations = s.dual_max_iters;
  o.dual.grid.step = s.wpt_grid_m;
  o.recovery_tol = s.recovery_tol;
  return o;
}

planner::HoverFlyOptions hover_fly_options(const io::SolverSettings& s, unsigned threads) {
  planner::HoverFlyOptions o;
  o.slots = s.slots;
  o.seed = s.seed;
  o.static_grid = s.static_grid_m;
  o.threads = threads;
  return o;
}

ordered_json relaxed_diagnostics(const dual::RelaxedResult& rel) {
  const auto& d = rel.diagnostics;
  return {{"dual_converged", d.dual.converged},
          {"dual_iterations", d.dual.iterations},
          {"dual_value", d.dual.value},
          {"dual_lower_bound", d.dual.lower_bound},
          {"equalization_spread", d.equalization_spread},
          {"equalization_residual", d.equalization_residual},
          {"candidate_locations", d.candidate_locations},
          {"degenerate", rel.solution.degenerate}};
}

ordered_json plan_json(const planner::HoverFlyPlan& p) {
  ordered_json pts = ordered_json::array();
  for (std::size_t i = 0; i < p.points.size(); ++i) {
    const auto& hp = p.points.points[i];
    pts.push_back({{"role", hp.role == planner::PointRole::Charging ? "charging" : "user"},
                   {"index", hp.index},
                   {"position", point_json(hp.position)},
                   {"hover_s", p.hover_durations.empty() ? 0.0 : p.hover_durations[i]}});
  }
  return {{"hover_points", std::move(pts)},
          {"tour", p.tour.order},
          {"tour_exact", p.tour.exact},
          {"fly_distance_m", p.tour.distance},
          {"fly_time_s", p.tour.fly_time},
          {"scaled", p.scaled},
          {"nu", p.nu},
          {"q_fix", point_json(p.q_fix)},
          {"allocation_converged", p.allocation.converged},
          {"allocation_gap", p.allocation.gap},
          {"refinement_slots", p.slots.size()}};
}

unsigned pool_size(const Overrides& ov) {
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  return ov.threads > 0 ? ov.threads : hw;
}

template <typename F>
RunOutput timed(F&& f) {
  const auto t0 = Clock::now();
  RunOutput out = f();
  out.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  return out;
}

}  // namespace

RunOutput solve_relaxed(const io::ScenarioFile& file, const Overrides& ov) {
  return timed([&] {
    RunOutput out;
    out.method = Method::Relaxed;
    out.directory = "relaxed";
    const Scenario scn = file.scenario();
    const auto settings = effective_settings(file, out.method, ov);
    const auto rel = dual::solve_relaxed(scn, relaxed_options(settings));
    const auto& sol = rel.solution;
    const std::size_t K = scn.num_users();
    out.converged = rel.diagnostics.dual.converged;

    // Hovering has no flight legs: the checks are total time and energy.
    std::vector<double> harvested(K, 0.0), consumed(K, 0.0);
    for (std::size_t k = 0; k < K; ++k) {
      for (std::size_t w = 0; w < sol.wpt_locations.size(); ++w)
        harvested[k] += sol.wpt_durations[w] * harvested_power(scn, sol.wpt_locations[w], k);
      consumed[k] = sol.wit_durations[k] * sol.wit_power[k];
      out.validation.max_neutrality_violation =
          std::max(out.validation.max_neutrality_violation, relative_violation(consumed[k], harvested[k]));
    }
    out.validation.neutral = out.validation.max_neutrality_violation <= kTolerances.physical;
    out.validation.tiling = std::abs(sol.total_time() - scn.period()) <= kTolerances.structural * scn.period();
    if (!out.validation.tiling) out.validation.message = "hovering durations do not sum to T";
    out.common_rate = sol.common_rate;

    ordered_json points = ordered_json::array();
    std::ostringstream csv;
    csv.precision(17);
    csv << "role,index,x,y,duration_s,power_w\n";
    for (std::size_t w = 0; w < sol.wpt_locations.size(); ++w) {
      const auto q = sol.wpt_locations[w];
      points.push_back({{"role", "charging"}, {"index", w}, {"position", point_json(q)}, {"duration_s", sol.wpt_durations[w]}});
      csv << "charging," << w << ',' << q.x << ',' << q.y << ',' << sol.wpt_durations[w] << ",0\n";
    }
    for (std::size_t k = 0; k < K; ++k) {
      const auto q = scn.user(k);
      points.push_back({{"role", "user"},
                        {"index", k},
                        {"position", point_json(q)},
                        {"duration_s", sol.wit_durations[k]},
                        {"power_w", sol.wit_power[k]}});
      csv << "user," << k << ',' << q.x << ',' << q.y << ',' << sol.wit_durations[k] << ',' << sol.wit_power[k] << '\n';
    }
    out.csv.emplace_back("hover_locations.csv", csv.str());
    std::ostringstream trace;
    dual::write_trace_csv(trace, rel.diagnostics.dual.trace);
    out.csv.emplace_back("trace.csv", trace.str());

    auto& r = out.report;
    r["method"] = method_tag(out.method);
    r["scenario"] = scenario_json(file, scn);
    r["settings"] = settings_json(settings);
    r["converged"] = out.converged;
    r["common_rate"] = out.common_rate;
    r["users"] = users_json(sol.user_rate, harvested, consumed);
    r["hovering_locations"] = points;
    r["num_wpt_locations"] = sol.wpt_locations.size();
    r["num_hover_points"] = sol.num_hover_points();
    r["diagnostics"] = relaxed_diagnostics(rel);
    r["validation"] = validation_json(out.validation);
    out.schedule = {{"kind", "hovering"}, {"period_s", scn.period()}, {"points", std::move(points)}};
    return out;
  });
}

RunOutput plan(const io::ScenarioFile& file, const Overrides& ov) {
  return timed([&] {
    RunOutput out;
    out.method = Method::HoverFly;
    out.directory = "hover-fly";
    const Scenario scn = file.scenario();
    const auto settings = effective_settings(file, out.method, ov);
    const auto rel = dual::solve_relaxed(scn, relaxed_options(settings));
    const auto p = planner::plan_hover_and_fly(scn, rel.solution, hover_fly_options(settings, ov.threads));
    out.converged = rel.diagnostics.dual.converged && p.allocation.converged;
    finish_trajectory_run(out, file, scn, settings, p.trajectory, p.schedule);
    out.report["plan"] = plan_json(p);
    out.report["diagnostics"] = relaxed_diagnostics(rel);
    return out;
  });
}

RunOutput optimize(const io::ScenarioFile& file, const Overrides& ov) {
  return timed([&] {
    RunOutput out;
    out.method = Method::Scp;
    out.directory = "scp";
    const Scenario scn = file.scenario();
    const auto settings = effective_settings(file, out.method, ov);
    const auto rel = dual::solve_relaxed(scn, relaxed_options(settings));
    const auto p = planner::plan_hover_and_fly(scn, rel.solution, hover_fly_options(settings, ov.threads));
    scp::ScpOptions so;
    so.tol = settings.scp_tol;
    so.max_iters = settings.scp_max_iters;
    const auto res =
        scp::alternating_optimize(scn, scp::InitialPoint{p.slots, p.trajectory, p.schedule, p.allocation, p.common_rate}, so);
    out.converged = rel.diagnostics.dual.converged && p.allocation.converged && res.converged;
    finish_trajectory_run(out, file, scn, settings, res.path, res.schedule);
    out.report["initial_rate"] = res.initial_rate;
    out.report["diagnostics"] = {{"scp_converged", res.converged},
                                 {"scp_iterations", res.iterations},
                                 {"slots", res.trajectory.size()},
                                 {"hover_fly_rate", p.common_rate},
                                 {"relaxed", relaxed_diagnostics(rel)}};
    std::ostringstream trace;
    scp::write_trace_csv(trace, res.trace);
    out.csv.emplace_back("trace.csv", trace.str());
    return out;
  });
}

RunOutput baseline(const io::ScenarioFile& file, const Overrides& ov) {
  return timed([&] {
    RunOutput out;
    out.method = Method::Static;
    out.directory = "static";
    const Scenario scn = file.scenario();
    const auto settings = effective_settings(file, out.method, ov);
    const auto st = planner::static_hover_search(scn, settings.static_grid_m, ov.threads);
    out.converged = st.solution.allocation.converged;
    finish_trajectory_run(out, file, scn, settings, Trajectory::hover(st.position, scn.period()),
                          planner::static_schedule(scn, st));
    out.report["hover_position"] = point_json(st.position);
    out.report["diagnostics"] = {{"evaluations", st.evaluations}, {"allocation_gap", st.solution.allocation.gap}};
    return out;
  });
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << text;
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

std::filesystem::path method_dir(const std::filesystem::path& root, const io::ScenarioFile& file,
                                 const std::string& name) {
  auto dir = root / file.name / name;
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

std::filesystem::path write_output(const RunOutput& run, const io::ScenarioFile& file,
                                   const std::filesystem::path& out_root) {
  const auto dir = method_dir(out_root, file, run.directory);
  write_file(dir / "report.json", run.report.dump(2) + "\n");
  write_file(dir / "schedule.json", run.schedule.dump(2) + "\n");
  for (const auto& [name, text] : run.csv) write_file(dir / name, text);
  write_file(dir / "timing.json", ordered_json{{"seconds", run.seconds}}.dump(2) + "\n");
  return dir;
}

std::vector<SweepRow> sweep(const io::ScenarioFile& file, const std::vector<double>& periods, const Overrides& ov) {
  for (double T : periods)
    if (!(T > 0.0) || !std::isfinite(T)) throw std::invalid_argument("sweep periods must be positive");
  std::vector<std::array<SweepRow, 4>> rows(periods.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  // One worker per period; the solves inside a point stay sequential.
  Overrides inner = ov;
  inner.threads = 1;
  const auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= periods.size()) return;
      try {
        io::ScenarioFile f = file;
        f.params.period = periods[i];
        const RunOutput runs[4] = {solve_relaxed(f, inner), plan(f, inner), optimize(f, inner), baseline(f, inner)};
        for (int m = 0; m < 4; ++m)
          rows[i][m] = {runs[m].method, periods[i], runs[m].common_rate, runs[m].converged, runs[m].validation.passed()};
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = periods.size();
      }
    }
  };
  const unsigned n = std::min<unsigned>(pool_size(ov), static_cast<unsigned>(periods.size()));
  {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < n; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  std::vector<SweepRow> out;
  for (const auto& r : rows) out.insert(out.end(), r.begin(), r.end());
  return out;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  os.precision(17);
  os << "method,T,R\n";
  for (const auto& r : rows) os << method_tag(r.method) << ',' << r.period << ',' << r.common_rate << '\n';
  return os.str();
}

std::filesystem::path write_sweep(const std::vector<SweepRow>& rows, const io::ScenarioFile& file,
                                  const Overrides& ov, const std::filesystem::path& out_root) {
  const auto dir = method_dir(out_root, file, "sweep");
  write_file(dir / "sweep.csv", sweep_csv(rows));
  ordered_json table = ordered_json::array();
  for (const auto& r : rows)
    table.push_back({{"method", method_tag(r.method)},
                     {"T", r.period},
                     {"R", r.common_rate},
                     {"converged", r.converged},
                     {"valid", r.valid}});
  ordered_json rep{{"method", "sweep"},
                   {"scenario", scenario_json(file, file.scenario())},
                   {"settings", settings_json(effective_settings(file, Method::Scp, ov))},
                   {"rows", std::move(table)}};
  write_file(dir / "report.json", rep.dump(2) + "\n");
  return dir;
}

}  // namespace wpcn::run
