#include "wpcn/dual.hpp"

#include "nelder_mead.hpp"
#include "wpcn/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <ostream>
#include <stdexcept>

namespace wpcn::dual {

namespace {

// Candidates whose grid value is this far below the grid maximum are not
// refined; refinement rarely moves phi by more than a few percent.
constexpr double kPrefilter = 5e-2;
constexpr std::size_t kMaxCandidates = 64;

bool lex_less(Position2D a, Position2D b) { return a.x < b.x || (a.x == b.x && a.y < b.y); }

// Safeguarded Newton ascent on phi from q. Near-flat maxima (users spaced
// close to where one charging point splits into two) are where the simplex
// search stalls; the analytic curvature pins them down.
Position2D newton_polish(const Scenario& scn, Position2D q, std::span<const double> mu, double value,
                         const std::function<double(Position2D)>& f) {
  const double H2 = scn.altitude() * scn.altitude();
  const double c = scn.eta() * scn.power() * scn.beta0();
  for (int it = 0; it < 30; ++it) {
    double gx = 0.0, gy = 0.0, hxx = 0.0, hxy = 0.0, hyy = 0.0;
    for (std::size_t k = 0; k < mu.size(); ++k) {
      const Position2D d = q - scn.user(k);
      const double den = H2 + d.squared_norm();
      const double a = -2.0 * c * mu[k] / (den * den);
      const double b = 8.0 * c * mu[k] / (den * den * den);
      gx += a * d.x;
      gy += a * d.y;
      hxx += a + b * d.x * d.x;
      hxy += b * d.x * d.y;
      hyy += a + b * d.y * d.y;
    }
    const double det = hxx * hyy - hxy * hxy;
    if (!(hxx < 0.0 && det > 0.0)) break;
    const Position2D step{-(hyy * gx - hxy * gy) / det, -(hxx * gy - hxy * gx) / det};
    const Position2D next = q + step;
    const double nv = f(next);
    if (!(nv >= value)) break;
    q = next;
    value = nv;
    if (step.norm() < 1e-12) break;
  }
  return q;
}

double rate_at_user(const Scenario& scn, std::size_t k, double power) {
  return instantaneous_rate(scn, scn.user(k), k, power);
}

}  // namespace

void DualVariables::validate(std::size_t num_users) const {
  if (lambda.size() != num_users || mu.size() != num_users)
    throw std::invalid_argument("dual variables have the wrong size");
  double sum = 0.0;
  for (double l : lambda) {
    if (!(l >= 0.0)) throw std::invalid_argument("lambda must be nonnegative");
    sum += l;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("lambda must sum to one");
  for (double m : mu)
    if (!(m >= kMuFloor)) throw std::invalid_argument("mu is below the floor");
}

double phi(const Scenario& scn, Position2D q, std::span<const double> mu) {
  if (mu.size() != scn.num_users()) throw std::invalid_argument("mu has the wrong size");
  double s = 0.0;
  for (std::size_t k = 0; k < mu.size(); ++k) s += mu[k] * harvested_power(scn, q, k);
  return s;
}

WptSearch::WptSearch(const Scenario& scn, GridSpec spec) : scn_(&scn), spec_(spec) {
  const auto box = scn.user_box();
  const double span = std::max(box.hi.x - box.lo.x, box.hi.y - box.lo.y);
  step_ = spec.step > 0.0 ? spec.step : std::max(0.1, span / 400.0);
  nx_ = static_cast<int>(std::floor((box.hi.x - box.lo.x) / step_ + 1e-9)) + 1;
  ny_ = static_cast<int>(std::floor((box.hi.y - box.lo.y) / step_ + 1e-9)) + 1;
  const std::size_t K = scn.num_users();
  gains_.resize(static_cast<Eigen::Index>(nx_) * ny_, static_cast<Eigen::Index>(K));
  for (int ix = 0; ix < nx_; ++ix)
    for (int iy = 0; iy < ny_; ++iy) {
      const Position2D q{box.lo.x + ix * step_, box.lo.y + iy * step_};
      for (std::size_t k = 0; k < K; ++k)
        gains_(ix * ny_ + iy, static_cast<Eigen::Index>(k)) = harvested_power(scn, q, k);
    }
}

std::vector<Position2D> WptSearch::maximizers(std::span<const double> mu) const {
  const Scenario& scn = *scn_;
  if (mu.size() != scn.num_users()) throw std::invalid_argument("mu has the wrong size");
  const Eigen::Map<const Eigen::VectorXd> m(mu.data(), static_cast<Eigen::Index>(mu.size()));
  const Eigen::VectorXd v = gains_ * m;
  const double vmax = v.maxCoeff();
  const auto box = scn.user_box();

  struct Candidate {
    Position2D p;
    double value;
  };
  std::vector<Candidate> cand;
  for (int ix = 0; ix < nx_; ++ix)
    for (int iy = 0; iy < ny_; ++iy) {
      const double here = v(ix * ny_ + iy);
      if (here < vmax * (1.0 - kPrefilter)) continue;
      bool local_max = true;
      for (int dx = -1; dx <= 1 && local_max; ++dx)
        for (int dy = -1; dy <= 1; ++dy) {
          const int jx = ix + dx, jy = iy + dy;
          if ((dx == 0 && dy == 0) || jx < 0 || jy < 0 || jx >= nx_ || jy >= ny_) continue;
          if (v(jx * ny_ + jy) > here) {
            local_max = false;
            break;
          }
        }
      if (local_max) cand.push_back({{box.lo.x + ix * step_, box.lo.y + iy * step_}, here});
    }
  std::stable_sort(cand.begin(), cand.end(), [](const Candidate& a, const Candidate& b) { return a.value > b.value; });
  if (cand.size() > kMaxCandidates) cand.resize(kMaxCandidates);

  // Plateau neighbours produce duplicates; refine one representative per
  // merge disc.
  const double merge = 10.0 * step_;
  std::vector<Candidate> seeds;
  for (const auto& c : cand) {
    bool near = false;
    for (const auto& s : seeds) near = near || distance(s.p, c.p) <= merge;
    if (!near) seeds.push_back(c);
  }

  auto f = [&](Position2D q) { return phi(scn, q, mu); };
  std::vector<Candidate> refined;
  for (const auto& s : seeds) {
    const auto r = detail::nelder_mead_max(f, s.p, box.lo, box.hi, step_, spec_.refine_tol);
    Candidate best = r.value >= s.value ? Candidate{r.point, r.value} : s;
    best.p = newton_polish(scn, best.p, mu, best.value, f);
    best.value = f(best.p);
    refined.push_back(best);
  }
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& r : refined) best = std::max(best, r.value);
  std::stable_sort(refined.begin(), refined.end(),
                   [](const Candidate& a, const Candidate& b) { return a.value > b.value; });
  std::vector<Position2D> out;
  for (const auto& r : refined) {
    if (r.value < best - spec_.rel_tol * std::abs(best)) continue;
    bool near = false;
    for (const auto& p : out) near = near || distance(p, r.p) <= merge;
    if (!near) out.push_back(r.p);
  }
  std::sort(out.begin(), out.end(), lex_less);
  return out;
}

std::vector<Position2D> search_wpt_locations(const Scenario& scn, std::span<const double> mu, GridSpec grid) {
  if (grid.step < 0.0) throw std::invalid_argument("grid step must be positive");
  return WptSearch(scn, grid).maximizers(mu);
}

double optimal_uplink_power(const Scenario& scn, double lambda_k, double mu_k) {
  if (!(mu_k >= kMuFloor)) throw std::invalid_argument("mu is below the floor");
  if (!(lambda_k >= 0.0)) throw std::invalid_argument("lambda must be nonnegative");
  const double H = scn.altitude();
  return std::max(lambda_k / (scn.period() * mu_k * std::numbers::ln2) - H * H / scn.gamma(), 0.0);
}

SubproblemSolution solve_subproblem(const Scenario& scn, const DualVariables& duals, const WptSearch& search) {
  const std::size_t K = scn.num_users();
  duals.validate(K);
  SubproblemSolution sol;
  sol.wpt_location = search.maximizers(duals.mu).front();
  sol.phi_star = phi(scn, sol.wpt_location, duals.mu);
  sol.mode = Mode::Wpt;
  sol.position = sol.wpt_location;
  sol.objective = sol.phi_star;
  sol.phi_k.resize(K);
  sol.power_k.resize(K);
  for (std::size_t k = 0; k < K; ++k) {
    const double Q = optimal_uplink_power(scn, duals.lambda[k], duals.mu[k]);
    sol.power_k[k] = Q;
    sol.phi_k[k] = duals.lambda[k] / scn.period() * rate_at_user(scn, k, Q) - duals.mu[k] * Q;
    if (sol.phi_k[k] > sol.objective) {
      sol.objective = sol.phi_k[k];
      sol.mode = Mode::Wit;
      sol.user = k;
      sol.position = scn.user(k);
      sol.power = Q;
    }
  }
  return sol;
}

SubproblemSolution solve_subproblem(const Scenario& scn, const DualVariables& duals) {
  return solve_subproblem(scn, duals, WptSearch(scn));
}

DualEvaluation dual_value_and_subgradient(const Scenario& scn, const DualVariables& duals, const WptSearch& search) {
  const std::size_t K = scn.num_users();
  const double T = scn.period();
  DualEvaluation ev;
  ev.subproblem = solve_subproblem(scn, duals, search);
  const auto& sub = ev.subproblem;
  ev.value = T * sub.objective;
  ev.subgradient.assign(2 * K, 0.0);
  if (sub.mode == Mode::Wpt) {
    for (std::size_t k = 0; k < K; ++k) ev.subgradient[K + k] = T * harvested_power(scn, sub.position, k);
  } else {
    ev.subgradient[sub.user] = rate_at_user(scn, sub.user, sub.power);
    ev.subgradient[K + sub.user] = -T * sub.power;
  }
  return ev;
}

DualEvaluation dual_value_and_subgradient(const Scenario& scn, const DualVariables& duals) {
  return dual_value_and_subgradient(scn, duals, WptSearch(scn));
}

double equalization_spread(const SubproblemSolution& sub) {
  double lo = sub.phi_star, hi = sub.phi_star;
  for (double v : sub.phi_k) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  return hi > 0.0 ? (hi - lo) / hi : 0.0;
}

namespace {

DualVariables to_duals(const Eigen::VectorXd& x, std::size_t K) {
  DualVariables d;
  d.lambda.resize(K);
  d.mu.resize(K);
  double sum = 0.0;
  for (std::size_t j = 0; j + 1 < K; ++j) {
    d.lambda[j] = x(static_cast<Eigen::Index>(j));
    sum += d.lambda[j];
  }
  d.lambda[K - 1] = 1.0 - sum;
  for (std::size_t k = 0; k < K; ++k) d.mu[k] = x(static_cast<Eigen::Index>(K - 1 + k));
  return d;
}

// Most violated feasibility constraint a'x <= b as (a, a'x - b), scored by
// depth relative to the ellipsoid width along a.
bool violated_constraint(const Eigen::VectorXd& x, const Eigen::MatrixXd& A, std::size_t K, Eigen::VectorXd& a,
                         double& excess) {
  const Eigen::Index n = x.size();
  double best_depth = 0.0;
  bool found = false;
  auto consider = [&](const Eigen::VectorXd& row, double ex) {
    if (ex <= 0.0) return;
    const double depth = ex / std::sqrt(std::max(row.dot(A * row), 1e-300));
    if (!found || depth > best_depth) {
      found = true;
      best_depth = depth;
      a = row;
      excess = ex;
    }
  };
  double sum = 0.0;
  for (std::size_t j = 0; j + 1 < K; ++j) {
    Eigen::VectorXd row = Eigen::VectorXd::Zero(n);
    row(static_cast<Eigen::Index>(j)) = -1.0;
    consider(row, -x(static_cast<Eigen::Index>(j)));
    sum += x(static_cast<Eigen::Index>(j));
  }
  if (K > 1) {
    Eigen::VectorXd row = Eigen::VectorXd::Zero(n);
    row.head(static_cast<Eigen::Index>(K - 1)).setOnes();
    consider(row, sum - 1.0);
  }
  for (std::size_t k = 0; k < K; ++k) {
    Eigen::VectorXd row = Eigen::VectorXd::Zero(n);
    const auto i = static_cast<Eigen::Index>(K - 1 + k);
    row(i) = -1.0;
    consider(row, kMuFloor - x(i));
  }
  return found;
}

}  // namespace

DualResult solve_dual(const Scenario& scn, const DualOptions& opts) {
  const std::size_t K = scn.num_users();
  const double T = scn.period();
  const auto n = static_cast<Eigen::Index>(2 * K - 1);
  const int max_iter = opts.max_iterations > 0 ? opts.max_iterations : static_cast<int>(400 * n * n + 1000);
  const WptSearch search(scn, opts.grid);

  // Scale-matched start: equal weights and the price at which the whole
  // period's harvest at the user centroid is worth one unit.
  Position2D centroid{0.0, 0.0};
  for (const auto& w : scn.users()) centroid = centroid + w;
  centroid = (1.0 / static_cast<double>(K)) * centroid;
  double hbar = 0.0;
  for (std::size_t k = 0; k < K; ++k) hbar += channel_gain(scn, centroid, k);
  hbar /= static_cast<double>(K);
  const double mu0 = 1.0 / (T * scn.eta() * scn.power() * hbar);

  Eigen::VectorXd x(n);
  Eigen::VectorXd diag(n);
  for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(K - 1); ++j) {
    x(j) = 1.0 / static_cast<double>(K);
    diag(j) = static_cast<double>(n);
  }
  for (std::size_t k = 0; k < K; ++k) {
    x(static_cast<Eigen::Index>(K - 1 + k)) = mu0;
    diag(static_cast<Eigen::Index>(K - 1 + k)) = static_cast<double>(n) * std::pow(opts.mu_radius * mu0, 2);
  }
  Eigen::MatrixXd A = diag.asDiagonal();

  DualResult res;
  res.value = std::numeric_limits<double>::infinity();
  res.lower_bound = -std::numeric_limits<double>::infinity();
  const double dn = static_cast<double>(n);

  // Shrinks the ellipsoid to the part satisfying a'(y - x) <= -h.
  auto cut = [&](const Eigen::VectorXd& a, double h) {
    const Eigen::VectorXd Aa = A * a;
    const double width = std::sqrt(std::max(a.dot(Aa), 0.0));
    if (!(width > 0.0)) return false;
    const double alpha = h / width;
    if (alpha >= 1.0) return false;
    const Eigen::VectorXd g = Aa / width;
    if (n == 1) {
      // Interval [x - r, x + r]: keep the side the cut allows.
      const double r = std::sqrt(A(0, 0));
      const double lo = a(0) > 0 ? x(0) - r : x(0) + h / std::abs(a(0));
      const double hi = a(0) > 0 ? x(0) - h / a(0) : x(0) + r;
      x(0) = 0.5 * (lo + hi);
      A(0, 0) = std::pow(0.5 * (hi - lo), 2);
      return A(0, 0) > 0.0;
    }
    x -= (1.0 + dn * alpha) / (dn + 1.0) * g;
    A = (dn * dn * (1.0 - alpha * alpha) / (dn * dn - 1.0)) *
        (A - (2.0 * (1.0 + dn * alpha) / ((dn + 1.0) * (1.0 + alpha))) * (g * g.transpose()));
    A = 0.5 * (A + A.transpose()).eval();
    return Eigen::LLT<Eigen::MatrixXd>(A).info() == Eigen::Success;
  };

  for (int it = 0; it < max_iter; ++it) {
    res.iterations = it + 1;
    DualTraceRow row;
    row.iteration = it;
    Eigen::VectorXd a;
    double excess = 0.0;
    bool ok;
    if (violated_constraint(x, A, K, a, excess)) {
      row.feasibility_cut = true;
      row.value = std::numeric_limits<double>::quiet_NaN();
      row.residual = std::numeric_limits<double>::quiet_NaN();
      ok = cut(a, excess);
    } else {
      const DualVariables d = to_duals(x, K);
      const DualEvaluation ev = dual_value_and_subgradient(scn, d, search);
      row.value = ev.value;
      row.residual = equalization_spread(ev.subproblem);
      if (ev.value < res.value) {
        res.value = ev.value;
        res.duals = d;
      }
      Eigen::VectorXd s(n);
      for (std::size_t j = 0; j + 1 < K; ++j)
        s(static_cast<Eigen::Index>(j)) = ev.subgradient[j] - ev.subgradient[K - 1];
      for (std::size_t k = 0; k < K; ++k) s(static_cast<Eigen::Index>(K - 1 + k)) = ev.subgradient[K + k];
      const double width = std::sqrt(std::max(s.dot(A * s), 0.0));
      res.lower_bound = std::max(res.lower_bound, ev.value - width);
      if (width == 0.0 || res.value - res.lower_bound <= opts.tolerance * std::abs(res.value)) {
        res.converged = true;
        row.best = res.value;
        row.lower_bound = res.lower_bound;
        res.trace.push_back(row);
        break;
      }
      ok = cut(s, ev.value - res.value);
    }
    row.best = res.value;
    row.lower_bound = res.lower_bound;
    res.trace.push_back(row);
    if (!ok) {
      // The ellipsoid collapsed numerically; the best point is as good as
      // this arithmetic can certify.
      res.converged = res.value - res.lower_bound <= std::sqrt(opts.tolerance) * std::abs(res.value);
      break;
    }
  }
  if (res.duals.lambda.empty()) throw std::runtime_error("ellipsoid method never reached a feasible point");
  return res;
}

double HoveringSolution::total_time() const {
  double s = 0.0;
  for (double t : wpt_durations) s += t;
  for (double t : wit_durations) s += t;
  return s;
}

std::size_t HoveringSolution::num_hover_points() const {
  std::size_t n = wit_durations.size();
  for (double t : wpt_durations) n += t > 0.0 ? 1 : 0;
  return n;
}

HoveringSolution time_sharing_lp(const Scenario& scn, std::span<const Position2D> wpt_locations,
                                 std::span<const double> powers) {
  const std::size_t K = scn.num_users();
  const std::size_t W = wpt_locations.size();
  const double T = scn.period();
  if (W == 0) throw std::invalid_argument("time sharing needs at least one charging location");
  if (powers.size() != K) throw std::invalid_argument("one uplink power per user is required");
  for (double q : powers)
    if (!(q >= 0.0) || !std::isfinite(q)) throw std::invalid_argument("uplink powers must be nonnegative");

  HoveringSolution sol;
  sol.wpt_locations.assign(wpt_locations.begin(), wpt_locations.end());
  sol.wit_power.assign(powers.begin(), powers.end());
  sol.wpt_durations.assign(W, 0.0);
  sol.wit_durations.assign(K, 0.0);

  std::vector<double> rate(K);
  for (std::size_t k = 0; k < K; ++k) rate[k] = rate_at_user(scn, k, powers[k]);
  std::vector<std::vector<double>> harvest(K, std::vector<double>(W));
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t w = 0; w < W; ++w) harvest[k][w] = harvested_power(scn, wpt_locations[w], k);

  if (std::any_of(rate.begin(), rate.end(), [](double r) { return r <= 0.0; })) {
    sol.degenerate = true;
    sol.wpt_durations[0] = T;
    sol.user_rate.assign(K, 0.0);
    return sol;
  }

  // Variables [tau_w | s_k | R], all constraints in A x <= b form.
  const auto nv = static_cast<Eigen::Index>(W + K + 1);
  const auto rows = static_cast<Eigen::Index>(2 * K + 1);
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(rows, nv);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(rows);
  Eigen::VectorXd c = Eigen::VectorXd::Zero(nv);
  const auto ri = static_cast<Eigen::Index>(W + K);
  c(ri) = 1.0;
  for (std::size_t k = 0; k < K; ++k) {
    const auto sk = static_cast<Eigen::Index>(W + k);
    const auto r1 = static_cast<Eigen::Index>(k);
    const auto r2 = static_cast<Eigen::Index>(K + k);
    A(r1, ri) = 1.0;
    A(r1, sk) = -rate[k] / T;
    A(r2, sk) = powers[k];
    for (std::size_t w = 0; w < W; ++w) A(r2, static_cast<Eigen::Index>(w)) = -harvest[k][w];
  }
  A.row(rows - 1).head(static_cast<Eigen::Index>(W + K)).setOnes();
  b(rows - 1) = T;

  const lp::Result r = lp::maximize(A, b, c);
  if (r.status != lp::Status::Optimal) throw std::runtime_error("time-sharing LP did not reach an optimum");
  for (std::size_t w = 0; w < W; ++w) sol.wpt_durations[w] = r.x(static_cast<Eigen::Index>(w));
  for (std::size_t k = 0; k < K; ++k) sol.wit_durations[k] = r.x(static_cast<Eigen::Index>(W + k));

  // Unused time charges at the busiest charging location.
  auto longest = std::max_element(sol.wpt_durations.begin(), sol.wpt_durations.end());
  *longest += std::max(0.0, T - sol.total_time());
  // Rounding in the tableau can leave a user a hair over its harvest.
  for (std::size_t k = 0; k < K; ++k) {
    double e = 0.0;
    for (std::size_t w = 0; w < W; ++w) e += harvest[k][w] * sol.wpt_durations[w];
    if (sol.wit_durations[k] * powers[k] > e) {
      const double trimmed = e / powers[k];
      *longest += sol.wit_durations[k] - trimmed;
      sol.wit_durations[k] = trimmed;
    }
  }
  sol.user_rate.resize(K);
  for (std::size_t k = 0; k < K; ++k) sol.user_rate[k] = sol.wit_durations[k] * rate[k] / T;
  sol.common_rate = *std::min_element(sol.user_rate.begin(), sol.user_rate.end());
  return sol;
}

RelaxedResult solve_relaxed(const Scenario& scn, const RelaxedOptions& opts) {
  const std::size_t K = scn.num_users();
  RelaxedResult out;
  auto& diag = out.diagnostics;
  diag.dual = solve_dual(scn, opts.dual);
  const DualVariables& d = diag.dual.duals;

  GridSpec recovery = opts.dual.grid;
  recovery.rel_tol = std::max(recovery.rel_tol, opts.recovery_tol);
  const auto candidates = search_wpt_locations(scn, d.mu, recovery);
  diag.candidate_locations = candidates.size();

  std::vector<double> powers(K);
  for (std::size_t k = 0; k < K; ++k) powers[k] = optimal_uplink_power(scn, d.lambda[k], d.mu[k]);
  HoveringSolution full = time_sharing_lp(scn, candidates, powers);

  // Drop charging candidates the LP left unused.
  HoveringSolution& sol = out.solution;
  sol = full;
  sol.wpt_locations.clear();
  sol.wpt_durations.clear();
  for (std::size_t w = 0; w < candidates.size(); ++w) {
    if (full.wpt_durations[w] > 0.0) {
      sol.wpt_locations.push_back(candidates[w]);
      sol.wpt_durations.push_back(full.wpt_durations[w]);
    }
  }

  std::vector<double> phik(K);
  for (std::size_t k = 0; k < K; ++k)
    phik[k] = d.lambda[k] / scn.period() * rate_at_user(scn, k, powers[k]) - d.mu[k] * powers[k];
  const double ref = phi(scn, sol.wpt_locations.front(), d.mu);
  double lo = ref, hi = ref;
  for (const auto& q : sol.wpt_locations) {
    const double p = phi(scn, q, d.mu);
    lo = std::min(lo, p);
    hi = std::max(hi, p);
    for (double v : phik) diag.equalization_residual = std::max(diag.equalization_residual, std::abs(p - v) / std::abs(ref));
  }
  for (double v : phik) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  diag.equalization_spread = hi > 0.0 ? (hi - lo) / hi : 0.0;
  return out;
}

void write_trace_csv(std::ostream& os, const std::vector<DualTraceRow>& trace) {
  os << "iteration,g,best,lower_bound,equalization_residual,feasibility_cut\n";
  os.precision(17);
  for (const auto& r : trace)
    os << r.iteration << ',' << r.value << ',' << r.best << ',' << r.lower_bound << ',' << r.residual << ','
       << (r.feasibility_cut ? 1 : 0) << '\n';
}

}  // namespace wpcn::dual
