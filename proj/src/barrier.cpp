#include "wpcn/barrier.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace wpcn::barrier {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Phase one: minimize s subject to f_j(x)/scale_j + s >= 0. A wide trust
// ball around the start keeps the barrier bounded when a free variable only
// loosens constraints as it runs off (e.g. an epigraph variable).
class PhaseOne final : public ConcaveProgram {
 public:
  static constexpr double kBall = 1e4;

  PhaseOne(const ConcaveProgram& base, const Eigen::VectorXd& x0)
      : base_(base), n_(base.num_variables()), x0_(x0) {
    scale_.resize(base.num_constraints());
    for (int j = 0; j < base.num_constraints(); ++j) {
      const double s = base.constraint_scale(j);
      scale_[j] = (std::isfinite(s) && s > 0.0) ? s : 1.0;
    }
  }

  int num_variables() const override { return n_ + 1; }
  int num_constraints() const override { return base_.num_constraints() + 1; }
  Eigen::VectorXd objective() const override {
    Eigen::VectorXd c = Eigen::VectorXd::Zero(n_ + 1);
    c(n_) = -1.0;
    return c;
  }
  Eigen::VectorXd lower_bounds() const override {
    Eigen::VectorXd lb(n_ + 1);
    lb.head(n_) = base_.lower_bounds();
    lb(n_) = -kInf;
    return lb;
  }
  Eigen::SparseMatrix<double> equality_matrix() const override {
    Eigen::SparseMatrix<double> A = base_.equality_matrix();
    A.conservativeResize(A.rows(), n_ + 1);
    return A;
  }
  Eigen::VectorXd equality_rhs() const override { return base_.equality_rhs(); }
  bool evaluate(const Eigen::VectorXd& x, bool derivatives,
                std::vector<ConstraintValue>& out) const override {
    if (!base_.evaluate(x.head(n_), derivatives, out)) return false;
    const double s = x(n_);
    for (std::size_t j = 0; j < scale_.size(); ++j) {
      auto& c = out[j];
      const double inv = 1.0 / scale_[j];
      c.value = c.value * inv + s;
      if (derivatives) {
        for (double& g : c.grad_value) g *= inv;
        c.add_gradient(n_, 1.0);
        for (auto& t : c.hessian) t = Eigen::Triplet<double>(t.row(), t.col(), t.value() * inv);
      }
    }
    ConstraintValue ball;
    ball.value = kBall * kBall;
    for (int i = 0; i < n_; ++i) {
      const double w = 1.0 + std::abs(x0_(i));
      const double d = (x(i) - x0_(i)) / w;
      ball.value -= d * d;
      if (derivatives) {
        ball.add_gradient(i, -2.0 * d / w);
        ball.hessian.emplace_back(i, i, -2.0 / (w * w));
      }
    }
    out.push_back(std::move(ball));
    return true;
  }


  double initial_slack(const std::vector<ConstraintValue>& vals) const {
    double worst = 0.0;
    for (std::size_t j = 0; j < vals.size(); ++j)
      worst = std::max(worst, -vals[j].value / scale_[j]);
    return worst + 1.0;
  }

 private:
  const ConcaveProgram& base_;
  int n_;
  Eigen::VectorXd x0_;
  std::vector<double> scale_;
};

class Engine {
 public:
  Engine(const ConcaveProgram& prog, const Options& opts)
      : prog_(prog),
        opts_(opts),
        n_(prog.num_variables()),
        c_(prog.objective()),
        lb_(prog.lower_bounds()),
        A_(prog.equality_matrix()),
        b_(prog.equality_rhs()) {
    if (c_.size() != n_ || lb_.size() != n_ || A_.cols() != n_ || A_.rows() != b_.size())
      throw std::invalid_argument("barrier program dimensions are inconsistent");
    for (int i = 0; i < n_; ++i)
      if (std::isfinite(lb_(i))) bounded_.push_back(i);
  }

  int num_inequalities() const { return prog_.num_constraints() + static_cast<int>(bounded_.size()); }

  bool strictly_inside_bounds(const Eigen::VectorXd& x) const {
    for (int i : bounded_)
      if (!(x(i) > lb_(i))) return false;
    return true;
  }

  bool strictly_feasible(const Eigen::VectorXd& x) {
    if (!strictly_inside_bounds(x)) return false;
    if (!prog_.evaluate(x, false, vals_)) return false;
    for (const auto& v : vals_)
      if (!(v.value > 0.0)) return false;
    return true;
  }

  // Barrier merit t*(-c'x) - sum log f_j - sum log(x_i - lb_i); +inf outside.
  double merit(const Eigen::VectorXd& x, double t) {
    if (!strictly_inside_bounds(x)) return kInf;
    if (!prog_.evaluate(x, false, vals_)) return kInf;
    double F = -t * c_.dot(x);
    for (const auto& v : vals_) {
      if (!(v.value > 0.0)) return kInf;
      F -= std::log(v.value);
    }
    for (int i : bounded_) F -= std::log(x(i) - lb_(i));
    return F;
  }

  // One centering run at weight t. Returns the final Newton decrement
  // squared/2, or a negative value when the line search stalled.
  template <typename Stop>
  double center(Eigen::VectorXd& x, double t, int& steps, Stop&& stop) {
    double dec = kInf;
    for (int it = 0; it < opts_.max_newton_per_center && steps < opts_.max_total_newton; ++it) {
      if (!prog_.evaluate(x, true, vals_)) throw std::runtime_error("barrier iterate left the domain");
      Eigen::VectorXd grad = -t * c_;
      std::vector<Eigen::Triplet<double>> trip;
      std::vector<int> dense;
      for (int j = 0; j < static_cast<int>(vals_.size()); ++j) {
        const auto& v = vals_[j];
        const double inv = 1.0 / v.value;
        for (std::size_t a = 0; a < v.grad_index.size(); ++a) grad(v.grad_index[a]) -= v.grad_value[a] * inv;
        for (const auto& h : v.hessian) trip.emplace_back(h.row(), h.col(), -h.value() * inv);
        if (static_cast<int>(v.grad_index.size()) > opts_.dense_threshold) {
          dense.push_back(j);
        } else {
          const double inv2 = inv * inv;
          for (std::size_t a = 0; a < v.grad_index.size(); ++a)
            for (std::size_t b = 0; b < v.grad_index.size(); ++b)
              trip.emplace_back(v.grad_index[a], v.grad_index[b], v.grad_value[a] * v.grad_value[b] * inv2);
        }
      }
      for (int i : bounded_) {
        const double s = 1.0 / (x(i) - lb_(i));
        grad(i) -= s;
        trip.emplace_back(i, i, s * s);
      }

      const int d = static_cast<int>(dense.size());
      const int p = static_cast<int>(A_.rows());
      const int N = n_ + d + p;
      for (int a = 0; a < d; ++a) {
        const auto& v = vals_[dense[a]];
        const double inv = 1.0 / v.value;
        for (std::size_t e = 0; e < v.grad_index.size(); ++e) {
          trip.emplace_back(v.grad_index[e], n_ + a, v.grad_value[e] * inv);
          trip.emplace_back(n_ + a, v.grad_index[e], v.grad_value[e] * inv);
        }
        trip.emplace_back(n_ + a, n_ + a, -1.0);
      }
      for (int k = 0; k < A_.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it2(A_, k); it2; ++it2) {
          trip.emplace_back(n_ + d + it2.row(), it2.col(), it2.value());
          trip.emplace_back(it2.col(), n_ + d + it2.row(), it2.value());
        }

      Eigen::VectorXd rhs = Eigen::VectorXd::Zero(N);
      rhs.head(n_) = -grad;
      if (p > 0) rhs.tail(p) = b_ - A_ * x;

      // Directions without curvature (free variables that only enter
      // linearly) make the system singular; a small proximal term fixes it.
      Eigen::VectorXd sol;
      bool solved = solve(trip, N, rhs, sol);
      double hmax = 0.0;
      if (!solved)
        for (const auto& tr : trip)
          if (tr.row() == tr.col() && tr.row() < n_) hmax = std::max(hmax, std::abs(tr.value()));
      for (double reg = 1e-12; !solved && reg <= 1e-4; reg *= 100.0) {
        auto padded = trip;
        for (int i = 0; i < n_; ++i) padded.emplace_back(i, i, reg * std::max(hmax, 1.0));
        solved = solve(padded, N, rhs, sol);
      }
      if (!solved) throw std::runtime_error("barrier Newton system is singular");
      Eigen::VectorXd dx = sol.head(n_);

      dec = std::abs(grad.dot(dx)) * 0.5;
      ++steps;
      // Below this the merit change is lost in round-off.
      const double floor = 1e-13 * (1.0 + t * std::abs(c_.dot(x)));
      if (dec <= std::max(opts_.newton_tolerance, floor)) return dec;

      // Step to the boundary of the bound constraints, then backtrack.
      double alpha = 1.0;
      for (int i : bounded_)
        if (dx(i) < 0.0) alpha = std::min(alpha, -0.99 * (x(i) - lb_(i)) / dx(i));
      const double F0 = merit(x, t);
      const double slope = grad.dot(dx);
      bool moved = false;
      for (int ls = 0; ls < 80; ++ls) {
        Eigen::VectorXd trial = x + alpha * dx;
        const double F1 = merit(trial, t);
        if (F1 <= F0 + 0.01 * alpha * slope) {
          x = std::move(trial);
          moved = true;
          break;
        }
        alpha *= 0.5;
      }
      if (!moved) return -1.0;
      if (stop(x)) return dec;
    }
    return dec;
  }

  template <typename Stop, typename OuterStop>
  Result run(Eigen::VectorXd x, Stop&& stop, OuterStop&& outer_stop) {
    Result res;
    double t = opts_.t0;
    const double m = std::max(1, num_inequalities());
    int steps = 0;
    for (;;) {
      const double dec = center(x, t, steps, stop);
      ++res.outer_steps;
      res.newton_decrement = dec;
      res.gap = m / t;
      if (stop(x) || outer_stop(x)) {
        res.message = "stopped early";
        break;
      }
      if (dec < 0.0) {
        // Line search stalled: accept if we are already at tolerance.
        res.converged = res.gap <= opts_.gap_tolerance * 10.0;
        res.message = "line search stalled";
        break;
      }
      if (res.gap <= opts_.gap_tolerance) {
        res.converged = true;
        break;
      }
      if (steps >= opts_.max_total_newton) {
        res.message = "Newton step limit";
        break;
      }
      t /= opts_.mu_decrease;
    }
    res.newton_steps = steps;
    res.objective = c_.dot(x);
    res.x = std::move(x);
    return res;
  }

 private:
  bool solve(const std::vector<Eigen::Triplet<double>>& trip, int N, const Eigen::VectorXd& rhs,
             Eigen::VectorXd& out) {
    Eigen::SparseMatrix<double> K(N, N);
    K.setFromTriplets(trip.begin(), trip.end());
    K.makeCompressed();

    // Symmetric Ruiz equilibration.
    Eigen::VectorXd scale = Eigen::VectorXd::Ones(N);
    for (int pass = 0; pass < 4; ++pass) {
      Eigen::VectorXd rowmax = Eigen::VectorXd::Zero(N);
      for (int k = 0; k < K.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(K, k); it; ++it)
          rowmax(it.row()) = std::max(rowmax(it.row()), std::abs(it.value()));
      Eigen::VectorXd r(N);
      for (int i = 0; i < N; ++i) r(i) = rowmax(i) > 0.0 ? 1.0 / std::sqrt(rowmax(i)) : 1.0;
      for (int k = 0; k < K.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(K, k); it; ++it)
          it.valueRef() *= r(it.row()) * r(it.col());
      scale = scale.cwiseProduct(r);
    }

    const Eigen::VectorXd b = scale.cwiseProduct(rhs);
    Eigen::VectorXd y;
    if (!solve_ldlt(K, b, y)) {
      Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
      lu.analyzePattern(K);
      lu.factorize(K);
      if (lu.info() != Eigen::Success) return false;
      y = lu.solve(b);
      if (lu.info() != Eigen::Success || !y.allFinite()) return false;
    }
    out = scale.cwiseProduct(y);
    return true;
  }

  // The system is quasi-definite once the primal block gets +delta and the
  // multiplier block -delta, so a symmetric factorization with fill-reducing
  // ordering is stable; iterative refinement against the exact matrix
  // removes the regularization. The symbolic analysis is reused while the
  // sparsity pattern stays the same.
  bool solve_ldlt(const Eigen::SparseMatrix<double>& K, const Eigen::VectorXd& b, Eigen::VectorXd& y) {
    constexpr double kDelta = 1e-10;
    const int N = static_cast<int>(K.rows());
    Eigen::SparseMatrix<double> R(N, N);
    R.reserve(Eigen::VectorXi::Constant(N, 1));
    for (int i = 0; i < N; ++i) R.insert(i, i) = i < n_ ? kDelta : -kDelta;
    Eigen::SparseMatrix<double> Kr = K + R;
    Kr.makeCompressed();

    const auto* outer = Kr.outerIndexPtr();
    const auto* inner = Kr.innerIndexPtr();
    const bool same = outer_.size() == static_cast<std::size_t>(N + 1) &&
                      inner_.size() == static_cast<std::size_t>(Kr.nonZeros()) &&
                      std::equal(outer_.begin(), outer_.end(), outer) &&
                      std::equal(inner_.begin(), inner_.end(), inner);
    if (!same) {
      ldlt_.analyzePattern(Kr);
      outer_.assign(outer, outer + N + 1);
      inner_.assign(inner, inner + Kr.nonZeros());
    }
    ldlt_.factorize(Kr);
    if (ldlt_.info() != Eigen::Success) return false;
    y = ldlt_.solve(b);
    if (!y.allFinite()) return false;
    // Normwise backward error; LU with pivoting achieves about the same.
    double knorm = 0.0;
    {
      Eigen::VectorXd rows = Eigen::VectorXd::Zero(N);
      for (int k = 0; k < K.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(K, k); it; ++it) rows(it.row()) += std::abs(it.value());
      knorm = rows.maxCoeff();
    }
    const double bnorm = b.lpNorm<Eigen::Infinity>();
    const auto backward_error = [&](const Eigen::VectorXd& v) {
      return (b - K * v).lpNorm<Eigen::Infinity>() / (knorm * v.lpNorm<Eigen::Infinity>() + bnorm + 1e-300);
    };
    double err = backward_error(y);
    for (int it = 0; it < 10 && err > 1e-15; ++it) {
      Eigen::VectorXd next = y + ldlt_.solve(b - K * y);
      if (!next.allFinite()) break;
      const double e = backward_error(next);
      if (!(e < 0.5 * err)) {
        if (e < err) y = std::move(next), err = e;
        break;
      }
      y = std::move(next);
      err = e;
    }
    return err <= 1e-12;
  }

  const ConcaveProgram& prog_;
  Options opts_;
  int n_;
  Eigen::VectorXd c_;
  Eigen::VectorXd lb_;
  Eigen::SparseMatrix<double> A_;
  Eigen::VectorXd b_;
  std::vector<int> bounded_;
  std::vector<ConstraintValue> vals_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt_;
  std::vector<int> outer_;
  std::vector<int> inner_;
};

}  // namespace

std::optional<Eigen::VectorXd> find_interior(const ConcaveProgram& prog, const Eigen::VectorXd& x0,
                                             const Options& opts) {
  Engine base(prog, opts);
  if (!base.strictly_inside_bounds(x0))
    throw std::invalid_argument("barrier start point must be strictly inside the bounds");
  if (base.strictly_feasible(x0)) return x0;

  std::vector<ConstraintValue> vals;
  if (!prog.evaluate(x0, false, vals)) throw std::invalid_argument("barrier start point outside the domain");

  PhaseOne phase(prog, x0);
  const int n = prog.num_variables();
  Eigen::VectorXd z(n + 1);
  z.head(n) = x0;
  z(n) = phase.initial_slack(vals);

  // Stop as soon as every original constraint has a small relative margin.
  constexpr double kMargin = 1e-4;
  Options popts = opts;
  popts.gap_tolerance = 1e-12;
  Engine engine(phase, popts);
  Result r = engine.run(
      z, [&](const Eigen::VectorXd& v) { return v(n) < -kMargin; },
      [&](const Eigen::VectorXd& v) { return v(n) < 0.0; });
  Eigen::VectorXd x = r.x.head(n);
  if (r.x(n) < -1e-13 && base.strictly_feasible(x)) return x;
  return std::nullopt;
}

Result maximize(const ConcaveProgram& prog, const Eigen::VectorXd& x0, const Options& opts) {
  Engine engine(prog, opts);
  if (x0.size() != prog.num_variables()) throw std::invalid_argument("start point has wrong size");
  auto start = find_interior(prog, x0, opts);
  if (!start) {
    Result r;
    r.x = x0;
    r.message = "no strictly feasible point";
    return r;
  }
  const auto never = [](const Eigen::VectorXd&) { return false; };
  return engine.run(*start, never, never);
}

}  // namespace wpcn::barrier
