#include "wpcn/simplex.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace wpcn::lp {

Result maximize(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const Eigen::VectorXd& c,
                int max_pivots) {
  const Eigen::Index m = A.rows();
  const Eigen::Index n = A.cols();
  if (b.size() != m || c.size() != n) throw std::invalid_argument("LP dimension mismatch");
  if ((b.array() < 0.0).any()) throw std::invalid_argument("LP right-hand side must be nonnegative");

  // Rows are scaled to unit max-norm so the pivot tolerance is meaningful
  // even when coefficients mix bits/Hz and Joules.
  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(m + 1, n + m + 1);
  for (Eigen::Index i = 0; i < m; ++i) {
    double scale = A.row(i).cwiseAbs().maxCoeff();
    if (scale <= 0.0) scale = 1.0;
    T.row(i).head(n) = A.row(i) / scale;
    T(i, n + i) = 1.0 / scale;
    T(i, n + m) = b(i) / scale;
  }
  const double cscale = std::max(c.cwiseAbs().maxCoeff(), 1e-300);
  T.row(m).head(n) = -c.transpose() / cscale;

  std::vector<Eigen::Index> basis(m);
  for (Eigen::Index i = 0; i < m; ++i) basis[i] = n + i;

  constexpr double eps = 1e-12;
  Result res;
  for (;;) {
    Eigen::Index enter = -1;
    for (Eigen::Index j = 0; j < n + m; ++j) {
      if (T(m, j) < -eps) {
        enter = j;
        break;
      }
    }
    if (enter < 0) break;

    Eigen::Index leave = -1;
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < m; ++i) {
      if (T(i, enter) > eps) {
        const double ratio = T(i, n + m) / T(i, enter);
        const bool tie = leave >= 0 && std::abs(ratio - best) <= eps;
        if (leave < 0 || (!tie && ratio < best) || (tie && basis[i] < basis[leave])) {
          leave = i;
          best = ratio;
        }
      }
    }
    if (leave < 0) {
      res.status = Status::Unbounded;
      break;
    }
    if (res.pivots++ >= max_pivots) {
      res.status = Status::IterationLimit;
      break;
    }
    T.row(leave) /= T(leave, enter);
    for (Eigen::Index i = 0; i <= m; ++i) {
      if (i != leave && T(i, enter) != 0.0) T.row(i) -= T(i, enter) * T.row(leave);
    }
    basis[leave] = enter;
  }

  res.x = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < m; ++i) {
    if (basis[i] < n) res.x(basis[i]) = std::max(0.0, T(i, n + m));
  }
  res.objective = c.dot(res.x);
  return res;
}

}  // namespace wpcn::lp
