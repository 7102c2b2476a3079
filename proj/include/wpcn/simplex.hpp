#pragma once

// Dense tableau simplex for the tiny linear programs that appear in the
// time-sharing step. Bland's rule keeps pivoting finite and deterministic.

#include <Eigen/Dense>

namespace wpcn::lp {

enum class Status { Optimal, Unbounded, IterationLimit };

struct Result {
  Status status = Status::Optimal;
  Eigen::VectorXd x;
  double objective = 0.0;
  int pivots = 0;
};

/// maximize c'x  s.t.  A x <= b,  x >= 0, where b >= 0 so the origin is a
/// feasible starting basis.
Result maximize(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const Eigen::VectorXd& c,
                int max_pivots = 10000);

}  // namespace wpcn::lp
