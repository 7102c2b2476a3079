#include <doctest.h>

#include "wpcn/simplex.hpp"

using namespace wpcn;

TEST_CASE("small LP") {
  // max 3x + 5y s.t. x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), 36.
  Eigen::MatrixXd A(3, 2);
  A << 1, 0, 0, 2, 3, 2;
  Eigen::VectorXd b(3), c(2);
  b << 4, 12, 18;
  c << 3, 5;
  const auto r = lp::maximize(A, b, c);
  CHECK(r.status == lp::Status::Optimal);
  CHECK(r.objective == doctest::Approx(36.0));
  CHECK(r.x(0) == doctest::Approx(2.0));
  CHECK(r.x(1) == doctest::Approx(6.0));
}

TEST_CASE("unbounded LP") {
  Eigen::MatrixXd A(1, 2);
  A << 1, -1;
  Eigen::VectorXd b(1), c(2);
  b << 1;
  c << 0, 1;
  CHECK(lp::maximize(A, b, c).status == lp::Status::Unbounded);
}

TEST_CASE("degenerate LP terminates") {
  Eigen::MatrixXd A(3, 2);
  A << 1, 1, 1, 0, 0, 1;
  Eigen::VectorXd b(3), c(2);
  b << 0, 0, 0;
  c << 1, 1;
  const auto r = lp::maximize(A, b, c);
  CHECK(r.status == lp::Status::Optimal);
  CHECK(r.objective == doctest::Approx(0.0));
}
