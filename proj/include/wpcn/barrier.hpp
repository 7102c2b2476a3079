#pragma once

// Log-barrier interior-point method for problems of the form
//
//   maximize  c'x   s.t.  f_j(x) >= 0 (f_j concave),  x_i >= lb_i,  A x = b.
//
// Newton steps are computed from a sparse augmented system in which
// constraints with many nonzeros contribute an extra column instead of a
// dense rank-one Hessian update, so problems that couple every slot through a
// handful of per-user constraints stay sparse.

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace wpcn::barrier {

struct ConstraintValue {
  double value = 0.0;
  std::vector<int> grad_index;
  std::vector<double> grad_value;
  /// Hessian of f_j as full symmetric triplets (both triangles).
  std::vector<Eigen::Triplet<double>> hessian;

  void reset() {
    value = 0.0;
    grad_index.clear();
    grad_value.clear();
    hessian.clear();
  }
  void add_gradient(int i, double v) {
    grad_index.push_back(i);
    grad_value.push_back(v);
  }
};

class ConcaveProgram {
 public:
  virtual ~ConcaveProgram() = default;

  virtual int num_variables() const = 0;
  virtual int num_constraints() const = 0;
  /// Linear objective to maximize.
  virtual Eigen::VectorXd objective() const = 0;
  /// Lower bounds; -infinity marks a free variable.
  virtual Eigen::VectorXd lower_bounds() const = 0;
  virtual Eigen::SparseMatrix<double> equality_matrix() const {
    return Eigen::SparseMatrix<double>(0, num_variables());
  }
  virtual Eigen::VectorXd equality_rhs() const { return Eigen::VectorXd(0); }
  /// Evaluates all constraints at x, with derivatives when asked. Returns
  /// false if x is outside the domain of some f_j.
  virtual bool evaluate(const Eigen::VectorXd& x, bool derivatives,
                        std::vector<ConstraintValue>& out) const = 0;
  /// Typical magnitude of f_j; normalizes the phase-one problem.
  virtual double constraint_scale(int /*j*/) const { return 1.0; }
};

struct Options {
  double mu_decrease = 0.2;       // barrier weight 1/t is multiplied by this per outer step
  double gap_tolerance = 1e-8;    // duality measure m/t at termination
  double t0 = 1.0;
  double newton_tolerance = 1e-10;  // half squared Newton decrement
  int max_newton_per_center = 100;
  int max_total_newton = 3000;
  int dense_threshold = 24;
};

struct Result {
  Eigen::VectorXd x;
  bool converged = false;
  double gap = std::numeric_limits<double>::infinity();
  double objective = 0.0;
  double newton_decrement = 0.0;
  int newton_steps = 0;
  int outer_steps = 0;
  std::string message;
};

/// Returns a point strictly inside every constraint, running a phase-one
/// problem when x0 itself is not. x0 must satisfy the bounds strictly and the
/// equalities. Returns nullopt when no interior point exists (to tolerance).
std::optional<Eigen::VectorXd> find_interior(const ConcaveProgram& prog, const Eigen::VectorXd& x0,
                                             const Options& opts = {});

Result maximize(const ConcaveProgram& prog, const Eigen::VectorXd& x0, const Options& opts = {});

}  // namespace wpcn::barrier
