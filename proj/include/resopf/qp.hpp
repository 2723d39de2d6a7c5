#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

namespace resopf::qp {

/// minimize 1/2 x'Hx + c'x  s.t.  A_eq x = b_eq,  A_in x <= b_in.
/// H must be symmetric positive semidefinite.
struct Problem {
  Eigen::MatrixXd H;
  Eigen::VectorXd c;
  Eigen::MatrixXd A_eq;
  Eigen::VectorXd b_eq;
  Eigen::MatrixXd A_in;
  Eigen::VectorXd b_in;
};

enum class Status { optimal, infeasible, unbounded, iteration_limit };

struct Options {
  double feasibility_tol = 1e-8;
  double optimality_tol = 1e-8;
  std::size_t max_iterations = 0;  // 0: 50 * (n + m)
};

struct Result {
  Status status = Status::iteration_limit;
  Eigen::VectorXd x;
  Eigen::VectorXd eq_multipliers;
  Eigen::VectorXd in_multipliers;  // >= 0 at optimum, zero off the working set
  std::vector<std::size_t> working_set;  // active inequality rows
  std::vector<std::size_t> infeasible_rows;  // phase-1 certificate when infeasible
  std::size_t iterations = 0;
};

/// Dense primal active-set method. A phase-1 problem (minimize the largest
/// inequality violation) supplies a feasible start. Zero-curvature directions
/// of the reduced Hessian are followed as rays, so linear programs are
/// handled. Ties in both the entering and leaving choice go to the lowest
/// constraint index (Bland's rule).
Result solve(const Problem& problem, const Options& options = {});

}  // namespace resopf::qp
