#include "resopf/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace resopf::qp {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct Core {
  const MatrixXd& H;
  const VectorXd& c;
  const MatrixXd& A_eq;
  const VectorXd& b_eq;
  const MatrixXd& A_in;
  const VectorXd& b_in;
  const Options& opt;
};

MatrixXd working_matrix(const Core& p, const std::vector<std::size_t>& W) {
  const auto n = p.c.size();
  MatrixXd A(p.A_eq.rows() + static_cast<Eigen::Index>(W.size()), n);
  if (p.A_eq.rows() > 0) A.topRows(p.A_eq.rows()) = p.A_eq;
  for (std::size_t k = 0; k < W.size(); ++k)
    A.row(p.A_eq.rows() + static_cast<Eigen::Index>(k)) = p.A_in.row(static_cast<Eigen::Index>(W[k]));
  return A;
}

// Orthonormal basis of the null space of A (rows are constraints).
MatrixXd null_space(const MatrixXd& A, Eigen::Index n) {
  if (A.rows() == 0) return MatrixXd::Identity(n, n);
  Eigen::ColPivHouseholderQR<MatrixXd> qr(A.transpose());
  qr.setThreshold(1e-11);
  const auto rank = qr.rank();
  MatrixXd Q = qr.householderQ() * MatrixXd::Identity(n, n);
  return Q.rightCols(n - rank);
}

struct Step {
  VectorXd p;
  bool ray = false;
};

Step eqp_step(const Core& pr, const MatrixXd& Z, const VectorXd& g) {
  Step s;
  const auto n = g.size();
  if (Z.cols() == 0) {
    s.p = VectorXd::Zero(n);
    return s;
  }
  const MatrixXd Hr = Z.transpose() * pr.H * Z;
  const VectorXd gr = Z.transpose() * g;
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(Hr);
  const VectorXd& lam = eig.eigenvalues();
  const MatrixXd& U = eig.eigenvectors();
  const double hscale = std::max(1.0, lam.cwiseAbs().maxCoeff());
  const double curvature_tol = 1e-10 * hscale;
  const VectorXd coeff = U.transpose() * gr;

  VectorXd flat = VectorXd::Zero(Z.cols());
  VectorXd newton = VectorXd::Zero(Z.cols());
  for (Eigen::Index k = 0; k < lam.size(); ++k) {
    if (lam(k) <= curvature_tol) {
      flat -= coeff(k) * U.col(k);
    } else {
      newton -= coeff(k) / lam(k) * U.col(k);
    }
  }
  const double gscale = std::max(1.0, g.cwiseAbs().maxCoeff());
  if (flat.norm() > 1e-12 * gscale) {
    s.p = Z * flat;
    s.ray = true;
  } else {
    s.p = Z * newton;
  }
  return s;
}

// Runs the active-set loop from a feasible x with working set W.
Status run(const Core& pr, VectorXd& x, std::vector<std::size_t>& W, VectorXd& eq_mult,
           VectorXd& in_mult, std::size_t& iterations) {
  const auto n = x.size();
  const auto m = static_cast<std::size_t>(pr.A_in.rows());
  const std::size_t limit =
      pr.opt.max_iterations > 0 ? pr.opt.max_iterations : 50 * (static_cast<std::size_t>(n) + m + 1);
  std::vector<bool> in_w(m, false);
  for (auto i : W) in_w[i] = true;

  while (iterations < limit) {
    ++iterations;
    const VectorXd g = pr.H * x + pr.c;
    const MatrixXd A = working_matrix(pr, W);
    const MatrixXd Z = null_space(A, n);
    const Step step = eqp_step(pr, Z, g);
    const double xscale = std::max(1.0, x.cwiseAbs().maxCoeff());

    if (!step.ray && step.p.cwiseAbs().maxCoeff() <= 1e-12 * xscale) {
      // Stationary on the working set: g + A' lambda = 0.
      VectorXd lambda = VectorXd::Zero(A.rows());
      if (A.rows() > 0) lambda = A.transpose().completeOrthogonalDecomposition().solve(-g);
      const double mscale = std::max(1.0, g.cwiseAbs().maxCoeff());
      std::size_t leave = m;
      std::size_t leave_pos = 0;
      for (std::size_t k = 0; k < W.size(); ++k) {
        const double lk = lambda(pr.A_eq.rows() + static_cast<Eigen::Index>(k));
        if (lk < -pr.opt.optimality_tol * mscale && W[k] < leave) {
          leave = W[k];
          leave_pos = k;
        }
      }
      if (leave == m) {
        eq_mult = lambda.head(pr.A_eq.rows());
        in_mult = VectorXd::Zero(static_cast<Eigen::Index>(m));
        for (std::size_t k = 0; k < W.size(); ++k)
          in_mult(static_cast<Eigen::Index>(W[k])) =
              std::max(0.0, lambda(pr.A_eq.rows() + static_cast<Eigen::Index>(k)));
        return Status::optimal;
      }
      in_w[leave] = false;
      W.erase(W.begin() + static_cast<std::ptrdiff_t>(leave_pos));
      continue;
    }

    double alpha = step.ray ? std::numeric_limits<double>::infinity() : 1.0;
    std::size_t block = m;
    const double pnorm = step.p.norm();
    for (std::size_t i = 0; i < m; ++i) {
      if (in_w[i]) continue;
      const auto row = pr.A_in.row(static_cast<Eigen::Index>(i));
      const double ap = row.dot(step.p);
      if (ap <= 1e-12 * row.norm() * pnorm) continue;
      const double s = std::max(0.0, (pr.b_in(static_cast<Eigen::Index>(i)) - row.dot(x)) / ap);
      if (s < alpha || (s == alpha && i < block)) {
        alpha = s;
        block = i;
      }
    }
    if (!std::isfinite(alpha)) return Status::unbounded;
    x += alpha * step.p;
    if (block < m) {
      in_w[block] = true;
      W.push_back(block);
    }
  }
  return Status::iteration_limit;
}

}  // namespace

Result solve(const Problem& problem, const Options& options) {
  Result res;
  const auto n = problem.c.size();
  const auto m = problem.A_in.rows();

  VectorXd x = VectorXd::Zero(n);
  if (problem.A_eq.rows() > 0) {
    x = problem.A_eq.completeOrthogonalDecomposition().solve(problem.b_eq);
    const double scale = std::max(1.0, problem.b_eq.cwiseAbs().maxCoeff());
    if ((problem.A_eq * x - problem.b_eq).cwiseAbs().maxCoeff() > options.feasibility_tol * scale) {
      res.status = Status::infeasible;
      res.x = x;
      return res;
    }
  }

  // Phase 1: minimize t subject to A_in x - t <= b_in, t >= 0.
  double worst = 0.0;
  if (m > 0) worst = std::max(0.0, (problem.A_in * x - problem.b_in).maxCoeff());
  const double bscale = m > 0 ? std::max(1.0, problem.b_in.cwiseAbs().maxCoeff()) : 1.0;
  if (worst > options.feasibility_tol * bscale) {
    const auto n1 = n + 1;
    MatrixXd H1 = MatrixXd::Zero(n1, n1);
    VectorXd c1 = VectorXd::Zero(n1);
    c1(n) = 1.0;
    MatrixXd Aeq1 = MatrixXd::Zero(problem.A_eq.rows(), n1);
    if (problem.A_eq.rows() > 0) Aeq1.leftCols(n) = problem.A_eq;
    MatrixXd Ain1 = MatrixXd::Zero(m + 1, n1);
    Ain1.topLeftCorner(m, n) = problem.A_in;
    Ain1.block(0, n, m, 1).setConstant(-1.0);
    Ain1(m, n) = -1.0;
    VectorXd bin1(m + 1);
    bin1.head(m) = problem.b_in;
    bin1(m) = 0.0;
    Core phase1{H1, c1, Aeq1, problem.b_eq, Ain1, bin1, options};
    VectorXd x1(n1);
    x1.head(n) = x;
    x1(n) = worst;
    std::vector<std::size_t> W1;
    VectorXd em, im;
    const auto st = run(phase1, x1, W1, em, im, res.iterations);
    if (st != Status::optimal || x1(n) > options.feasibility_tol * bscale) {
      res.status = Status::infeasible;
      res.x = x1.head(n);
      for (auto i : W1) {
        if (i < static_cast<std::size_t>(m)) res.infeasible_rows.push_back(i);
      }
      std::sort(res.infeasible_rows.begin(), res.infeasible_rows.end());
      return res;
    }
    x = x1.head(n);
  }

  Core phase2{problem.H, problem.c, problem.A_eq, problem.b_eq, problem.A_in, problem.b_in, options};
  std::vector<std::size_t> W;
  res.status = run(phase2, x, W, res.eq_multipliers, res.in_multipliers, res.iterations);
  res.x = std::move(x);
  std::sort(W.begin(), W.end());
  res.working_set = std::move(W);
  return res;
}

}  // namespace resopf::qp
