#pragma once

// Independent reference computations used to cross-check the library.
// Nothing here calls into the code under test except for plain data access.

#include <complex>
#include <filesystem>
#include <functional>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "resopf/network.hpp"
#include "resopf/operating_point.hpp"

namespace oracle {

std::filesystem::path case_path(std::string_view name);
resopf::Network load_fixture(std::string_view name);

/// Solve A x = b by Gaussian elimination with partial pivoting.
Eigen::VectorXd gauss_solve(Eigen::MatrixXd a, Eigen::VectorXd b);

/// DC branch flows for a dispatch: angles from the slack-reduced susceptance
/// matrix, flows (theta_f - theta_t - shift) / x.
std::vector<double> dc_flows(const resopf::Network& net, const std::vector<double>& p_g);

struct LatticeResult {
  bool feasible = false;
  double objective = 0.0;
  std::vector<double> p_g;
};

/// Brute-force DC-OPF: enumerate all but the last generator on a grid over
/// their bounds (last one balances demand), then refine twice around the best
/// point. Supports up to three free generators.
LatticeResult lattice_dc_opf(const resopf::Network& net, double step = 1e-3);

/// Lawson-Hanson non-negative least squares: min ||A y - b||, y >= 0.
Eigen::VectorXd nnls(const Eigen::MatrixXd& a, const Eigen::VectorXd& b);

/// Stationarity and complementarity residual of a DC dispatch, written in the
/// dispatch variables only: the gradient of the cost must be a non-negative
/// combination of active constraint normals plus a multiple of the balance
/// row. Returns the infinity norm of the best-fit residual, together with
/// the worst primal violation.
struct KktReport {
  double stationarity = 0.0;
  double primal = 0.0;
};
KktReport dc_kkt(const resopf::Network& net, const std::vector<double>& p_g,
                 double active_tol = 1e-7);

/// Nodal admittance matrix assembled from scratch (branch by branch).
Eigen::MatrixXcd admittance(const resopf::Network& net);

/// Kirchhoff current-law mismatch computed from per-branch complex currents
/// (no Y-bus), per bus: S_gen - S_load - sum of S leaving.
std::vector<std::complex<double>> kcl_mismatch(const resopf::Network& net,
                                               const resopf::OperatingPoint& pt);

/// Gauss-Seidel power flow: PV buses hold |V| at `v_set`, slack fixed.
/// Returns complex voltages.
std::vector<std::complex<double>> gauss_seidel(const resopf::Network& net,
                                               const std::vector<double>& p_g,
                                               const std::vector<double>& v_set,
                                               double tol = 1e-12, int max_iter = 200000);

/// Central difference of a scalar function.
double central_difference(const std::function<double(double)>& f, double x, double h);

}  // namespace oracle
