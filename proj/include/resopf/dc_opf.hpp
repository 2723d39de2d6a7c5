#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "resopf/network.hpp"
#include "resopf/operating_point.hpp"

namespace resopf {

/// Lossless DC network data: B built from 1/x per branch, branch incidence
/// (+1 at `from`, -1 at `to`) and phase shifts.
struct DcSystem {
  Eigen::MatrixXd b_bus;
  Eigen::MatrixXd incidence;
  Eigen::VectorXd inv_x;
  Eigen::VectorXd shift;
  std::size_t slack = 0;
};

DcSystem build_dc(const Network& net);

enum class DcStatus { optimal, infeasible, unbounded };

std::string to_string(DcStatus status);

struct DcSolution {
  DcStatus status = DcStatus::infeasible;
  std::vector<double> p_g;
  std::vector<double> theta;
  std::vector<double> flow;
  double objective = 0.0;
  /// Names of the constraints binding at the phase-1 optimum when infeasible,
  /// e.g. "p_max[2]" or "flow_max[5]".
  std::vector<std::string> certificate;
  std::size_t iterations = 0;
};

/// Solve min sum f(p_g) s.t. p_g - p_d = B theta, generator bounds and
/// |flow| <= s_max, with theta at the slack bus fixed to zero.
DcSolution solve_dc(const DcSystem& sys, const Network& net);
DcSolution solve_dc(const Network& net);

/// DC features. Node rows are [theta, p_inj]; edge rows hold the branch flow.
/// `flat` is [theta (per bus) | p_g (per generator) | flow (per branch)].
struct DcFeatureSet {
  std::vector<std::array<double, 2>> node;
  std::vector<double> edge;
  std::vector<double> flat;
};

/// Throws FeatureError unless `sol` is optimal.
DcFeatureSet extract_dc_features(const DcSolution& sol, const Network& net);

/// Warm start (p_g^DC, q_g = 0, v = 1, theta^DC); s_branch holds |flow^DC|,
/// the baseline for branch-flow residuals.
OperatingPoint warm_start(const DcSolution& sol, const Network& net);

}  // namespace resopf
