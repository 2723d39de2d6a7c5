#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "resopf/network.hpp"
#include "resopf/operating_point.hpp"

namespace resopf {

struct BranchFlow {
  double p_from = 0.0;
  double q_from = 0.0;
  double p_to = 0.0;
  double q_to = 0.0;
};

/// Wrap an angle difference into (-pi, pi].
double wrap_angle(double a);

/// General pi-model flows (tap, shift, line charging) for one branch.
BranchFlow branch_flow(const Branch& br, double v_from, double v_to, double theta_from,
                       double theta_to);
BranchFlow branch_flow(const Network& net, const OperatingPoint& pt, std::size_t branch);

/// Per-bus nodal mismatch: injected generation minus demand minus the power
/// leaving through the network (full Y-bus including shunts).
struct PfResidual {
  std::vector<double> r_p;
  std::vector<double> r_q;

  double max_abs() const;
};

PfResidual pf_residual(const Network& net, const AdmittanceMatrix& y, const OperatingPoint& pt);
PfResidual pf_residual(const Network& net, const OperatingPoint& pt);

/// Mean over buses of sqrt(r_p^2 + r_q^2).
double feasibility_distance(const PfResidual& r);
double feasibility_distance(const Network& net, const OperatingPoint& pt);

/// Active dispatch and voltage setpoints for a power-flow solve. `v_set` is
/// per bus and only read at the slack bus and at PV buses with generation.
struct PfSetpoints {
  std::vector<double> p_g;
  std::vector<double> v_set;
};

/// Setpoints at the midpoint of each bus voltage band.
PfSetpoints midpoint_setpoints(const Network& net, std::span<const double> p_g);

struct NewtonOptions {
  int max_iter = 30;
  double tol = 1e-10;
};

struct NewtonResult {
  OperatingPoint point;
  int iterations = 0;
  /// Infinity norm of the mismatch before every update and after the last.
  std::vector<double> mismatch_history;
};

/// Polar Newton-Raphson from a flat start. The slack bus absorbs losses
/// (split equally across its generators); PV buses hold their setpoint and
/// report q_g, shared across generators in proportion to their Q range.
/// Generators at PQ buses inject q_g = 0. Throws DivergenceError after
/// `max_iter` updates or on a non-finite iterate.
NewtonResult newton_pf(const Network& net, const PfSetpoints& setpoints,
                       const NewtonOptions& options = {});

/// Hinge violations per element; `cost_gap` is set iff a reference cost is given.
struct ViolationReport {
  std::vector<double> v_viol;
  std::vector<double> q_viol;
  std::vector<double> s_viol;
  std::optional<double> cost_gap;
};

/// Branch magnitudes come from `pt.s_branch` when present, otherwise from
/// the from-side AC flow.
ViolationReport violations(const Network& net, const OperatingPoint& pt,
                           std::optional<double> ref_cost = std::nullopt);

double generation_cost(const Network& net, std::span<const double> p_g);

/// From-side apparent power |S_ij| on every branch.
std::vector<double> branch_apparent_flows(const Network& net, const OperatingPoint& pt);

}  // namespace resopf
