#pragma once

#include <vector>

namespace resopf {

class Network;

/// Full AC decision vector x = (p_g, q_g, v, theta) plus optional branch
/// apparent-flow magnitudes. `s_branch` is empty when flows are absent.
struct OperatingPoint {
  std::vector<double> p_g;
  std::vector<double> q_g;
  std::vector<double> v;
  std::vector<double> theta;
  std::vector<double> s_branch;

  bool has_branch_flows() const { return !s_branch.empty(); }
  bool operator==(const OperatingPoint&) const = default;
};

/// Throws ContractViolation when `pt` does not match the network's dimensions.
void check_dimensions(const Network& net, const OperatingPoint& pt);

}  // namespace resopf
