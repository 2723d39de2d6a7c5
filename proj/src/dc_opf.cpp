#include "resopf/dc_opf.hpp"

#include <algorithm>
#include <cmath>

#include "resopf/errors.hpp"
#include "resopf/qp.hpp"

namespace resopf {

std::string to_string(DcStatus status) {
  switch (status) {
    case DcStatus::optimal:
      return "optimal";
    case DcStatus::infeasible:
      return "infeasible";
    case DcStatus::unbounded:
      return "unbounded";
  }
  return "?";
}

DcSystem build_dc(const Network& net) {
  const auto nb = static_cast<Eigen::Index>(net.num_buses());
  const auto nl = static_cast<Eigen::Index>(net.num_branches());
  DcSystem sys;
  sys.b_bus = Eigen::MatrixXd::Zero(nb, nb);
  sys.incidence = Eigen::MatrixXd::Zero(nl, nb);
  sys.inv_x = Eigen::VectorXd::Zero(nl);
  sys.shift = Eigen::VectorXd::Zero(nl);
  sys.slack = net.slack();
  const auto branches = net.branches();
  for (Eigen::Index k = 0; k < nl; ++k) {
    const auto& br = branches[static_cast<std::size_t>(k)];
    const auto f = static_cast<Eigen::Index>(br.from);
    const auto t = static_cast<Eigen::Index>(br.to);
    const double y = 1.0 / br.x;
    sys.inv_x(k) = y;
    sys.shift(k) = br.shift;
    sys.incidence(k, f) = 1.0;
    sys.incidence(k, t) = -1.0;
    sys.b_bus(f, f) += y;
    sys.b_bus(t, t) += y;
    sys.b_bus(f, t) -= y;
    sys.b_bus(t, f) -= y;
  }
  return sys;
}

DcSolution solve_dc(const Network& net) { return solve_dc(build_dc(net), net); }

DcSolution solve_dc(const DcSystem& sys, const Network& net) {
  const auto ng = static_cast<Eigen::Index>(net.num_generators());
  const auto nb = static_cast<Eigen::Index>(net.num_buses());
  const auto nl = static_cast<Eigen::Index>(net.num_branches());
  const auto n = ng + nb;  // x = [p_g | theta]
  const auto gens = net.generators();
  const auto branches = net.branches();

  qp::Problem prob;
  prob.H = Eigen::MatrixXd::Zero(n, n);
  prob.c = Eigen::VectorXd::Zero(n);
  // Equal-cost ties go to the lowest generator id: a vanishing linear
  // perturbation that grows with the id.
  double cscale = 1.0;
  for (const auto& g : gens) cscale = std::max(cscale, std::abs(g.cost.c1));
  std::vector<Eigen::Index> order(static_cast<std::size_t>(ng));
  for (Eigen::Index g = 0; g < ng; ++g) order[static_cast<std::size_t>(g)] = g;
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return gens[static_cast<std::size_t>(a)].id < gens[static_cast<std::size_t>(b)].id;
  });
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    const auto g = order[rank];
    const auto& cost = gens[static_cast<std::size_t>(g)].cost;
    prob.H(g, g) = 2.0 * cost.c2;
    prob.c(g) = cost.c1 + 1e-9 * cscale * static_cast<double>(rank);
  }

  // Balance: E p_g - B theta = p_d - s, with s the phase-shift injections.
  const Eigen::MatrixXd flow_theta = sys.inv_x.asDiagonal() * sys.incidence;  // flow = F theta - inv_x*shift
  const Eigen::VectorXd shift_flow = sys.inv_x.cwiseProduct(sys.shift);
  const Eigen::VectorXd shift_inj = sys.incidence.transpose() * shift_flow;
  const auto pd = net.bus_p_demand();

  prob.A_eq = Eigen::MatrixXd::Zero(nb + 1, n);
  prob.b_eq = Eigen::VectorXd::Zero(nb + 1);
  for (Eigen::Index g = 0; g < ng; ++g)
    prob.A_eq(static_cast<Eigen::Index>(gens[static_cast<std::size_t>(g)].bus), g) = 1.0;
  prob.A_eq.block(0, ng, nb, nb) = -sys.b_bus;
  for (Eigen::Index i = 0; i < nb; ++i) prob.b_eq(i) = pd[static_cast<std::size_t>(i)] - shift_inj(i);
  prob.A_eq(nb, ng + static_cast<Eigen::Index>(sys.slack)) = 1.0;

  // Rows: p_min (ng), p_max (ng), flow_max (nl), flow_min (nl).
  prob.A_in = Eigen::MatrixXd::Zero(2 * ng + 2 * nl, n);
  prob.b_in = Eigen::VectorXd::Zero(2 * ng + 2 * nl);
  for (Eigen::Index g = 0; g < ng; ++g) {
    const auto& gen = gens[static_cast<std::size_t>(g)];
    prob.A_in(g, g) = -1.0;
    prob.b_in(g) = -gen.p_min;
    prob.A_in(ng + g, g) = 1.0;
    prob.b_in(ng + g) = gen.p_max;
  }
  for (Eigen::Index k = 0; k < nl; ++k) {
    const double s_max = branches[static_cast<std::size_t>(k)].s_max;
    prob.A_in.block(2 * ng + k, ng, 1, nb) = flow_theta.row(k);
    prob.b_in(2 * ng + k) = s_max + shift_flow(k);
    prob.A_in.block(2 * ng + nl + k, ng, 1, nb) = -flow_theta.row(k);
    prob.b_in(2 * ng + nl + k) = s_max - shift_flow(k);
  }

  const auto res = qp::solve(prob);
  DcSolution sol;
  sol.iterations = res.iterations;
  if (res.status == qp::Status::infeasible) {
    sol.status = DcStatus::infeasible;
    auto name = [&](std::size_t row) {
      const auto r = static_cast<Eigen::Index>(row);
      if (r < ng) return "p_min[" + std::to_string(r) + "]";
      if (r < 2 * ng) return "p_max[" + std::to_string(r - ng) + "]";
      if (r < 2 * ng + nl) return "flow_max[" + std::to_string(r - 2 * ng) + "]";
      return "flow_min[" + std::to_string(r - 2 * ng - nl) + "]";
    };
    for (auto row : res.infeasible_rows) sol.certificate.push_back(name(row));
    if (sol.certificate.empty()) sol.certificate.push_back("power_balance");
    return sol;
  }
  if (res.status != qp::Status::optimal) {
    sol.status = DcStatus::unbounded;
    return sol;
  }

  sol.status = DcStatus::optimal;
  sol.p_g.assign(res.x.data(), res.x.data() + ng);
  sol.theta.assign(res.x.data() + ng, res.x.data() + n);
  sol.theta[sys.slack] = 0.0;
  sol.flow.resize(static_cast<std::size_t>(nl));
  for (Eigen::Index k = 0; k < nl; ++k) {
    const auto& br = branches[static_cast<std::size_t>(k)];
    sol.flow[static_cast<std::size_t>(k)] =
        (sol.theta[br.from] - sol.theta[br.to] - br.shift) / br.x;
  }
  sol.objective = 0.0;
  for (Eigen::Index g = 0; g < ng; ++g)
    sol.objective += gens[static_cast<std::size_t>(g)].cost(sol.p_g[static_cast<std::size_t>(g)]);
  return sol;
}

DcFeatureSet extract_dc_features(const DcSolution& sol, const Network& net) {
  if (sol.status != DcStatus::optimal)
    throw FeatureError("DC features need an optimal solution, got " + to_string(sol.status));
  if (sol.theta.size() != net.num_buses() || sol.p_g.size() != net.num_generators() ||
      sol.flow.size() != net.num_branches())
    throw ContractViolation("DC solution does not match the network dimensions");
  DcFeatureSet fs;
  auto inj = net.bus_p_demand();
  for (auto& v : inj) v = -v;
  const auto gens = net.generators();
  for (std::size_t g = 0; g < gens.size(); ++g) inj[gens[g].bus] += sol.p_g[g];
  fs.node.resize(net.num_buses());
  for (std::size_t i = 0; i < net.num_buses(); ++i) fs.node[i] = {sol.theta[i], inj[i]};
  fs.edge = sol.flow;
  fs.flat.reserve(sol.theta.size() + sol.p_g.size() + sol.flow.size());
  fs.flat.insert(fs.flat.end(), sol.theta.begin(), sol.theta.end());
  fs.flat.insert(fs.flat.end(), sol.p_g.begin(), sol.p_g.end());
  fs.flat.insert(fs.flat.end(), sol.flow.begin(), sol.flow.end());
  return fs;
}

OperatingPoint warm_start(const DcSolution& sol, const Network& net) {
  if (sol.status != DcStatus::optimal)
    throw FeatureError("warm start needs an optimal DC solution, got " + to_string(sol.status));
  OperatingPoint x0;
  x0.p_g = sol.p_g;
  x0.q_g.assign(net.num_generators(), 0.0);
  x0.v.assign(net.num_buses(), 1.0);
  x0.theta = sol.theta;
  x0.s_branch.resize(sol.flow.size());
  std::transform(sol.flow.begin(), sol.flow.end(), x0.s_branch.begin(),
                 [](double f) { return std::abs(f); });
  return x0;
}

}  // namespace resopf
