#include "resopf/ac_physics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "resopf/errors.hpp"

namespace resopf {

double wrap_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double w = std::remainder(a, two_pi);
  if (w <= -std::numbers::pi) w += two_pi;
  return w;
}

BranchFlow branch_flow(const Branch& br, double v_from, double v_to, double theta_from,
                       double theta_to) {
  using cd = std::complex<double>;
  const cd ys = br.series_admittance();
  const cd half_charge(0.0, br.b_charge / 2.0);
  const cd t = std::polar(br.tap, br.shift);
  const cd yff = (ys + half_charge) / (br.tap * br.tap);
  const cd ytt = ys + half_charge;
  const cd yft = -ys / std::conj(t);
  const cd ytf = -ys / t;

  const double d_ft = wrap_angle(theta_from - theta_to);
  const double c = std::cos(d_ft);
  const double s = std::sin(d_ft);
  BranchFlow out;
  out.p_from = v_from * v_from * yff.real() + v_from * v_to * (yft.real() * c + yft.imag() * s);
  out.q_from = -v_from * v_from * yff.imag() + v_from * v_to * (yft.real() * s - yft.imag() * c);
  // Seen from the `to` end the angle difference flips sign.
  out.p_to = v_to * v_to * ytt.real() + v_to * v_from * (ytf.real() * c - ytf.imag() * s);
  out.q_to = -v_to * v_to * ytt.imag() + v_to * v_from * (-ytf.real() * s - ytf.imag() * c);
  return out;
}

BranchFlow branch_flow(const Network& net, const OperatingPoint& pt, std::size_t branch) {
  check_dimensions(net, pt);
  const auto& br = net.branches()[branch];
  return branch_flow(br, pt.v[br.from], pt.v[br.to], pt.theta[br.from], pt.theta[br.to]);
}

double PfResidual::max_abs() const {
  double m = 0.0;
  for (double x : r_p) m = std::max(m, std::abs(x));
  for (double x : r_q) m = std::max(m, std::abs(x));
  return m;
}

namespace {

// Power leaving each bus through the network, P_i + jQ_i = V_i conj((Y V)_i).
void bus_injections(const AdmittanceMatrix& y, std::span<const double> v,
                    std::span<const double> theta, std::vector<double>& p,
                    std::vector<double>& q) {
  const auto nb = v.size();
  p.assign(nb, 0.0);
  q.assign(nb, 0.0);
  for (std::size_t i = 0; i < nb; ++i) {
    double pi = 0.0;
    double qi = 0.0;
    for (std::size_t j = 0; j < nb; ++j) {
      const double gij = y.G(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      const double bij = y.B(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      if (gij == 0.0 && bij == 0.0) continue;
      const double d = wrap_angle(theta[i] - theta[j]);
      const double c = std::cos(d);
      const double s = std::sin(d);
      pi += v[j] * (gij * c + bij * s);
      qi += v[j] * (gij * s - bij * c);
    }
    p[i] = v[i] * pi;
    q[i] = v[i] * qi;
  }
}

}  // namespace

PfResidual pf_residual(const Network& net, const AdmittanceMatrix& y, const OperatingPoint& pt) {
  check_dimensions(net, pt);
  std::vector<double> p_calc, q_calc;
  bus_injections(y, pt.v, pt.theta, p_calc, q_calc);
  PfResidual r;
  r.r_p = net.bus_p_demand();
  r.r_q = net.bus_q_demand();
  for (std::size_t i = 0; i < r.r_p.size(); ++i) {
    r.r_p[i] = -r.r_p[i] - p_calc[i];
    r.r_q[i] = -r.r_q[i] - q_calc[i];
  }
  const auto gens = net.generators();
  for (std::size_t g = 0; g < gens.size(); ++g) {
    r.r_p[gens[g].bus] += pt.p_g[g];
    r.r_q[gens[g].bus] += pt.q_g[g];
  }
  return r;
}

PfResidual pf_residual(const Network& net, const OperatingPoint& pt) {
  return pf_residual(net, build_admittance(net), pt);
}

double feasibility_distance(const PfResidual& r) {
  if (r.r_p.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < r.r_p.size(); ++i) total += std::hypot(r.r_p[i], r.r_q[i]);
  return total / static_cast<double>(r.r_p.size());
}

double feasibility_distance(const Network& net, const OperatingPoint& pt) {
  return feasibility_distance(pf_residual(net, pt));
}

PfSetpoints midpoint_setpoints(const Network& net, std::span<const double> p_g) {
  if (p_g.size() != net.num_generators())
    throw ContractViolation("dispatch length " + std::to_string(p_g.size()) + " != " +
                            std::to_string(net.num_generators()) + " generators");
  PfSetpoints sp;
  sp.p_g.assign(p_g.begin(), p_g.end());
  for (const auto& b : net.buses()) sp.v_set.push_back(0.5 * (b.v_min + b.v_max));
  return sp;
}

NewtonResult newton_pf(const Network& net, const PfSetpoints& setpoints,
                       const NewtonOptions& options) {
  const auto nb = net.num_buses();
  const auto ng = net.num_generators();
  if (setpoints.p_g.size() != ng || setpoints.v_set.size() != nb)
    throw ContractViolation("power-flow setpoints do not match the network dimensions");

  const auto y = build_admittance(net);
  const auto gens = net.generators();
  const auto at_bus = net.generators_at_buses();
  const auto slack = net.slack();

  // Voltage-controlled buses: slack and PV buses that still have generation.
  std::vector<bool> v_fixed(nb, false);
  for (std::size_t i = 0; i < nb; ++i) {
    const auto kind = net.buses()[i].kind;
    v_fixed[i] = kind == BusKind::slack || (kind == BusKind::pv && !at_bus[i].empty());
  }
  std::vector<std::size_t> angle_idx, mag_idx;  // unknown positions
  for (std::size_t i = 0; i < nb; ++i) {
    if (i != slack) angle_idx.push_back(i);
    if (!v_fixed[i]) mag_idx.push_back(i);
  }
  const auto na = angle_idx.size();
  const auto nm = mag_idx.size();

  std::vector<double> p_spec(nb, 0.0), q_spec(nb, 0.0);
  {
    const auto pd = net.bus_p_demand();
    const auto qd = net.bus_q_demand();
    for (std::size_t i = 0; i < nb; ++i) {
      p_spec[i] = -pd[i];
      q_spec[i] = -qd[i];
    }
    for (std::size_t g = 0; g < ng; ++g) p_spec[gens[g].bus] += setpoints.p_g[g];
  }

  std::vector<double> v(nb, 1.0), theta(nb, 0.0);
  for (std::size_t i = 0; i < nb; ++i) {
    if (v_fixed[i]) v[i] = setpoints.v_set[i];
  }

  NewtonResult result;
  std::vector<double> p_calc, q_calc;
  Eigen::VectorXd mismatch(static_cast<Eigen::Index>(na + nm));
  auto evaluate = [&]() {
    bus_injections(y, v, theta, p_calc, q_calc);
    for (std::size_t k = 0; k < na; ++k)
      mismatch(static_cast<Eigen::Index>(k)) = p_spec[angle_idx[k]] - p_calc[angle_idx[k]];
    for (std::size_t k = 0; k < nm; ++k)
      mismatch(static_cast<Eigen::Index>(na + k)) = q_spec[mag_idx[k]] - q_calc[mag_idx[k]];
    return mismatch.size() == 0 ? 0.0 : mismatch.cwiseAbs().maxCoeff();
  };

  std::vector<long> angle_pos(nb, -1), mag_pos(nb, -1);
  for (std::size_t k = 0; k < na; ++k) angle_pos[angle_idx[k]] = static_cast<long>(k);
  for (std::size_t k = 0; k < nm; ++k) mag_pos[mag_idx[k]] = static_cast<long>(na + k);

  double norm = evaluate();
  result.mismatch_history.push_back(norm);
  while (!(norm <= options.tol)) {
    if (!std::isfinite(norm))
      throw DivergenceError("power flow produced a non-finite iterate", norm);
    if (result.iterations >= options.max_iter)
      throw DivergenceError("power flow did not converge in " + std::to_string(options.max_iter) +
                                " iterations (mismatch " + std::to_string(norm) + ")",
                            norm);

    // Jacobian of (P, Q) w.r.t. (theta, v) in polar form.
    const auto n = static_cast<Eigen::Index>(na + nm);
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t i = 0; i < nb; ++i) {
      const long rp = angle_pos[i];
      const long rq = mag_pos[i];
      if (rp < 0 && rq < 0) continue;
      const auto ii = static_cast<Eigen::Index>(i);
      for (std::size_t j = 0; j < nb; ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        const double gij = y.G(ii, jj);
        const double bij = y.B(ii, jj);
        if (i != j && gij == 0.0 && bij == 0.0) continue;
        const long ca = angle_pos[j];
        const long cm = mag_pos[j];
        if (i == j) {
          const double gii = gij, bii = bij;
          if (rp >= 0 && ca >= 0) J(rp, ca) = -q_calc[i] - bii * v[i] * v[i];
          if (rp >= 0 && cm >= 0) J(rp, cm) = p_calc[i] / v[i] + gii * v[i];
          if (rq >= 0 && ca >= 0) J(rq, ca) = p_calc[i] - gii * v[i] * v[i];
          if (rq >= 0 && cm >= 0) J(rq, cm) = q_calc[i] / v[i] - bii * v[i];
        } else {
          const double d = wrap_angle(theta[i] - theta[j]);
          const double c = std::cos(d);
          const double s = std::sin(d);
          if (rp >= 0 && ca >= 0) J(rp, ca) = v[i] * v[j] * (gij * s - bij * c);
          if (rp >= 0 && cm >= 0) J(rp, cm) = v[i] * (gij * c + bij * s);
          if (rq >= 0 && ca >= 0) J(rq, ca) = -v[i] * v[j] * (gij * c + bij * s);
          if (rq >= 0 && cm >= 0) J(rq, cm) = v[i] * (gij * s - bij * c);
        }
      }
    }
    const Eigen::VectorXd dx = J.partialPivLu().solve(mismatch);
    for (std::size_t k = 0; k < na; ++k) theta[angle_idx[k]] += dx(static_cast<Eigen::Index>(k));
    for (std::size_t k = 0; k < nm; ++k) v[mag_idx[k]] += dx(static_cast<Eigen::Index>(na + k));
    ++result.iterations;
    for (std::size_t k = 0; k < nm; ++k) {
      if (!(v[mag_idx[k]] > 0.0))
        throw DivergenceError("power flow collapsed a voltage magnitude", mismatch.cwiseAbs().maxCoeff());
    }
    norm = evaluate();
    result.mismatch_history.push_back(norm);
  }

  OperatingPoint& pt = result.point;
  pt.v = v;
  pt.theta = theta;
  pt.p_g = setpoints.p_g;
  pt.q_g.assign(ng, 0.0);
  const auto pd = net.bus_p_demand();
  const auto qd = net.bus_q_demand();
  {
    const auto& sg = at_bus[slack];
    if (!sg.empty()) {
    double dispatched = 0.0;
    for (auto g : sg) dispatched += setpoints.p_g[g];
    const double extra = (p_calc[slack] + pd[slack] - dispatched) / static_cast<double>(sg.size());
    for (auto g : sg) pt.p_g[g] += extra;
    }
  }
  for (std::size_t i = 0; i < nb; ++i) {
    if (!v_fixed[i] || at_bus[i].empty()) continue;
    const double q_total = q_calc[i] + qd[i];
    double range = 0.0;
    for (auto g : at_bus[i]) range += gens[g].q_max - gens[g].q_min;
    for (auto g : at_bus[i]) {
      const double share = range > 0.0 ? (gens[g].q_max - gens[g].q_min) / range
                                       : 1.0 / static_cast<double>(at_bus[i].size());
      pt.q_g[g] = q_total * share;
    }
  }
  pt.s_branch = branch_apparent_flows(net, pt);
  return result;
}

std::vector<double> branch_apparent_flows(const Network& net, const OperatingPoint& pt) {
  std::vector<double> s(net.num_branches());
  const auto branches = net.branches();
  for (std::size_t k = 0; k < branches.size(); ++k) {
    const auto& br = branches[k];
    const auto f = branch_flow(br, pt.v[br.from], pt.v[br.to], pt.theta[br.from], pt.theta[br.to]);
    s[k] = std::hypot(f.p_from, f.q_from);
  }
  return s;
}

ViolationReport violations(const Network& net, const OperatingPoint& pt,
                           std::optional<double> ref_cost) {
  check_dimensions(net, pt);
  ViolationReport rep;
  const auto buses = net.buses();
  for (std::size_t i = 0; i < buses.size(); ++i) {
    rep.v_viol.push_back(std::max(0.0, pt.v[i] - buses[i].v_max) +
                         std::max(0.0, buses[i].v_min - pt.v[i]));
  }
  const auto gens = net.generators();
  for (std::size_t g = 0; g < gens.size(); ++g) {
    rep.q_viol.push_back(std::max(0.0, pt.q_g[g] - gens[g].q_max) +
                         std::max(0.0, gens[g].q_min - pt.q_g[g]));
  }
  const auto s = pt.has_branch_flows() ? pt.s_branch : branch_apparent_flows(net, pt);
  const auto branches = net.branches();
  for (std::size_t k = 0; k < branches.size(); ++k)
    rep.s_viol.push_back(std::max(0.0, s[k] - branches[k].s_max));
  if (ref_cost) rep.cost_gap = std::abs(generation_cost(net, pt.p_g) - *ref_cost);
  return rep;
}

double generation_cost(const Network& net, std::span<const double> p_g) {
  const auto gens = net.generators();
  if (p_g.size() != gens.size()) throw ContractViolation("dispatch length does not match generators");
  double total = 0.0;
  for (std::size_t g = 0; g < gens.size(); ++g) total += gens[g].cost(p_g[g]);
  return total;
}

}  // namespace resopf
