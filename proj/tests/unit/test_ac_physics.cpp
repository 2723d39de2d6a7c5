#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "resopf/ac_physics.hpp"
#include "resopf/dc_opf.hpp"
#include "resopf/errors.hpp"

using namespace resopf;

namespace {

NewtonResult solve_at_dc(const Network& net) {
  const auto dc = solve_dc(net);
  REQUIRE(dc.status == DcStatus::optimal);
  return newton_pf(net, midpoint_setpoints(net, dc.p_g));
}

}  // namespace

TEST_CASE("plain line flows match the textbook two-port formula") {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> r(0.0, 0.1), x(0.01, 0.5), v(0.9, 1.1), th(-0.6, 0.6);
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    Branch br;
    br.r = r(rng);
    br.x = x(rng);
    const double ub = v(rng), un = v(rng), tb = th(rng), tn = th(rng);
    const double g = br.r / (br.r * br.r + br.x * br.x);
    const double b = -br.x / (br.r * br.r + br.x * br.x);
    const double d = tb - tn;
    const double p = ub * ub * g - ub * un * (g * std::cos(d) + b * std::sin(d));
    const double q = -ub * ub * b - ub * un * (g * std::sin(d) - b * std::cos(d));
    const auto f = branch_flow(br, ub, un, tb, tn);
    worst = std::max({worst, std::abs(f.p_from - p), std::abs(f.q_from - q)});
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("branch flows balance with series losses") {
  Branch br;
  br.r = 0.02;
  br.x = 0.2;
  br.b_charge = 0.0;
  const auto f = branch_flow(br, 1.02, 0.98, 0.05, -0.03);
  const std::complex<double> vf = std::polar(1.02, 0.05), vt = std::polar(0.98, -0.03);
  const auto i = (vf - vt) / std::complex<double>(br.r, br.x);
  const double loss = std::norm(i) * br.r;
  CHECK(f.p_from + f.p_to == doctest::Approx(loss).epsilon(1e-12));
}

TEST_CASE("angle wrapping") {
  CHECK(wrap_angle(0.3) == doctest::Approx(0.3));
  CHECK(wrap_angle(2.0 * std::numbers::pi + 0.3) == doctest::Approx(0.3));
  CHECK(wrap_angle(-std::numbers::pi) == doctest::Approx(std::numbers::pi));
  CHECK(wrap_angle(std::numbers::pi) == doctest::Approx(std::numbers::pi));
}

TEST_CASE("nodal residual agrees with the branch-current computation") {
  for (const auto* name : {"case3_triangle", "case6ww", "case14", "case57"}) {
    CAPTURE(name);
    const auto net = oracle::load_fixture(name);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-0.2, 0.2);
    OperatingPoint pt;
    for (std::size_t i = 0; i < net.num_buses(); ++i) {
      pt.v.push_back(1.0 + 0.2 * u(rng));
      pt.theta.push_back(u(rng));
    }
    for (std::size_t g = 0; g < net.num_generators(); ++g) {
      pt.p_g.push_back(1.0 + u(rng));
      pt.q_g.push_back(u(rng));
    }
    const auto r = pf_residual(net, pt);
    const auto ref = oracle::kcl_mismatch(net, pt);
    for (std::size_t i = 0; i < net.num_buses(); ++i) {
      CHECK(r.r_p[i] == doctest::Approx(ref[i].real()).epsilon(1e-10));
      CHECK(r.r_q[i] == doctest::Approx(ref[i].imag()).epsilon(1e-10));
    }
    double mean = 0.0;
    for (const auto& c : ref) mean += std::abs(c);
    CHECK(feasibility_distance(net, pt) == doctest::Approx(mean / static_cast<double>(ref.size())));
  }
}

TEST_CASE("newton converges on every fixture with a quadratic tail") {
  for (const auto* name : {"case2", "case3_triangle", "case3_congested", "case3_quadratic", "case6ww",
                           "case14", "case57"}) {
    CAPTURE(name);
    const auto net = oracle::load_fixture(name);
    const auto res = solve_at_dc(net);
    const auto& h = res.mismatch_history;
    CHECK(h.back() < 1e-10);
    CHECK(res.iterations <= 10);
    // Quadratic tail: e_{k+1} <= C e_k^2 once the iterate is close.
    for (std::size_t k = 1; k + 1 < h.size(); ++k) {
      if (h[k] < 1e-2 && h[k + 1] > 1e-14) CHECK(h[k + 1] <= 1e3 * h[k] * h[k]);
    }
    const auto mis = oracle::kcl_mismatch(net, res.point);
    for (const auto& c : mis) CHECK(std::abs(c) < 1e-9);
    CHECK(pf_residual(net, res.point).max_abs() < 1e-9);
  }
}

TEST_CASE("newton agrees with gauss-seidel") {
  for (const auto* name : {"case3_triangle", "case6ww", "case14"}) {
    CAPTURE(name);
    const auto net = oracle::load_fixture(name);
    const auto dc = solve_dc(net);
    const auto sp = midpoint_setpoints(net, dc.p_g);
    const auto res = newton_pf(net, sp);
    const auto v = oracle::gauss_seidel(net, dc.p_g, sp.v_set);
    for (std::size_t i = 0; i < net.num_buses(); ++i) {
      CHECK(res.point.v[i] == doctest::Approx(std::abs(v[i])).epsilon(1e-8));
      CHECK(res.point.theta[i] == doctest::Approx(std::arg(v[i])).epsilon(1e-8));
    }
  }
}

TEST_CASE("voltage setpoints are held at controlled buses") {
  const auto net = oracle::load_fixture("case6ww");
  const auto res = solve_at_dc(net);
  for (std::size_t i = 0; i < 3; ++i) CHECK(res.point.v[i] == 0.5 * (net.buses()[i].v_min + net.buses()[i].v_max));
  CHECK(res.point.theta[net.slack()] == 0.0);
  const auto s = branch_apparent_flows(net, res.point);
  CHECK(res.point.s_branch == s);
}

TEST_CASE("newton divergence is reported with the last mismatch") {
  const auto base = oracle::load_fixture("case2");
  const auto net = base.with_loads({{1, 30.0, 10.0}});
  try {
    newton_pf(net, midpoint_setpoints(net, std::vector<double>{30.0}));
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK(e.last_mismatch() > 0.0);
  }
}

TEST_CASE("violation report") {
  const auto net = oracle::load_fixture("case3_triangle");
  OperatingPoint pt;
  pt.v = {1.10, 0.90, 1.0};
  pt.theta = {0.0, 0.0, 0.0};
  pt.p_g = {1.0, 0.5};
  pt.q_g = {5.0, -0.1};
  pt.s_branch = {0.0, 2.5, 1.0};
  const auto rep = violations(net, pt, 1.0);
  CHECK(rep.v_viol[0] == doctest::Approx(1.10 - net.buses()[0].v_max));
  CHECK(rep.v_viol[1] == doctest::Approx(net.buses()[1].v_min - 0.90));
  CHECK(rep.v_viol[2] == 0.0);
  CHECK(rep.q_viol[0] == doctest::Approx(5.0 - net.generators()[0].q_max));
  CHECK(rep.q_viol[1] == 0.0);
  CHECK(rep.s_viol[1] == doctest::Approx(0.5));
  REQUIRE(rep.cost_gap.has_value());
  CHECK(*rep.cost_gap == doctest::Approx(std::abs(generation_cost(net, pt.p_g) - 1.0)));
  CHECK_FALSE(violations(net, pt).cost_gap.has_value());
  pt.v.pop_back();
  CHECK_THROWS_AS(violations(net, pt), ContractViolation);
}

namespace {

Network two_bus(double x, double p_d, double q_d) {
  std::vector<Bus> buses{{1, 1.0, 1.0, BusKind::slack, 0, 0}, {2, 0.5, 1.5, BusKind::pq, 0, 0}};
  Branch br;
  br.to = 1;
  br.r = 0.0;
  br.x = x;
  br.s_max = 100.0;
  std::vector<Generator> gens{{0, 0, 0.0, 100.0, -100.0, 100.0, {0, 1, 0}}};
  return Network(100.0, buses, {br}, gens, {{1, p_d, q_d}});
}

}  // namespace

TEST_CASE("lossless line example") {
  Branch br;
  br.r = 0.0;
  br.x = 0.1;
  const auto f = branch_flow(br, 1.0, 1.0, 0.1, 0.0);
  CHECK(f.p_from == doctest::Approx(10.0 * std::sin(0.1)).epsilon(1e-14));
  CHECK(f.q_from == doctest::Approx(10.0 * (1.0 - std::cos(0.1))).epsilon(1e-12));
  const auto z = branch_flow(br, 1.0, 1.0, 0.3, 0.3);
  CHECK(z.p_from == 0.0);
  CHECK(z.q_from == 0.0);
  Branch lossy;
  lossy.r = 0.05;
  lossy.x = 0.1;
  const auto l = branch_flow(lossy, 1.01, 0.97, 0.2, -0.1);
  CHECK(l.p_from + l.p_to >= 0.0);
}

TEST_CASE("two-bus newton matches gauss-seidel") {
  const auto net = two_bus(0.1, 1.0, 0.0);
  const auto res = newton_pf(net, midpoint_setpoints(net, std::vector<double>{1.0}));
  const auto v = oracle::gauss_seidel(net, {1.0}, {1.0, 1.0}, 1e-14);
  CHECK(res.point.v[1] == doctest::Approx(std::abs(v[1])).epsilon(1e-8));
  CHECK(res.point.theta[1] == doctest::Approx(std::arg(v[1])).epsilon(1e-8));
  CHECK(res.point.p_g[0] == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("zero load gives the flat solution immediately") {
  std::vector<Bus> buses{{1, 1.0, 1.0, BusKind::slack, 0, 0},
                         {2, 1.0, 1.0, BusKind::pv, 0, 0},
                         {3, 0.9, 1.1, BusKind::pq, 0, 0}};
  std::vector<Branch> branches{{0, 1, 0.01, 0.1}, {1, 2, 0.02, 0.2}, {0, 2, 0.01, 0.1}};
  std::vector<Generator> gens{{0, 0, 0, 2, -1, 1, {0, 1, 0}}, {1, 1, 0, 2, -1, 1, {0, 1, 0}}};
  const Network net(100.0, buses, branches, gens, {});
  const auto res = newton_pf(net, midpoint_setpoints(net, std::vector<double>(2, 0.0)));
  CHECK(res.iterations <= 1);
  for (double th : res.point.theta) CHECK(th == 0.0);
  for (double v : res.point.v) CHECK(v == 1.0);
}

TEST_CASE("flat point of an unloaded shunt-free network has zero residual") {
  const auto net = two_bus(0.1, 0.0, 0.0);
  OperatingPoint pt{{0.0}, {0.0}, {1.0, 1.0}, {0.0, 0.0}, {}};
  CHECK(pf_residual(net, pt).max_abs() == 0.0);
}

TEST_CASE("load beyond the nose point diverges") {
  // Lossless 2-bus, unity slack voltage: the maximum transferable real power
  // at unity power factor is 1/(2x) = 0.5 p.u. for x = 1.
  const auto net = two_bus(1.0, 10.0, 0.0);
  CHECK_THROWS_AS(newton_pf(net, midpoint_setpoints(net, std::vector<double>{10.0})), DivergenceError);
}

TEST_CASE("warm start of a lossy network is not power-flow feasible") {
  const auto net = oracle::load_fixture("case6ww");
  const auto dc = solve_dc(net);
  CHECK(pf_residual(net, warm_start(dc, net)).max_abs() > 1e-3);
  CHECK(feasibility_distance(net, warm_start(dc, net)) > 1e-3);
}

TEST_CASE("feasibility distance arithmetic and monotonicity") {
  PfResidual r{{3e-4, 4e-4}, {0.0, 0.0}};
  CHECK(feasibility_distance(r) == doctest::Approx(3.5e-4).epsilon(1e-14));
  auto more = r;
  more.r_q[1] = 1e-4;
  CHECK(feasibility_distance(more) >= feasibility_distance(r));
}

TEST_CASE("residual conservation: total mismatch equals generation minus load minus losses") {
  const auto net = oracle::load_fixture("case14");
  const auto dc = solve_dc(net);
  auto pt = warm_start(dc, net);
  pt.v[3] = 1.03;
  pt.theta[5] -= 0.02;
  const auto r = pf_residual(net, pt);
  double total = 0.0;
  for (double x : r.r_p) total += x;
  double gen = 0.0;
  for (double p : pt.p_g) gen += p;
  double losses = 0.0;
  for (std::size_t k = 0; k < net.num_branches(); ++k) {
    const auto f = branch_flow(net, pt, k);
    losses += f.p_from + f.p_to;
  }
  for (std::size_t i = 0; i < net.num_buses(); ++i) losses += pt.v[i] * pt.v[i] * net.buses()[i].shunt_g;
  CHECK(total == doctest::Approx(gen - net.total_p_demand() - losses).epsilon(1e-10));
}

TEST_CASE("violations are zero strictly inside the boxes") {
  const auto net = oracle::load_fixture("case3_triangle");
  OperatingPoint pt{{0.5, 0.5}, {0.0, 0.0}, {1.0, 1.0, 1.0}, {0.0, 0.0, 0.0}, {0.1, 0.1, 0.1}};
  const auto rep = violations(net, pt);
  for (double v : rep.v_viol) CHECK(v == 0.0);
  for (double v : rep.q_viol) CHECK(v == 0.0);
  for (double v : rep.s_viol) CHECK(v == 0.0);
}
