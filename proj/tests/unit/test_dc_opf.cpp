#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "resopf/dc_opf.hpp"
#include "resopf/errors.hpp"

using namespace resopf;

TEST_CASE("two-bus dispatch is the load") {
  const auto net = oracle::load_fixture("case2");
  const auto sol = solve_dc(net);
  REQUIRE(sol.status == DcStatus::optimal);
  CHECK(sol.p_g[0] == doctest::Approx(1.0));
  CHECK(sol.objective == doctest::Approx(1.0));
  CHECK(sol.theta[0] == 0.0);
  CHECK(sol.theta[1] == doctest::Approx(-0.1));
  CHECK(sol.flow[0] == doctest::Approx(1.0));
}

TEST_CASE("quadratic costs equalize marginal cost") {
  const auto net = oracle::load_fixture("case3_quadratic");
  const auto sol = solve_dc(net);
  REQUIRE(sol.status == DcStatus::optimal);
  // 2*0.5*p0 + 1 = 2*1.0*p1 + 0.5 with p0 + p1 = 1.5
  CHECK(sol.p_g[0] == doctest::Approx(5.0 / 6.0).epsilon(1e-9));
  CHECK(sol.p_g[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-9));
}

TEST_CASE("solutions agree with the lattice oracle and the KKT check") {
  for (const auto* name : {"case2", "case3_triangle", "case6ww", "case3_congested", "case3_quadratic"}) {
    CAPTURE(name);
    const auto net = oracle::load_fixture(name);
    const auto sol = solve_dc(net);
    REQUIRE(sol.status == DcStatus::optimal);
    const auto ref = oracle::lattice_dc_opf(net, name == std::string("case6ww") ? 1e-2 : 1e-3);
    REQUIRE(ref.feasible);
    CHECK(std::abs(sol.objective - ref.objective) < 2e-3);
    CHECK(sol.objective <= ref.objective + 1e-9);
    const auto kkt = oracle::dc_kkt(net, sol.p_g);
    CHECK(kkt.stationarity < 1e-6);
    CHECK(kkt.primal < 1e-6);
    const auto flows = oracle::dc_flows(net, sol.p_g);
    for (std::size_t k = 0; k < flows.size(); ++k) CHECK(sol.flow[k] == doctest::Approx(flows[k]).epsilon(1e-9));
  }
}

TEST_CASE("binding line limit on the congested fixture") {
  const auto net = oracle::load_fixture("case3_congested");
  const auto sol = solve_dc(net);
  REQUIRE(sol.status == DcStatus::optimal);
  double max_loading = 0.0;
  for (std::size_t k = 0; k < sol.flow.size(); ++k)
    max_loading = std::max(max_loading, std::abs(sol.flow[k]) / net.branches()[k].s_max);
  CHECK(max_loading == doctest::Approx(1.0).epsilon(1e-9));
  // Congestion forces the expensive unit on.
  CHECK(sol.p_g[1] > 1e-6);
}

TEST_CASE("transformers with phase shift are honoured") {
  const auto net = oracle::load_fixture("case57");
  const auto sol = solve_dc(net);
  REQUIRE(sol.status == DcStatus::optimal);
  const auto flows = oracle::dc_flows(net, sol.p_g);
  for (std::size_t k = 0; k < flows.size(); ++k) CHECK(sol.flow[k] == doctest::Approx(flows[k]).epsilon(1e-8));
  const auto kkt = oracle::dc_kkt(net, sol.p_g);
  CHECK(kkt.stationarity < 1e-6);
}

TEST_CASE("insufficient capacity is certified infeasible") {
  const auto base = oracle::load_fixture("case2");
  std::vector<Load> loads{{1, 5.0, 0.0}};
  const auto net = base.with_loads(loads);
  const auto sol = solve_dc(net);
  CHECK(sol.status == DcStatus::infeasible);
  CHECK_FALSE(sol.certificate.empty());
  CHECK_THROWS_AS(extract_dc_features(sol, net), FeatureError);
}

TEST_CASE("line limit infeasibility names the line") {
  const auto base = oracle::load_fixture("case2");
  const auto net = base.with_loads({{1, 1.9, 0.0}});
  auto branches = std::vector<Branch>(net.branches().begin(), net.branches().end());
  branches[0].s_max = 1.0;
  const Network tight(net.base_mva(), std::vector<Bus>(net.buses().begin(), net.buses().end()), branches,
                      std::vector<Generator>(net.generators().begin(), net.generators().end()),
                      std::vector<Load>(net.loads().begin(), net.loads().end()));
  const auto sol = solve_dc(tight);
  REQUIRE(sol.status == DcStatus::infeasible);
  bool names_flow = false;
  for (const auto& c : sol.certificate) names_flow |= c.find("flow") != std::string::npos;
  CHECK(names_flow);
}

TEST_CASE("repeated solves are bit-identical") {
  const auto net = oracle::load_fixture("case14");
  const auto a = solve_dc(net);
  const auto b = solve_dc(net);
  CHECK(a.p_g == b.p_g);
  CHECK(a.theta == b.theta);
  CHECK(a.flow == b.flow);
}

TEST_CASE("features and warm start") {
  const auto net = oracle::load_fixture("case6ww");
  const auto sol = solve_dc(net);
  const auto f = extract_dc_features(sol, net);
  REQUIRE(f.node.size() == net.num_buses());
  CHECK(f.flat.size() == net.num_buses() + net.num_generators() + net.num_branches());
  double inj = 0.0;
  for (const auto& n : f.node) inj += n[1];
  CHECK(inj == doctest::Approx(0.0).epsilon(1e-9));
  const auto x0 = warm_start(sol, net);
  CHECK(x0.v == std::vector<double>(net.num_buses(), 1.0));
  CHECK(x0.q_g == std::vector<double>(net.num_generators(), 0.0));
  CHECK(x0.p_g == sol.p_g);
  CHECK(x0.theta == sol.theta);
  for (std::size_t k = 0; k < sol.flow.size(); ++k) CHECK(x0.s_branch[k] == std::abs(sol.flow[k]));
}
