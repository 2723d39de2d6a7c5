#include <numbers>

#include "doctest.h"
#include "oracles.hpp"
#include "resopf/errors.hpp"
#include "resopf/network.hpp"

using namespace resopf;

namespace {

Network triangle() {
  std::vector<Bus> buses{{1, 0.95, 1.05, BusKind::slack, 0, 0},
                         {2, 0.95, 1.05, BusKind::pv, 0, 0},
                         {3, 0.95, 1.05, BusKind::pq, 0, 0.05}};
  Branch a{0, 1, 0.01, 0.1, 0.02};
  Branch b{1, 2, 0.01, 0.1, 0.02};
  Branch c{0, 2, 0.01, 0.1, 0.02};
  std::vector<Generator> gens{{0, 0, 0, 3, -2, 2, {0, 1, 0}}, {1, 1, 0, 3, -2, 2, {0, 2, 0}}};
  return Network(100.0, buses, {a, b, c}, gens, {{2, 1.5, 0.3}});
}

}  // namespace

TEST_CASE("fixture networks load with expected sizes") {
  const auto n6 = oracle::load_fixture("case6ww");
  CHECK(n6.num_buses() == 6);
  CHECK(n6.num_branches() == 11);
  CHECK(n6.num_generators() == 3);
  const auto n57 = oracle::load_fixture("case57");
  CHECK(n57.num_buses() == 57);
  CHECK(n57.num_branches() == 80);
  CHECK(n57.num_generators() == 7);
  CHECK(n57.buses()[n57.slack()].kind == BusKind::slack);
}

TEST_CASE("constructor rejects broken invariants") {
  const auto ok = triangle();
  auto buses = std::vector<Bus>(ok.buses().begin(), ok.buses().end());
  auto branches = std::vector<Branch>(ok.branches().begin(), ok.branches().end());
  auto gens = std::vector<Generator>(ok.generators().begin(), ok.generators().end());
  auto loads = std::vector<Load>(ok.loads().begin(), ok.loads().end());

  SUBCASE("duplicate bus id") {
    auto b = buses;
    b[2].id = 1;
    CHECK_THROWS_AS(Network(100, b, branches, gens, loads), ValidationError);
  }
  SUBCASE("inverted voltage band") {
    auto b = buses;
    b[1].v_min = 1.1;
    CHECK_THROWS_AS(Network(100, b, branches, gens, loads), ValidationError);
  }
  SUBCASE("two slack buses") {
    auto b = buses;
    b[1].kind = BusKind::slack;
    CHECK_THROWS_AS(Network(100, b, branches, gens, loads), ValidationError);
  }
  SUBCASE("zero reactance") {
    auto br = branches;
    br[0].x = 0.0;
    CHECK_THROWS_AS(Network(100, buses, br, gens, loads), ValidationError);
  }
  SUBCASE("line with off-nominal tap") {
    auto br = branches;
    br[0].tap = 1.05;
    CHECK_THROWS_AS(Network(100, buses, br, gens, loads), ValidationError);
    br[0].kind = BranchKind::transformer;
    CHECK_NOTHROW(Network(100, buses, br, gens, loads));
  }
  SUBCASE("negative quadratic cost") {
    auto g = gens;
    g[0].cost.c2 = -1.0;
    CHECK_THROWS_AS(Network(100, buses, branches, g, loads), ValidationError);
  }
  SUBCASE("disconnected graph") {
    std::vector<Branch> br{branches[0]};
    CHECK_THROWS_AS(Network(100, buses, br, gens, loads), ValidationError);
  }
}

TEST_CASE("admittance matrix matches branch-by-branch assembly") {
  for (const auto* name : {"case3_triangle", "case6ww", "case14", "case57"}) {
    CAPTURE(name);
    const auto net = oracle::load_fixture(name);
    const auto y = build_admittance(net);
    const auto ref = oracle::admittance(net);
    CHECK((y.G - ref.real()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((y.B - ref.imag()).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("admittance rows sum to shunt and charging for lines without taps") {
  const auto net = triangle();
  const auto y = build_admittance(net);
  // Row sums of Y equal the total shunt element at each bus.
  CHECK(y.G.row(0).sum() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(y.B.row(0).sum() == doctest::Approx(0.02).epsilon(1e-12));
  CHECK(y.B.row(2).sum() == doctest::Approx(0.02 + 0.05).epsilon(1e-12));
}

TEST_CASE("demand and capacity aggregates") {
  const auto net = triangle();
  CHECK(net.total_p_demand() == doctest::Approx(1.5));
  CHECK(net.total_p_capacity() == doctest::Approx(6.0));
  const auto pd = net.bus_p_demand();
  CHECK(pd == std::vector<double>{0.0, 0.0, 1.5});
  CHECK(net.bus_index(3) == 2);
  CHECK_THROWS_AS(net.bus_index(99), ValidationError);
}

TEST_CASE("removing elements") {
  const auto net = triangle();
  SUBCASE("a triangle edge keeps the grid connected") {
    const auto v = remove_element(net, {ElementKind::branch, 0});
    CHECK(v.num_branches() == 2);
    CHECK(v.branches()[0] == net.branches()[1]);
  }
  SUBCASE("a bridge is rejected") {
    const auto v = remove_element(net, {ElementKind::branch, 0});
    CHECK_THROWS_AS(remove_element(v, {ElementKind::branch, 0}), ContingencyRejected);
  }
  SUBCASE("removing the PV generator demotes its bus") {
    const auto v = remove_element(net, {ElementKind::generator, 1});
    CHECK(v.num_generators() == 1);
    CHECK(v.buses()[1].kind == BusKind::pq);
  }
  SUBCASE("the slack generator cannot be removed") {
    CHECK_THROWS_AS(remove_element(net, {ElementKind::generator, 0}), ContingencyRejected);
  }
  SUBCASE("out-of-range index") {
    CHECK_THROWS(remove_element(net, {ElementKind::branch, 7}));
  }
}

TEST_CASE("every single-line removal on case6ww stays connected") {
  const auto net = oracle::load_fixture("case6ww");
  for (std::size_t k = 0; k < net.num_branches(); ++k) {
    const auto v = remove_element(net, {ElementKind::branch, k});
    CHECK(v.num_branches() == net.num_branches() - 1);
    CHECK(is_connected(v.num_buses(), v.branches()));
  }
}

TEST_CASE("series admittance") {
  Branch br;
  br.r = 0.0;
  br.x = 0.5;
  CHECK(br.g() == 0.0);
  CHECK(br.b() == doctest::Approx(-2.0));
  CHECK(to_string(BusKind::pv) == "pv");
  CHECK(to_string(BranchKind::transformer) == "transformer");
}
