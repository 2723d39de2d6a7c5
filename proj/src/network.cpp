#include "resopf/network.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <set>

#include "resopf/errors.hpp"
#include "resopf/operating_point.hpp"

namespace resopf {

namespace {

std::string where(const char* what, std::size_t i) {
  return std::string(what) + "[" + std::to_string(i) + "]";
}

}  // namespace

std::string to_string(BusKind kind) {
  switch (kind) {
    case BusKind::slack:
      return "slack";
    case BusKind::pv:
      return "pv";
    case BusKind::pq:
      return "pq";
  }
  return "?";
}

std::string to_string(BranchKind kind) {
  return kind == BranchKind::ac_line ? "ac_line" : "transformer";
}

bool is_connected(std::size_t num_buses, std::span<const Branch> branches) {
  if (num_buses == 0) return false;
  std::vector<std::vector<std::size_t>> adj(num_buses);
  for (const auto& br : branches) {
    adj[br.from].push_back(br.to);
    adj[br.to].push_back(br.from);
  }
  std::vector<bool> seen(num_buses, false);
  std::queue<std::size_t> frontier;
  frontier.push(0);
  seen[0] = true;
  std::size_t reached = 1;
  while (!frontier.empty()) {
    auto u = frontier.front();
    frontier.pop();
    for (auto w : adj[u]) {
      if (!seen[w]) {
        seen[w] = true;
        ++reached;
        frontier.push(w);
      }
    }
  }
  return reached == num_buses;
}

Network::Network(double base_mva, std::vector<Bus> buses, std::vector<Branch> branches,
                 std::vector<Generator> generators, std::vector<Load> loads)
    : base_mva_(base_mva),
      buses_(std::move(buses)),
      branches_(std::move(branches)),
      generators_(std::move(generators)),
      loads_(std::move(loads)) {
  if (!(base_mva_ > 0.0)) throw ValidationError("base_mva must be positive");
  if (buses_.empty()) throw ValidationError("network has no buses");

  std::set<int> ids;
  std::size_t slacks = 0;
  for (std::size_t i = 0; i < buses_.size(); ++i) {
    const auto& bus = buses_[i];
    if (!ids.insert(bus.id).second)
      throw ValidationError("duplicate bus id " + std::to_string(bus.id));
    if (!(bus.v_min > 0.0)) throw ValidationError(where("buses", i) + ": v_min must be > 0");
    if (!(bus.v_min <= bus.v_max)) throw ValidationError(where("buses", i) + ": v_min > v_max");
    if (bus.kind == BusKind::slack) {
      ++slacks;
      slack_ = i;
    }
  }
  if (slacks != 1)
    throw ValidationError("expected exactly one slack bus, found " + std::to_string(slacks));

  const auto nb = buses_.size();
  for (std::size_t k = 0; k < branches_.size(); ++k) {
    const auto& br = branches_[k];
    const auto w = where("branches", k);
    if (br.from >= nb || br.to >= nb) throw ValidationError(w + ": bus position out of range");
    if (br.from == br.to) throw ValidationError(w + ": self loop");
    if (br.x == 0.0) throw ValidationError(w + ": x must be nonzero");
    if (!(br.s_max > 0.0)) throw ValidationError(w + ": s_max must be > 0");
    if (!(br.tap > 0.0)) throw ValidationError(w + ": tap must be > 0");
    if (br.kind == BranchKind::ac_line && (br.tap != 1.0 || br.shift != 0.0))
      throw ValidationError(w + ": ac_line requires tap = 1 and shift = 0");
  }

  std::set<int> gen_ids;
  for (std::size_t g = 0; g < generators_.size(); ++g) {
    const auto& gen = generators_[g];
    const auto w = where("generators", g);
    if (!gen_ids.insert(gen.id).second)
      throw ValidationError("duplicate generator id " + std::to_string(gen.id));
    if (gen.bus >= nb) throw ValidationError(w + ": bus position out of range");
    if (!(gen.p_min <= gen.p_max)) throw ValidationError(w + ": p_min > p_max");
    if (!(gen.q_min <= gen.q_max)) throw ValidationError(w + ": q_min > q_max");
    if (!(gen.cost.c2 >= 0.0)) throw ValidationError(w + ": cost c2 must be >= 0");
  }
  for (std::size_t l = 0; l < loads_.size(); ++l) {
    if (loads_[l].bus >= nb) throw ValidationError(where("loads", l) + ": bus position out of range");
  }
  if (!is_connected(nb, branches_)) throw ValidationError("network graph is not connected");
}

std::size_t Network::bus_index(int id) const {
  for (std::size_t i = 0; i < buses_.size(); ++i) {
    if (buses_[i].id == id) return i;
  }
  throw ValidationError("unknown bus id " + std::to_string(id));
}

std::vector<double> Network::bus_p_demand() const {
  std::vector<double> out(buses_.size(), 0.0);
  for (const auto& l : loads_) out[l.bus] += l.p_d;
  return out;
}

std::vector<double> Network::bus_q_demand() const {
  std::vector<double> out(buses_.size(), 0.0);
  for (const auto& l : loads_) out[l.bus] += l.q_d;
  return out;
}

double Network::total_p_demand() const {
  double total = 0.0;
  for (const auto& l : loads_) total += l.p_d;
  return total;
}

double Network::total_p_capacity() const {
  double total = 0.0;
  for (const auto& g : generators_) total += g.p_max;
  return total;
}

std::vector<std::vector<std::size_t>> Network::generators_at_buses() const {
  std::vector<std::vector<std::size_t>> out(buses_.size());
  for (std::size_t g = 0; g < generators_.size(); ++g) out[generators_[g].bus].push_back(g);
  return out;
}

Network Network::with_loads(std::vector<Load> loads) const {
  return Network(base_mva_, buses_, branches_, generators_, std::move(loads));
}

AdmittanceMatrix build_admittance(const Network& net) {
  const auto nb = static_cast<Eigen::Index>(net.num_buses());
  Eigen::MatrixXcd Y = Eigen::MatrixXcd::Zero(nb, nb);
  using cd = std::complex<double>;
  for (const auto& br : net.branches()) {
    const cd ys = br.series_admittance();
    const cd half_charge(0.0, br.b_charge / 2.0);
    const cd t = std::polar(br.tap, br.shift);
    const auto f = static_cast<Eigen::Index>(br.from);
    const auto to = static_cast<Eigen::Index>(br.to);
    Y(f, f) += (ys + half_charge) / (br.tap * br.tap);
    Y(to, to) += ys + half_charge;
    Y(f, to) += -ys / std::conj(t);
    Y(to, f) += -ys / t;
  }
  for (Eigen::Index i = 0; i < nb; ++i) {
    const auto& bus = net.buses()[static_cast<std::size_t>(i)];
    Y(i, i) += cd(bus.shunt_g, bus.shunt_b);
  }
  return {Y.real(), Y.imag()};
}

Network remove_element(const Network& net, ElementRef element) {
  std::vector<Bus> buses(net.buses().begin(), net.buses().end());
  std::vector<Branch> branches(net.branches().begin(), net.branches().end());
  std::vector<Generator> gens(net.generators().begin(), net.generators().end());
  std::vector<Load> loads(net.loads().begin(), net.loads().end());

  if (element.kind == ElementKind::branch) {
    if (element.index >= branches.size())
      throw ContingencyRejected("branch " + std::to_string(element.index) + " does not exist");
    branches.erase(branches.begin() + static_cast<std::ptrdiff_t>(element.index));
    if (!is_connected(buses.size(), branches))
      throw ContingencyRejected("removing branch " + std::to_string(element.index) +
                                " disconnects the network");
  } else {
    if (element.index >= gens.size())
      throw ContingencyRejected("generator " + std::to_string(element.index) + " does not exist");
    const auto bus = gens[element.index].bus;
    gens.erase(gens.begin() + static_cast<std::ptrdiff_t>(element.index));
    const bool bus_still_served =
        std::any_of(gens.begin(), gens.end(), [bus](const Generator& g) { return g.bus == bus; });
    if (!bus_still_served) {
      if (buses[bus].kind == BusKind::slack)
        throw ContingencyRejected("removing generator " + std::to_string(element.index) +
                                  " leaves the slack bus without generation");
      buses[bus].kind = BusKind::pq;
    }
  }

  Network out(net.base_mva(), std::move(buses), std::move(branches), std::move(gens),
              std::move(loads));
  if (out.total_p_capacity() < out.total_p_demand())
    throw ContingencyRejected("remaining capacity is below total demand");
  return out;
}

void check_dimensions(const Network& net, const OperatingPoint& pt) {
  auto expect = [](std::size_t got, std::size_t want, const char* name) {
    if (got != want)
      throw ContractViolation(std::string("operating point ") + name + " has length " +
                              std::to_string(got) + ", expected " + std::to_string(want));
  };
  expect(pt.p_g.size(), net.num_generators(), "p_g");
  expect(pt.q_g.size(), net.num_generators(), "q_g");
  expect(pt.v.size(), net.num_buses(), "v");
  expect(pt.theta.size(), net.num_buses(), "theta");
  if (pt.has_branch_flows()) expect(pt.s_branch.size(), net.num_branches(), "s_branch");
}

}  // namespace resopf
