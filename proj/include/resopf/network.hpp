#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace resopf {

enum class BusKind { slack, pv, pq };
enum class BranchKind { ac_line, transformer };

struct Bus {
  int id = 0;
  double v_min = 0.94;
  double v_max = 1.06;
  BusKind kind = BusKind::pq;
  double shunt_g = 0.0;
  double shunt_b = 0.0;

  bool operator==(const Bus&) const = default;
};

/// Pi-model branch. `from`/`to` are positions in Network::buses(), not ids.
struct Branch {
  std::size_t from = 0;
  std::size_t to = 0;
  double r = 0.0;
  double x = 0.1;
  double b_charge = 0.0;
  double tap = 1.0;
  double shift = 0.0;
  double s_max = 1.0;
  double theta_min = -3.141592653589793;
  double theta_max = 3.141592653589793;
  BranchKind kind = BranchKind::ac_line;

  /// g + jb = 1 / (r + jx)
  std::complex<double> series_admittance() const { return 1.0 / std::complex<double>(r, x); }
  double g() const { return series_admittance().real(); }
  double b() const { return series_admittance().imag(); }

  bool operator==(const Branch&) const = default;
};

struct CostCurve {
  double c2 = 0.0;
  double c1 = 0.0;
  double c0 = 0.0;

  double operator()(double p) const { return (c2 * p + c1) * p + c0; }
  bool operator==(const CostCurve&) const = default;
};

struct Generator {
  int id = 0;
  std::size_t bus = 0;  // bus position
  double p_min = 0.0;
  double p_max = 0.0;
  double q_min = 0.0;
  double q_max = 0.0;
  CostCurve cost;

  bool operator==(const Generator&) const = default;
};

struct Load {
  std::size_t bus = 0;  // bus position
  double p_d = 0.0;
  double q_d = 0.0;

  bool operator==(const Load&) const = default;
};

/// Immutable per-unit grid description. The constructor validates every
/// invariant and throws ValidationError on the first violation.
class Network {
 public:
  Network(double base_mva, std::vector<Bus> buses, std::vector<Branch> branches,
          std::vector<Generator> generators, std::vector<Load> loads);

  double base_mva() const { return base_mva_; }
  std::span<const Bus> buses() const { return buses_; }
  std::span<const Branch> branches() const { return branches_; }
  std::span<const Generator> generators() const { return generators_; }
  std::span<const Load> loads() const { return loads_; }

  std::size_t num_buses() const { return buses_.size(); }
  std::size_t num_branches() const { return branches_.size(); }
  std::size_t num_generators() const { return generators_.size(); }
  std::size_t num_loads() const { return loads_.size(); }

  std::size_t slack() const { return slack_; }
  /// Position of the bus with external id `id`; throws ValidationError.
  std::size_t bus_index(int id) const;

  /// Aggregated demand per bus.
  std::vector<double> bus_p_demand() const;
  std::vector<double> bus_q_demand() const;
  double total_p_demand() const;
  double total_p_capacity() const;

  /// Generator positions attached to each bus.
  std::vector<std::vector<std::size_t>> generators_at_buses() const;

  /// Copy with a different load vector (topology unchanged).
  Network with_loads(std::vector<Load> loads) const;

  bool operator==(const Network&) const = default;

 private:
  double base_mva_;
  std::vector<Bus> buses_;
  std::vector<Branch> branches_;
  std::vector<Generator> generators_;
  std::vector<Load> loads_;
  std::size_t slack_ = 0;
};

/// True iff the graph on (buses, branches) is connected.
bool is_connected(std::size_t num_buses, std::span<const Branch> branches);

/// Dense bus admittance Y = G + jB.
struct AdmittanceMatrix {
  Eigen::MatrixXd G;
  Eigen::MatrixXd B;
};

/// Standard pi-model Y-bus with taps, phase shifts, line charging and bus shunts.
AdmittanceMatrix build_admittance(const Network& net);

enum class ElementKind { branch, generator };

struct ElementRef {
  ElementKind kind;
  std::size_t index;
};

/// N-1 variant without the referenced element. Throws ContingencyRejected when
/// the remainder is disconnected, lacks capacity, or leaves the slack bus
/// without a generator.
Network remove_element(const Network& net, ElementRef element);

std::string to_string(BusKind kind);
std::string to_string(BranchKind kind);

}  // namespace resopf
