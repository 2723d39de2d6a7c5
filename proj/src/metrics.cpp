#include "resopf/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include "resopf/ac_physics.hpp"
#include "resopf/case_io.hpp"
#include "resopf/dc_opf.hpp"
#include "resopf/errors.hpp"

namespace resopf::train {

using nlohmann::json;

namespace {

struct Mean {
  double sum = 0.0;
  std::size_t n = 0;
  void add(double x) {
    sum += x;
    ++n;
  }
  double value() const { return n ? sum / static_cast<double>(n) : 0.0; }
};

std::vector<double> bus_totals(const Network& net, const std::vector<double>& per_gen) {
  std::vector<double> out(net.num_buses(), 0.0);
  const auto gens = net.generators();
  for (std::size_t g = 0; g < gens.size(); ++g) out[gens[g].bus] += per_gen[g];
  return out;
}

double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double x) {
  std::ostringstream s;
  s.precision(17);
  s << x;
  return s.str();
}

void write_ecdf(const std::filesystem::path& path, const std::vector<double>& errors) {
  const auto e = make_ecdf(errors);
  std::string text = "abs_error,cumulative_proportion\n";
  for (std::size_t i = 0; i < e.value.size(); ++i) text += fmt(e.value[i]) + "," + fmt(e.proportion[i]) + "\n";
  write_text_file(path, text);
}

}  // namespace

Ecdf make_ecdf(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  Ecdf e;
  const double n = static_cast<double>(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i + 1 < xs.size() && xs[i + 1] == xs[i]) continue;  // one row per distinct value
    e.value.push_back(xs[i]);
    e.proportion.push_back(static_cast<double>(i + 1) / n);
  }
  return e;
}

double quantile(std::vector<double> xs, double q) {
  if (xs.empty()) return 0.0;
  std::sort(xs.begin(), xs.end());
  const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(xs.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, xs.size() - 1);
  return xs[lo] + (pos - static_cast<double>(lo)) * (xs[hi] - xs[lo]);
}

MetricsReport evaluate_points(std::span<const Sample* const> samples, std::span<const OperatingPoint> predictions) {
  if (samples.size() != predictions.size())
    throw ContractViolation("evaluate: " + std::to_string(samples.size()) + " samples but " +
                            std::to_string(predictions.size()) + " predictions");
  MetricsReport m;
  m.num_samples = samples.size();
  std::array<Mean, gnn::num_quantities> mse;
  Mean volt, power, feas_p, feas_w, feas_l, gap, vv, qv, sv;
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const auto& s = *samples[k];
    if (!s.label) throw ConfigError("evaluate: sample " + s.name + " has no AC label");
    const auto& net = s.network;
    const auto& lab = *s.label;
    const auto& pred = predictions[k];
    check_dimensions(net, pred);
    const auto lab_s = lab.has_branch_flows() ? lab.s_branch : branch_apparent_flows(net, lab);
    const auto pred_s = pred.has_branch_flows() ? pred.s_branch : branch_apparent_flows(net, pred);
    auto sq = [](double a, double b) { return (a - b) * (a - b); };
    for (std::size_t i = 0; i < net.num_buses(); ++i) {
      mse[0].add(sq(pred.v[i], lab.v[i]));
      mse[1].add(sq(pred.theta[i], lab.theta[i]));
      volt.add(sq(pred.v[i], lab.v[i]));
      volt.add(sq(pred.theta[i], lab.theta[i]));
      if (i != net.slack()) m.angle_errors.push_back(std::abs(pred.theta[i] - lab.theta[i]));
    }
    for (std::size_t g = 0; g < net.num_generators(); ++g) {
      mse[2].add(sq(pred.p_g[g], lab.p_g[g]));
      mse[3].add(sq(pred.q_g[g], lab.q_g[g]));
      m.power_errors.push_back(std::abs(pred.p_g[g] - lab.p_g[g]));
      m.power_errors.push_back(std::abs(pred.q_g[g] - lab.q_g[g]));
    }
    const auto at = net.generators_at_buses();
    const auto pp = bus_totals(net, pred.p_g), pl = bus_totals(net, lab.p_g);
    const auto qp = bus_totals(net, pred.q_g), ql = bus_totals(net, lab.q_g);
    for (std::size_t i = 0; i < net.num_buses(); ++i) {
      if (at[i].empty()) continue;
      power.add(sq(pp[i], pl[i]));
      power.add(sq(qp[i], ql[i]));
    }
    for (std::size_t b = 0; b < net.num_branches(); ++b) mse[4].add(sq(pred_s[b], lab_s[b]));
    feas_p.add(feasibility_distance(net, pred));
    feas_w.add(feasibility_distance(net, s.warm));
    feas_l.add(feasibility_distance(net, lab));
    const double c_star = generation_cost(net, lab.p_g);
    gap.add(std::abs(generation_cost(net, pred.p_g) - c_star) / std::max(std::abs(c_star), 1e-12));
    auto with_s = pred;
    with_s.s_branch = pred_s;
    const auto viol = violations(net, with_s);
    auto total = [](const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); };
    vv.add(total(viol.v_viol));
    qv.add(total(viol.q_viol));
    sv.add(total(viol.s_viol));
  }
  for (std::size_t q = 0; q < gnn::num_quantities; ++q) m.mse[q] = mse[q].value();
  m.mse_bus_voltage = volt.value();
  m.mse_bus_power = power.value();
  m.mse_branch = m.mse[4];
  m.feasibility_pred = feas_p.value();
  m.feasibility_warm = feas_w.value();
  m.feasibility_label = feas_l.value();
  m.cost_gap = gap.value();
  m.v_violation = vv.value();
  m.q_violation = qv.value();
  m.s_violation = sv.value();
  return m;
}

MetricsReport evaluate(const gnn::ModelParams& params, std::span<const Sample* const> samples) {
  std::vector<OperatingPoint> pred;
  pred.reserve(samples.size());
  Mean dc, model, newton;
  for (const auto* s : samples) {
    auto t0 = std::chrono::steady_clock::now();
    const auto sol = solve_dc(s->network);
    dc.add(ms_since(t0));
    t0 = std::chrono::steady_clock::now();
    pred.push_back(gnn::predict(params, *s).point);
    model.add(ms_since(t0));
    if (sol.status == DcStatus::optimal) {
      t0 = std::chrono::steady_clock::now();
      try {
        (void)newton_pf(s->network, midpoint_setpoints(s->network, sol.p_g));
      } catch (const DivergenceError&) {
      }
      newton.add(ms_since(t0));
    }
  }
  auto m = evaluate_points(samples, pred);
  m.dc_ms = dc.value();
  m.model_ms = model.value();
  m.newton_ms = newton.value();
  return m;
}

json to_json(const MetricsReport& m, bool include_timing) {
  json j{{"num_samples", m.num_samples},
         {"mse",
          {{"v", m.mse[0]},
           {"theta", m.mse[1]},
           {"p_g", m.mse[2]},
           {"q_g", m.mse[3]},
           {"s", m.mse[4]},
           {"bus_voltage", m.mse_bus_voltage},
           {"bus_power", m.mse_bus_power},
           {"branch", m.mse_branch}}},
         {"feasibility_distance",
          {{"predicted", m.feasibility_pred}, {"warm_start", m.feasibility_warm}, {"label", m.feasibility_label}}},
         {"cost_gap", m.cost_gap},
         {"violations", {{"v", m.v_violation}, {"q_g", m.q_violation}, {"s", m.s_violation}}},
         {"definitions",
          {{"bus_voltage", "MSE over v and theta entries of every bus"},
           {"bus_power", "MSE over generator p and q summed per bus, buses with generators only"},
           {"branch", "MSE over from-side apparent power |S| per branch"},
           {"feasibility_distance", "mean over samples of the per-bus mean of sqrt(r_p^2 + r_q^2), p.u."},
           {"cost_gap", "mean |C(p) - C(p*)| / |C(p*)|"}}}};
  if (include_timing) j["timing_ms"] = {{"dc", m.dc_ms}, {"model", m.model_ms}, {"newton", m.newton_ms}};
  return j;
}

void write_report(const MetricsReport& m, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_text_file(dir / "report.json", to_json(m).dump(2) + "\n");
  std::string mse = "quantity,mse\n";
  const char* names[] = {"v", "theta", "p_g", "q_g", "s"};
  for (std::size_t q = 0; q < gnn::num_quantities; ++q) mse += std::string(names[q]) + "," + fmt(m.mse[q]) + "\n";
  mse += "bus_voltage," + fmt(m.mse_bus_voltage) + "\n";
  mse += "bus_power," + fmt(m.mse_bus_power) + "\n";
  mse += "branch," + fmt(m.mse_branch) + "\n";
  write_text_file(dir / "mse.csv", mse);
  write_ecdf(dir / "ecdf_power.csv", m.power_errors);
  write_ecdf(dir / "ecdf_angle.csv", m.angle_errors);
  write_text_file(dir / "timing.csv", "stage,mean_ms\ndc," + fmt(m.dc_ms) + "\nmodel," + fmt(m.model_ms) +
                                          "\nnewton," + fmt(m.newton_ms) + "\n");
}

}  // namespace resopf::train
