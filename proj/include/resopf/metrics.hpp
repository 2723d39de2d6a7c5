#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "resopf/gnn.hpp"
#include "resopf/operating_point.hpp"
#include "resopf/sample.hpp"

namespace resopf::train {

/// Sorted absolute errors with their cumulative proportions.
struct Ecdf {
  std::vector<double> value;
  std::vector<double> proportion;  // nondecreasing, last entry 1
};

Ecdf make_ecdf(std::vector<double> abs_errors);
/// Linear-interpolation quantile of a sample (q in [0, 1]). 0 for an empty sample.
double quantile(std::vector<double> xs, double q);

struct MetricsReport {
  std::size_t num_samples = 0;
  std::array<double, gnn::num_quantities> mse{};  // v, theta, p_g, q_g, s
  double mse_bus_voltage = 0.0;  // v and theta entries pooled
  double mse_bus_power = 0.0;    // generator p and q summed per bus, buses with generators
  double mse_branch = 0.0;       // branch |S|
  double feasibility_pred = 0.0;   // mean feasibility distance of the predictions
  double feasibility_warm = 0.0;   // same for the DC warm starts
  double feasibility_label = 0.0;  // same for the labels
  double cost_gap = 0.0;           // mean |C(p) - C(p*)| / |C(p*)|
  double v_violation = 0.0;        // mean summed bound excess per sample
  double q_violation = 0.0;
  double s_violation = 0.0;
  std::vector<double> power_errors;  // |p - p*| and |q - q*| per generator
  std::vector<double> angle_errors;  // |theta - theta*| per non-slack bus
  double dc_ms = 0.0;      // mean wall time per sample
  double model_ms = 0.0;
  double newton_ms = 0.0;
};

/// Metrics of given predictions against the samples' labels.
MetricsReport evaluate_points(std::span<const Sample* const> samples, std::span<const OperatingPoint> predictions);

/// Full pipeline: DC solve, model, reconstruction, plus a Newton solve for
/// the timing comparison. Labels are required.
MetricsReport evaluate(const gnn::ModelParams& params, std::span<const Sample* const> samples);

nlohmann::json to_json(const MetricsReport& m, bool include_timing = true);

/// report.json, mse.csv, ecdf_power.csv, ecdf_angle.csv, timing.csv.
void write_report(const MetricsReport& m, const std::filesystem::path& dir);

}  // namespace resopf::train
