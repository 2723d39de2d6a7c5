#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "resopf/autodiff.hpp"
#include "resopf/operating_point.hpp"
#include "resopf/sample.hpp"

namespace resopf::gnn {

enum class Mode { residual, direct };
std::string to_string(Mode m);
/// Throws ConfigError for anything but "residual" or "direct".
Mode mode_from_string(std::string_view s);

enum class NodeKind : std::size_t { bus, generator, load };
enum class EdgeType : std::size_t { ac_line, transformer, generator_link, load_link };
inline constexpr std::size_t num_node_kinds = 3;
inline constexpr std::size_t num_edge_types = 4;
std::string to_string(NodeKind k);
std::string to_string(EdgeType t);

/// Raw input widths, DC features included.
///   bus        [v_min, v_max, slack, pv, pq, shunt_g, shunt_b, theta_dc, p_inj_dc]
///   generator  [p_min, p_max, q_min, q_max, c2, c1, c0, theta_dc(bus), p_g_dc]
///   load       [p_d, q_d, theta_dc(bus), -p_d]
///   branch     [r, x, b_charge, tap, shift, s_max, flow_dc]   (flow sign follows direction)
///   links      [flow_dc]   (p_g_dc from generator to bus, -p_d from load to bus)
inline constexpr std::array<std::size_t, num_node_kinds> node_feature_width{9, 9, 4};
inline constexpr std::array<std::size_t, num_edge_types> edge_feature_width{7, 7, 1, 1};
/// Leading branch columns fed to the geometric attention bias.
inline constexpr std::size_t geo_width = 6;

/// Predicted quantities, in output-column order.
enum class Quantity : std::size_t { v, theta, p_g, q_g, s };
inline constexpr std::size_t num_quantities = 5;
std::string to_string(Quantity q);

/// Correction added to a warm start. `tail` optionally carries the rounding
/// error of each entry (per quantity, empty or full length) so that an exact
/// difference survives reconstruction.
struct ResidualVector {
  std::vector<double> dv;
  std::vector<double> dtheta;
  std::vector<double> dp_g;
  std::vector<double> dq_g;
  std::vector<double> ds;
  std::array<std::vector<double>, 5> tail{};

  bool operator==(const ResidualVector&) const = default;
};

/// Elementwise x0 + delta (no clamping), compensated where a tail is present.
/// Throws ContractViolation on shape mismatch.
OperatingPoint reconstruct(const OperatingPoint& x0, const ResidualVector& delta);

/// label - x0 as a rounded difference plus its exact error term, so that
/// reconstruct(x0, residual_between(x0, label)) == label.
ResidualVector residual_between(const OperatingPoint& x0, const OperatingPoint& label);

/// One scenario as a heterogeneous graph with raw (unscaled) features.
/// Node indices are local: buses first, then generators, then loads.
struct EncodedGraph {
  std::size_t num_buses = 0;
  std::size_t num_generators = 0;
  std::size_t num_loads = 0;
  std::size_t num_branches = 0;
  std::size_t slack = 0;
  std::array<ad::Tensor, num_node_kinds> node_x;
  /// Directed edges per type; every connection appears in both directions,
  /// forward at even positions and reverse right after it.
  std::array<ad::Tensor, num_edge_types> edge_x;
  std::array<std::vector<std::size_t>, num_edge_types> edge_src;
  std::array<std::vector<std::size_t>, num_edge_types> edge_dst;
  std::vector<double> y_dc;  // [theta | p_g | flow]
  std::vector<std::size_t> gen_bus;
  std::vector<std::size_t> branch_from;
  std::vector<std::size_t> branch_to;
  std::vector<EdgeType> branch_type;
  std::vector<std::size_t> branch_edge;  // forward edge position within its type
  OperatingPoint warm;
};

EncodedGraph encode_graph(const Sample& s);

struct ColumnStats {
  std::vector<double> mean;
  std::vector<double> scale;  // standard deviation, 1 where degenerate
  bool operator==(const ColumnStats&) const = default;
};

/// Everything the model needs to put inputs and outputs on a unit scale.
/// Fitted on the training split only.
struct Normalizer {
  std::array<ColumnStats, num_node_kinds> node;
  std::array<ColumnStats, num_edge_types> edge;
  std::array<double, 3> ydc_scale{1.0, 1.0, 1.0};  // theta, p_g, flow groups
  /// Output affine map per quantity: prediction = scale * head output, with
  /// the head bias initialised at mean / scale.
  std::array<double, num_quantities> out_mean{};
  std::array<double, num_quantities> out_scale{1.0, 1.0, 1.0, 1.0, 1.0};
  /// Label spread per quantity, used to weigh supervised errors.
  std::array<double, num_quantities> label_scale{1.0, 1.0, 1.0, 1.0, 1.0};

  bool operator==(const Normalizer&) const = default;
};

/// Identity input scaling, unit output scales.
Normalizer identity_normalizer();
/// Requires labels on every sample.
Normalizer fit_normalizer(std::span<const Sample* const> samples, Mode mode);

struct ModelConfig {
  std::size_t hidden = 64;
  std::size_t key = 32;
  std::size_t layers = 4;
  std::size_t ydc_width = 0;  // 0: size to the data at initialisation
  Mode mode = Mode::residual;
  std::uint64_t seed = 0;

  bool operator==(const ModelConfig&) const = default;
};

/// All learnable tensors, by name, in a fixed order.
struct ModelParams {
  ModelConfig config;
  Normalizer norm;
  std::vector<std::string> names;
  std::vector<ad::Tensor> tensors;

  std::size_t index(std::string_view name) const;  // throws ContractViolation
  ad::Tensor& at(std::string_view name) { return tensors[index(name)]; }
  const ad::Tensor& at(std::string_view name) const { return tensors[index(name)]; }
  std::size_t parameter_count() const;
  bool operator==(const ModelParams&) const = default;
};

/// Seeded uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases,
/// unit layer-norm gains, head output bias at out_mean / out_scale.
/// Throws ConfigError when ydc_width, hidden, or key is zero.
ModelParams init_params(const ModelConfig& config, const Normalizer& norm);

/// Set the last head layer to zero so every prediction is x0 in residual mode.
void zero_head(ModelParams& params);

/// Disjoint union of graphs with scaled features. Pooling, softmax and
/// every loss sum stay inside each graph.
struct GraphBatch {
  std::size_t num_graphs = 0;
  std::size_t ydc_width = 0;
  std::array<ad::Tensor, num_node_kinds> node_x;
  std::array<std::vector<std::size_t>, num_node_kinds> node_graph;
  std::array<std::size_t, num_node_kinds> kind_offset{};  // global row of each kind block
  std::size_t num_nodes = 0;
  std::array<ad::Tensor, num_edge_types> edge_x;
  std::array<ad::Tensor, num_edge_types> edge_geo;
  std::array<ad::Tensor, num_edge_types> edge_flow;
  std::array<std::vector<std::size_t>, num_edge_types> edge_src;  // global node rows
  std::array<std::vector<std::size_t>, num_edge_types> edge_dst;
  ad::Tensor y;  // num_graphs x ydc_width
  std::vector<std::size_t> gen_bus;  // batch bus row of each generator
  std::vector<std::size_t> branch_from;
  std::vector<std::size_t> branch_to;
  std::vector<std::size_t> branch_edge;  // row in [ac_line edges ; transformer edges]
  std::vector<std::size_t> branch_graph;
  ad::Tensor slack_mask;  // per bus, 0 at slack buses
  std::array<ad::Tensor, num_quantities> warm;  // columns: v, theta (per bus), p, q (per gen), s (per branch)
  std::vector<std::size_t> buses_per_graph;
  std::vector<std::size_t> gens_per_graph;
  std::vector<std::size_t> branches_per_graph;
};

/// Throws ContractViolation when a graph's y_dc exceeds `ydc_width` or a
/// feature width disagrees with the normalizer.
GraphBatch make_batch(std::span<const EncodedGraph* const> graphs, const Normalizer& norm,
                      std::size_t ydc_width);

/// Parameters placed on a tape, aligned with ModelParams::tensors.
struct ParamVars {
  const ModelParams* params = nullptr;
  std::vector<ad::Var> vars;
  ad::Var operator[](std::string_view name) const { return vars[params->index(name)]; }
};

ParamVars bind(ad::Tape& tape, const ModelParams& params, bool requires_grad);

struct ForwardVars {
  ad::Var h0;  // encoded node embeddings, global row order
  ad::Var h;   // after the last attention layer
  ad::Var z;   // pooled bus embedding per graph
  ad::Var alpha_last;  // attention weights of the last layer (all types stacked)
  std::array<ad::Var, num_quantities> value;  // predicted x-hat columns
  std::array<ad::Var, num_quantities> delta;  // x-hat minus warm start
};

ForwardVars forward(ad::Tape& tape, const ParamVars& pv, const GraphBatch& batch);

struct Prediction {
  OperatingPoint point;
  ResidualVector delta;
};

/// Inference without gradients.
std::vector<Prediction> predict(const ModelParams& params, std::span<const Sample* const> samples);
Prediction predict(const ModelParams& params, const Sample& sample);

nlohmann::json checkpoint_to_json(const ModelParams& params);
/// Throws ParseError for malformed documents and ContractViolation when a
/// stored tensor's shape disagrees with the configuration.
ModelParams checkpoint_from_json(const nlohmann::json& j);
void save_checkpoint(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_checkpoint(const std::filesystem::path& path);

}  // namespace resopf::gnn
