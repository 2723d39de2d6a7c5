#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "resopf/autodiff.hpp"
#include "resopf/gnn.hpp"
#include "resopf/sample.hpp"

namespace resopf::train {

struct LossWeights {
  double alpha_v = 1.0;
  double alpha_theta = 1.0;
  double alpha_q = 1.0;
  double alpha_p = 1.0;
  double alpha_s = 1.0;
  double pf = 0.1;
  double box = 0.1;
  double obj = 0.01;
  double res = 1e-4;

  bool operator==(const LossWeights&) const = default;
};

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 200;
  std::size_t patience = 20;
  double clip = 1.0;
  std::uint64_t seed = 0;
  double train_fraction = 0.8;
  double val_fraction = 0.1;
  double test_fraction = 0.1;
  gnn::ModelConfig model;  // model.mode selects residual or direct
  LossWeights weights;

  bool operator==(const TrainConfig&) const = default;
};

/// Throws ConfigError on negative weights, fractions that do not sum to 1,
/// zero patience/batch size, or non-positive learning rate/clip.
void validate(const TrainConfig& c);
nlohmann::json to_json(const TrainConfig& c);
/// Missing keys keep their defaults; unknown keys are a ConfigError.
TrainConfig config_from_json(const nlohmann::json& j);

/// Loss constants for a batch, laid out like GraphBatch rows.
struct LossBatch {
  std::size_t num_graphs = 0;
  bool has_labels = false;
  std::array<ad::Tensor, gnn::num_quantities> label;
  std::vector<std::size_t> y_row, y_col;  // admittance nonzeros (batch bus rows)
  ad::Tensor y_g, y_b;
  ad::Tensor p_d, q_d;  // per bus
  std::vector<std::size_t> gen_bus;
  ad::Tensor v_min, v_max, q_min, q_max, s_max;
  ad::Tensor c2, c1, c0;
  std::vector<std::size_t> gen_graph;
  ad::Tensor label_cost;      // per graph
  ad::Tensor label_cost_inv;  // 1 / max(|label_cost|, 1)
};

/// Labels are required unless `allow_unlabeled` (generation mode), in which
/// case the supervised and cost terms are left out.
LossBatch make_loss_batch(std::span<const Sample* const> samples, bool allow_unlabeled = false);

struct LossVars {
  ad::Var total, sup, pf, box, obj, res;
};

/// Five-term objective averaged over the graphs of the batch. Supervised
/// errors are divided by each quantity's label spread and the cost gap by |C(p*)| (floored at 1).
LossVars loss(ad::Tape& tape, const gnn::ForwardVars& fw, const LossBatch& lb, const gnn::Normalizer& norm,
              const LossWeights& w);

struct LossBreakdown {
  double total = 0.0, sup = 0.0, pf = 0.0, box = 0.0, obj = 0.0, res = 0.0;
  bool operator==(const LossBreakdown&) const = default;
};

/// Loss of a fixed model on a set of samples, averaged per graph.
LossBreakdown evaluate_loss(const gnn::ModelParams& params, std::span<const Sample* const> samples,
                            const LossWeights& w, std::size_t batch_size = 64);

struct EpochRecord {
  std::size_t epoch = 0;
  LossBreakdown train;
  LossBreakdown val;
  double grad_norm = 0.0;  // mean pre-clipping global norm
  double seconds = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  double best_val = 0.0;
  bool diverged = false;
  std::string stop_reason;
  std::size_t parameter_count = 0;
  double seconds = 0.0;
};

/// `include_timing = false` drops wall-clock fields, leaving what a fixed
/// seed reproduces exactly.
nlohmann::json to_json(const TrainReport& r, bool include_timing = true);

struct Split {
  std::vector<std::size_t> train, val, test;
  bool operator==(const Split&) const = default;
};

/// Seeded permutation cut by the configured fractions. Throws ConfigError if
/// any part would be empty.
Split make_split(std::size_t n, const TrainConfig& c);
nlohmann::json to_json(const Split& s, std::span<const std::string> names = {});
Split split_from_json(const nlohmann::json& j);

struct TrainResult {
  gnn::ModelParams model;
  TrainReport report;
};

/// Adam with global-norm clipping and early stopping on the validation total.
/// Returns the best-validation parameters. A non-finite loss or gradient stops
/// training, flags the report and returns the last finite best state.
TrainResult fit(std::span<const Sample* const> train_set, std::span<const Sample* const> val_set,
                const TrainConfig& config, gnn::ModelParams init);

/// Split, fit feature scaling on the training part, initialise and fit.
/// Throws ConfigError for fewer than 10 samples or missing labels.
TrainResult train(std::span<const Sample> data, const TrainConfig& config, Split* split_out = nullptr);

/// Global L2 norm over a list of gradient tensors, and in-place clipping.
double global_norm(std::span<const ad::Tensor> grads);
void clip_to_norm(std::span<ad::Tensor> grads, double max_norm);

}  // namespace resopf::train
