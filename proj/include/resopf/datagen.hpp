#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "resopf/dc_opf.hpp"
#include "resopf/gnn.hpp"
#include "resopf/network.hpp"
#include "resopf/operating_point.hpp"
#include "resopf/sample.hpp"

namespace resopf::datagen {

struct PerturbSpec {
  double lo = 0.8;
  double hi = 1.2;
  bool per_load = true;  // false: one factor for the whole scenario
  std::size_t count = 1;
  std::uint64_t seed = 0;
};

/// Throws ConfigError unless 0 <= lo <= hi and count >= 1.
void validate(const PerturbSpec& spec);
/// Parses "lo:hi". Throws ConfigError.
std::pair<double, double> parse_range(std::string_view text);

/// Loads scaled by uniform draws in [lo, hi], p and q by the same factor.
/// Scenarios whose DC problem is not optimal are redrawn; more than
/// 10 x count draws is a GenerationError.
std::vector<Network> perturb(const Network& base, const PerturbSpec& spec);

enum class Provenance { newton_label, model_generated };
std::string to_string(Provenance p);

struct GeneratedSample {
  Network network;
  DcSolution dc;
  OperatingPoint predicted;
  double feasibility = 0.0;
  Provenance provenance = Provenance::model_generated;
};

/// DC solve, features, warm start, model, reconstruction. Throws FeatureError
/// when the DC problem is not optimal and GenerationError on a non-finite
/// prediction.
GeneratedSample generate_ac(const gnn::ModelParams& params, const Network& net);

/// Perturbed scenarios labelled by Newton power flow (at the DC dispatch) or
/// by a model. Newton-divergent draws are redrawn within the same budget.
std::vector<Sample> generate_samples(const Network& base, const PerturbSpec& spec, Provenance labels,
                                     const gnn::ModelParams* model = nullptr);

/// Hex SHA-256 of a byte string.
std::string sha256_hex(std::string_view bytes);

/// Write sample_NNNNN.json files plus manifest.json (file hashes, provenance,
/// perturbation settings). Returns the manifest.
nlohmann::json write_dataset(const std::vector<Sample>& samples, const std::filesystem::path& dir,
                             const PerturbSpec& spec, std::string_view base_name);

}  // namespace resopf::datagen
