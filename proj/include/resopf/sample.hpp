#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "resopf/dc_opf.hpp"
#include "resopf/network.hpp"
#include "resopf/operating_point.hpp"

namespace resopf {

/// One scenario prepared for learning: its DC optimum, the warm start built
/// from it, and the AC label when known.
struct Sample {
  Network network;
  DcSolution dc;
  OperatingPoint warm;
  std::optional<OperatingPoint> label;
  std::string provenance;
  std::string name;
};

/// Solve the DC problem and assemble the warm start. Throws FeatureError when
/// the DC problem is not optimal.
Sample make_sample(Network net, std::optional<OperatingPoint> label = std::nullopt,
                   std::string provenance = {}, std::string name = {});

/// Every `*.json` scenario in `dir` except manifest.json and splits.json, in
/// file-name order.
std::vector<Sample> load_samples(const std::filesystem::path& dir);

}  // namespace resopf
