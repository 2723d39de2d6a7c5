#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "resopf/network.hpp"
#include "resopf/operating_point.hpp"

namespace resopf {

/// One scenario document: the grid plus optional AC labels.
struct Scenario {
  Network network;
  std::optional<OperatingPoint> labels;
  std::string provenance;  // empty when the document carries none
};

/// Parse a scenario document. Throws ParseError for missing or ill-typed
/// fields and ValidationError for documents that break model invariants.
Scenario parse_case(std::string_view json_text);
Scenario load_case(const std::filesystem::path& path);

nlohmann::json case_to_json(const Network& net, const OperatingPoint* labels = nullptr,
                            std::string_view provenance = {});
std::string serialize_case(const Network& net, const OperatingPoint* labels = nullptr,
                           std::string_view provenance = {});

nlohmann::json point_to_json(const OperatingPoint& pt);
OperatingPoint point_from_json(const nlohmann::json& j, std::string_view context = "point");

struct ImportResult {
  Scenario scenario;
  std::vector<std::string> warnings;
};

/// Convert one native OPFData record (grid/solution/metadata layout) into the
/// scenario schema. Unknown fields are skipped and reported in `warnings`.
ImportResult import_opfdata(std::string_view json_text);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace resopf
