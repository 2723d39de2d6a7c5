#include "resopf/sample.hpp"

#include <algorithm>

#include "resopf/case_io.hpp"
#include "resopf/errors.hpp"

namespace resopf {

Sample make_sample(Network net, std::optional<OperatingPoint> label, std::string provenance,
                   std::string name) {
  auto dc = solve_dc(net);
  if (dc.status != DcStatus::optimal)
    throw FeatureError("scenario " + (name.empty() ? std::string("<unnamed>") : name) +
                       ": DC problem is " + to_string(dc.status));
  auto warm = warm_start(dc, net);
  if (label) check_dimensions(net, *label);
  return Sample{std::move(net), std::move(dc), std::move(warm), std::move(label),
                std::move(provenance), std::move(name)};
}

std::vector<Sample> load_samples(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw Error("not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    const auto name = e.path().filename().string();
    if (e.path().extension() != ".json" || name == "manifest.json" || name == "splits.json") continue;
    files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<Sample> out;
  out.reserve(files.size());
  for (const auto& f : files) {
    auto sc = load_case(f);
    out.push_back(make_sample(std::move(sc.network), std::move(sc.labels), std::move(sc.provenance),
                              f.filename().string()));
  }
  return out;
}

}  // namespace resopf
