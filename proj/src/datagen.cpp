#include "resopf/datagen.hpp"

#include <charconv>
#include <cmath>
#include <memory>
#include <random>

#include <openssl/evp.h>

#include "resopf/ac_physics.hpp"
#include "resopf/case_io.hpp"
#include "resopf/errors.hpp"

namespace resopf::datagen {

using nlohmann::json;

namespace {

double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);
}

// Draws scenarios until `accept` has taken `count` of them.
template <typename Accept>
void draw(const Network& base, const PerturbSpec& spec, Accept&& accept) {
  validate(spec);
  std::mt19937_64 rng(spec.seed);
  const std::size_t budget = 10 * spec.count;
  std::size_t taken = 0;
  for (std::size_t tries = 0; taken < spec.count; ++tries) {
    if (tries == budget)
      throw GenerationError("rejection budget exhausted: " + std::to_string(taken) + " of " +
                            std::to_string(spec.count) + " scenarios after " + std::to_string(budget) + " draws");
    std::vector<Load> loads(base.loads().begin(), base.loads().end());
    const double global = spec.lo + (spec.hi - spec.lo) * unit_uniform(rng);
    for (auto& l : loads) {
      const double k = spec.per_load ? spec.lo + (spec.hi - spec.lo) * unit_uniform(rng) : global;
      l.p_d *= k;
      l.q_d *= k;
    }
    if (accept(base.with_loads(std::move(loads)))) ++taken;
  }
}

OperatingPoint finite_prediction(const gnn::ModelParams& params, const Sample& s) {
  auto pred = gnn::predict(params, s).point;
  for (const auto* f : {&pred.v, &pred.theta, &pred.p_g, &pred.q_g, &pred.s_branch})
    for (double x : *f)
      if (!std::isfinite(x)) throw GenerationError("model produced a non-finite prediction");
  return pred;
}

std::string sample_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "sample_%05zu.json", i);
  return buf;
}

}  // namespace

void validate(const PerturbSpec& s) {
  if (!(s.lo >= 0.0) || !(s.hi >= s.lo) || !std::isfinite(s.hi))
    throw ConfigError("load scale range must satisfy 0 <= lo <= hi");
  if (s.count == 0) throw ConfigError("count must be at least 1");
}

std::pair<double, double> parse_range(std::string_view text) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) throw ConfigError("range must look like lo:hi, got '" + std::string(text) + "'");
  auto num = [&](std::string_view part) {
    double x = 0.0;
    const auto r = std::from_chars(part.data(), part.data() + part.size(), x);
    if (r.ec != std::errc() || r.ptr != part.data() + part.size())
      throw ConfigError("range bound '" + std::string(part) + "' is not a number");
    return x;
  };
  return {num(text.substr(0, colon)), num(text.substr(colon + 1))};
}

std::vector<Network> perturb(const Network& base, const PerturbSpec& spec) {
  std::vector<Network> out;
  draw(base, spec, [&](Network net) {
    if (solve_dc(net).status != DcStatus::optimal) return false;
    out.push_back(std::move(net));
    return true;
  });
  return out;
}

std::string to_string(Provenance p) {
  return p == Provenance::newton_label ? "newton_label" : "model_generated";
}

GeneratedSample generate_ac(const gnn::ModelParams& params, const Network& net) {
  const auto s = make_sample(net);
  auto pred = finite_prediction(params, s);
  const double feas = feasibility_distance(net, pred);
  return {net, s.dc, std::move(pred), feas, Provenance::model_generated};
}

std::vector<Sample> generate_samples(const Network& base, const PerturbSpec& spec, Provenance labels,
                                     const gnn::ModelParams* model) {
  if (labels == Provenance::model_generated && !model) throw ConfigError("model labels need a checkpoint");
  std::vector<Sample> out;
  draw(base, spec, [&](Network net) {
    std::optional<Sample> s;
    try {
      s = make_sample(std::move(net), std::nullopt, to_string(labels), sample_name(out.size()));
    } catch (const FeatureError&) {
      return false;
    }
    if (labels == Provenance::newton_label) {
      try {
        s->label = newton_pf(s->network, midpoint_setpoints(s->network, s->dc.p_g)).point;
      } catch (const DivergenceError&) {
        return false;
      }
    } else {
      s->label = finite_prediction(*model, *s);
    }
    out.push_back(std::move(*s));
    return true;
  });
  return out;
}

std::string sha256_hex(std::string_view bytes) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), md, &len) != 1)
    throw Error("SHA-256 computation failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

json write_dataset(const std::vector<Sample>& samples, const std::filesystem::path& dir, const PerturbSpec& spec,
                   std::string_view base_name) {
  std::filesystem::create_directories(dir);
  json files = json::array();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    const auto name = s.name.empty() ? sample_name(i) : s.name;
    const auto text = serialize_case(s.network, s.label ? &*s.label : nullptr, s.provenance);
    write_text_file(dir / name, text);
    files.push_back({{"file", name}, {"sha256", sha256_hex(text)}, {"provenance", s.provenance}});
  }
  json manifest{{"base", std::string(base_name)},
                {"count", samples.size()},
                {"perturbation",
                 {{"law", spec.per_load ? "per-load uniform scaling" : "global uniform scaling"},
                  {"lo", spec.lo},
                  {"hi", spec.hi},
                  {"seed", spec.seed},
                  {"reactive", "scaled with the active factor"},
                  {"stand_in", true},
                  {"note", "default range is a stand-in; the reference dataset's perturbation law is not published"}}},
                {"files", std::move(files)}};
  write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
  return manifest;
}

}  // namespace resopf::datagen
