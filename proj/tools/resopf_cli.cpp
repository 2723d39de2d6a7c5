#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "resopf/ac_physics.hpp"
#include "resopf/case_io.hpp"
#include "resopf/datagen.hpp"
#include "resopf/dc_opf.hpp"
#include "resopf/errors.hpp"
#include "resopf/gnn.hpp"
#include "resopf/metrics.hpp"
#include "resopf/training.hpp"

using namespace resopf;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void emit(const json& j, const std::string& out) {
  const auto text = j.dump(2) + "\n";
  if (out.empty()) std::cout << text;
  else write_text_file(out, text);
}

json dc_json(const DcSolution& s) {
  return {{"status", to_string(s.status)}, {"objective", s.objective}, {"p_g", s.p_g},
          {"theta", s.theta},             {"flow", s.flow},           {"certificate", s.certificate},
          {"iterations", s.iterations}};
}

int solve_dc_cmd(const std::string& case_path, const std::string& out) {
  const auto sc = load_case(case_path);
  const auto sol = solve_dc(sc.network);
  emit(dc_json(sol), out);
  return sol.status == DcStatus::optimal ? 0 : 3;
}

int check_cmd(const std::string& case_path, const std::string& point_path) {
  const auto sc = load_case(case_path);
  const auto doc = json::parse(read_text_file(point_path));
  const auto pt = point_from_json(doc.contains("labels_ac") ? doc["labels_ac"] : doc, "point");
  check_dimensions(sc.network, pt);
  const auto r = pf_residual(sc.network, pt);
  const auto v = violations(sc.network, pt);
  emit({{"residual", {{"max_abs", r.max_abs()}, {"r_p", r.r_p}, {"r_q", r.r_q}}},
        {"violations", {{"v", v.v_viol}, {"q_g", v.q_viol}, {"s", v.s_viol}}},
        {"feasibility_distance", feasibility_distance(sc.network, pt)},
        {"cost", generation_cost(sc.network, pt.p_g)}},
       "");
  return 0;
}

int import_cmd(const std::string& in, const std::string& out) {
  const auto r = import_opfdata(read_text_file(in));
  for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
  const auto text = serialize_case(r.scenario.network, r.scenario.labels ? &*r.scenario.labels : nullptr,
                                   r.scenario.provenance);
  if (out.empty()) std::cout << text;
  else write_text_file(out, text);
  return 0;
}

struct GenArgs {
  std::string base, range = "0.8:1.2", labels = "newton", ckpt, out;
  std::size_t count = 100;
  std::uint64_t seed = 0;
  bool global = false;
};

int gen_cmd(const GenArgs& a) {
  const auto sc = load_case(a.base);
  datagen::PerturbSpec spec;
  std::tie(spec.lo, spec.hi) = datagen::parse_range(a.range);
  spec.count = a.count;
  spec.seed = a.seed;
  spec.per_load = !a.global;
  std::optional<gnn::ModelParams> model;
  auto prov = datagen::Provenance::newton_label;
  if (a.labels == "model") {
    if (a.ckpt.empty()) throw ConfigError("--labels model needs --ckpt");
    model = gnn::load_checkpoint(a.ckpt);
    prov = datagen::Provenance::model_generated;
  } else if (a.labels != "newton") {
    throw ConfigError("--labels must be newton or model");
  }
  const auto samples = datagen::generate_samples(sc.network, spec, prov, model ? &*model : nullptr);
  datagen::write_dataset(samples, a.out, spec, fs::path(a.base).filename().string());
  std::cerr << "wrote " << samples.size() << " samples to " << a.out << "\n";
  return 0;
}

std::vector<const Sample*> select(const std::vector<Sample>& data, const std::vector<std::size_t>& idx) {
  std::vector<const Sample*> out;
  for (auto i : idx) {
    if (i >= data.size()) throw ConfigError("split index " + std::to_string(i) + " outside the dataset");
    out.push_back(&data[i]);
  }
  return out;
}

struct TrainArgs {
  std::string data, config, mode, out, init;
};

int train_cmd(const TrainArgs& a) {
  train::TrainConfig cfg;
  if (!a.config.empty()) cfg = train::config_from_json(json::parse(read_text_file(a.config)));
  if (!a.mode.empty()) cfg.model.mode = gnn::mode_from_string(a.mode);
  const auto data = load_samples(a.data);
  train::Split split;
  train::TrainResult result = [&] {
    if (a.init.empty()) return train::train(data, cfg, &split);
    split = train::make_split(data.size(), cfg);
    auto init = gnn::load_checkpoint(a.init);
    return train::fit(select(data, split.train), select(data, split.val), cfg, std::move(init));
  }();
  gnn::save_checkpoint(result.model, a.out);
  const fs::path stem = fs::path(a.out).replace_extension();
  std::vector<std::string> names;
  for (const auto& s : data) names.push_back(s.name);
  write_text_file(stem.string() + ".splits.json", train::to_json(split, names).dump(2) + "\n");
  json report = train::to_json(result.report);
  report["config"] = train::to_json(cfg);
  write_text_file(stem.string() + ".report.json", report.dump(2) + "\n");
  std::cerr << "best epoch " << result.report.best_epoch << " val " << result.report.best_val << " ("
            << result.report.stop_reason << ")\n";
  return result.report.diverged ? 4 : 0;
}

int eval_cmd(const std::string& ckpt, const std::string& data_dir, const std::string& report,
             const std::string& splits, const std::string& part) {
  const auto params = gnn::load_checkpoint(ckpt);
  const auto data = load_samples(data_dir);
  std::vector<const Sample*> chosen;
  if (splits.empty()) {
    for (const auto& s : data) chosen.push_back(&s);
  } else {
    const auto sp = train::split_from_json(json::parse(read_text_file(splits)));
    chosen = select(data, part == "train" ? sp.train : part == "val" ? sp.val : sp.test);
  }
  const auto m = train::evaluate(params, chosen);
  train::write_report(m, report);
  std::cout << train::to_json(m).dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Residual AC-OPF toolkit"};
  app.require_subcommand(1);

  std::string case_path, out, point_path;
  auto* dc = app.add_subcommand("solve-dc", "solve the DC-OPF of a scenario");
  dc->add_option("case", case_path, "scenario JSON")->required()->check(CLI::ExistingFile);
  dc->add_option("--out", out, "write the solution here instead of stdout");

  auto* chk = app.add_subcommand("check", "power-flow residuals and limit violations of a point");
  chk->add_option("case", case_path, "scenario JSON")->required()->check(CLI::ExistingFile);
  chk->add_option("point", point_path, "operating point JSON (or a scenario with labels_ac)")
      ->required()
      ->check(CLI::ExistingFile);

  std::string in;
  auto* imp = app.add_subcommand("import-opfdata", "convert a native OPFData record to the scenario schema");
  imp->add_option("record", in, "OPFData JSON record")->required()->check(CLI::ExistingFile);
  imp->add_option("--out", out, "output scenario path (default stdout)");

  GenArgs g;
  auto* gen = app.add_subcommand("gen-data", "perturbed scenarios with Newton or model labels");
  gen->add_option("--base", g.base, "base scenario")->required()->check(CLI::ExistingFile);
  gen->add_option("--count", g.count, "number of scenarios");
  gen->add_option("--range", g.range, "load scale range lo:hi");
  gen->add_option("--seed", g.seed, "random seed");
  gen->add_option("--labels", g.labels, "newton or model");
  gen->add_option("--ckpt", g.ckpt, "checkpoint for model labels");
  gen->add_flag("--global-scaling", g.global, "one factor per scenario instead of per load");
  gen->add_option("--out", g.out, "output directory")->required();

  TrainArgs t;
  auto* tr = app.add_subcommand("train", "train a model on a dataset directory");
  tr->add_option("--data", t.data, "dataset directory")->required()->check(CLI::ExistingDirectory);
  tr->add_option("--config", t.config, "training config JSON")->check(CLI::ExistingFile);
  tr->add_option("--mode", t.mode, "residual or direct (overrides the config)");
  tr->add_option("--init", t.init, "start from this checkpoint (fine-tuning)")->check(CLI::ExistingFile);
  tr->add_option("--out", t.out, "checkpoint path")->required();

  std::string ckpt, data_dir, report, splits, part = "test";
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
  ev->add_option("--ckpt", ckpt, "checkpoint")->required()->check(CLI::ExistingFile);
  ev->add_option("--data", data_dir, "dataset directory")->required()->check(CLI::ExistingDirectory);
  ev->add_option("--report", report, "report directory")->required();
  ev->add_option("--splits", splits, "splits file written by train")->check(CLI::ExistingFile);
  ev->add_option("--part", part, "train, val or test")->check(CLI::IsMember({"train", "val", "test"}));

  CLI11_PARSE(app, argc, argv);
  try {
    if (*dc) return solve_dc_cmd(case_path, out);
    if (*chk) return check_cmd(case_path, point_path);
    if (*imp) return import_cmd(in, out);
    if (*gen) return gen_cmd(g);
    if (*tr) return train_cmd(t);
    if (*ev) return eval_cmd(ckpt, data_dir, report, splits, part);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
