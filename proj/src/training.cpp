#include "resopf/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <random>
#include <set>

#include "resopf/ac_physics.hpp"
#include "resopf/errors.hpp"
#include "resopf/network.hpp"

namespace resopf::train {

using ad::Tape;
using ad::Tensor;
using ad::Var;
using nlohmann::json;
namespace q = gnn;

namespace {

double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);
}

// Fisher-Yates driven by raw generator output, independent of the standard
// library's distribution implementations.
void shuffle(std::vector<std::size_t>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(unit_uniform(rng) * static_cast<double>(i));
    std::swap(v[i - 1], v[std::min(j, i - 1)]);
  }
}

Tensor column(const std::vector<double>& v) { return Tensor(v.size(), 1, v); }

bool finite(double x) { return std::isfinite(x); }

LossBreakdown read(const LossVars& l) {
  return {l.total.value().data[0], l.sup.value().data[0], l.pf.value().data[0],
          l.box.value().data[0],   l.obj.value().data[0], l.res.value().data[0]};
}

void accumulate(LossBreakdown& acc, const LossBreakdown& x, double w) {
  acc.total += w * x.total;
  acc.sup += w * x.sup;
  acc.pf += w * x.pf;
  acc.box += w * x.box;
  acc.obj += w * x.obj;
  acc.res += w * x.res;
}

LossBreakdown scaled(LossBreakdown x, double s) {
  LossBreakdown out;
  accumulate(out, x, s);
  return out;
}

json to_json(const LossBreakdown& b) {
  return {{"total", b.total}, {"sup", b.sup}, {"pf", b.pf}, {"box", b.box}, {"obj", b.obj}, {"res", b.res}};
}

struct PreparedBatch {
  gnn::GraphBatch graph;
  LossBatch loss;
};

PreparedBatch prepare(std::span<const Sample* const> samples, std::span<const gnn::EncodedGraph* const> graphs,
                      const gnn::ModelParams& params) {
  return {gnn::make_batch(graphs, params.norm, params.config.ydc_width), make_loss_batch(samples)};
}

}  // namespace

void validate(const TrainConfig& c) {
  if (!(c.learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (c.batch_size == 0) throw ConfigError("batch_size must be at least 1");
  if (c.patience == 0) throw ConfigError("patience must be at least 1");
  if (!(c.clip > 0.0)) throw ConfigError("clip must be positive");
  for (double f : {c.train_fraction, c.val_fraction, c.test_fraction})
    if (f < 0.0) throw ConfigError("split fractions must be non-negative");
  if (std::abs(c.train_fraction + c.val_fraction + c.test_fraction - 1.0) > 1e-9)
    throw ConfigError("split fractions must sum to 1");
  const auto& w = c.weights;
  for (double x : {w.alpha_v, w.alpha_theta, w.alpha_q, w.alpha_p, w.alpha_s, w.pf, w.box, w.obj, w.res})
    if (!(x >= 0.0)) throw ConfigError("loss weights must be non-negative");
}

json to_json(const TrainConfig& c) {
  const auto& w = c.weights;
  return {{"learning_rate", c.learning_rate},
          {"batch_size", c.batch_size},
          {"max_epochs", c.max_epochs},
          {"patience", c.patience},
          {"clip", c.clip},
          {"seed", c.seed},
          {"train_fraction", c.train_fraction},
          {"val_fraction", c.val_fraction},
          {"test_fraction", c.test_fraction},
          {"model",
           {{"hidden", c.model.hidden},
            {"key", c.model.key},
            {"layers", c.model.layers},
            {"ydc_width", c.model.ydc_width},
            {"mode", gnn::to_string(c.model.mode)}}},
          {"weights",
           {{"alpha_v", w.alpha_v},
            {"alpha_theta", w.alpha_theta},
            {"alpha_q", w.alpha_q},
            {"alpha_p", w.alpha_p},
            {"alpha_s", w.alpha_s},
            {"pf", w.pf},
            {"box", w.box},
            {"obj", w.obj},
            {"res", w.res}}}};
}

TrainConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("training config must be a JSON object");
  TrainConfig c;
  const std::set<std::string> top{"learning_rate", "batch_size",    "max_epochs",   "patience",
                                  "clip",          "seed",          "train_fraction", "val_fraction",
                                  "test_fraction", "model",         "weights"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!top.contains(it.key())) throw ConfigError("unknown training config key '" + it.key() + "'");
  auto num = [](const json& o, const char* key, auto& dst, const std::string& ctx) {
    if (!o.contains(key)) return;
    try {
      dst = o.at(key).get<std::decay_t<decltype(dst)>>();
    } catch (const json::exception&) {
      throw ConfigError(ctx + key + ": ill-typed");
    }
  };
  num(j, "learning_rate", c.learning_rate, "");
  num(j, "batch_size", c.batch_size, "");
  num(j, "max_epochs", c.max_epochs, "");
  num(j, "patience", c.patience, "");
  num(j, "clip", c.clip, "");
  num(j, "seed", c.seed, "");
  num(j, "train_fraction", c.train_fraction, "");
  num(j, "val_fraction", c.val_fraction, "");
  num(j, "test_fraction", c.test_fraction, "");
  if (j.contains("model")) {
    const auto& m = j["model"];
    const std::set<std::string> keys{"hidden", "key", "layers", "ydc_width", "mode"};
    for (auto it = m.begin(); it != m.end(); ++it)
      if (!keys.contains(it.key())) throw ConfigError("unknown model config key '" + it.key() + "'");
    num(m, "hidden", c.model.hidden, "model.");
    num(m, "key", c.model.key, "model.");
    num(m, "layers", c.model.layers, "model.");
    num(m, "ydc_width", c.model.ydc_width, "model.");
    if (m.contains("mode")) {
      if (!m["mode"].is_string()) throw ConfigError("model.mode: ill-typed");
      c.model.mode = gnn::mode_from_string(m["mode"].get<std::string>());
    }
  }
  if (j.contains("weights")) {
    const auto& w = j["weights"];
    const std::set<std::string> keys{"alpha_v", "alpha_theta", "alpha_q", "alpha_p", "alpha_s",
                                     "pf",      "box",         "obj",     "res"};
    for (auto it = w.begin(); it != w.end(); ++it)
      if (!keys.contains(it.key())) throw ConfigError("unknown loss weight '" + it.key() + "'");
    num(w, "alpha_v", c.weights.alpha_v, "weights.");
    num(w, "alpha_theta", c.weights.alpha_theta, "weights.");
    num(w, "alpha_q", c.weights.alpha_q, "weights.");
    num(w, "alpha_p", c.weights.alpha_p, "weights.");
    num(w, "alpha_s", c.weights.alpha_s, "weights.");
    num(w, "pf", c.weights.pf, "weights.");
    num(w, "box", c.weights.box, "weights.");
    num(w, "obj", c.weights.obj, "weights.");
    num(w, "res", c.weights.res, "weights.");
  }
  validate(c);
  return c;
}

LossBatch make_loss_batch(std::span<const Sample* const> samples, bool allow_unlabeled) {
  LossBatch lb;
  lb.num_graphs = samples.size();
  lb.has_labels = true;
  for (const auto* s : samples) {
    if (!s->label) {
      if (!allow_unlabeled) throw ConfigError("sample " + s->name + " has no AC label");
      lb.has_labels = false;
    }
  }
  std::array<std::vector<double>, q::num_quantities> label;
  std::vector<double> yg, yb, pd, qd, vmin, vmax, qmin, qmax, smax, c2, c1, c0, lcost, lcost_scale;
  std::size_t bus_off = 0;
  for (std::size_t gi = 0; gi < samples.size(); ++gi) {
    const auto& net = samples[gi]->network;
    const auto y = build_admittance(net);
    const auto nb = net.num_buses();
    for (std::size_t i = 0; i < nb; ++i)
      for (std::size_t j = 0; j < nb; ++j) {
        const double g = y.G(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        const double b = y.B(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        if (g == 0.0 && b == 0.0) continue;
        lb.y_row.push_back(bus_off + i);
        lb.y_col.push_back(bus_off + j);
        yg.push_back(g);
        yb.push_back(b);
      }
    const auto bp = net.bus_p_demand();
    const auto bq = net.bus_q_demand();
    pd.insert(pd.end(), bp.begin(), bp.end());
    qd.insert(qd.end(), bq.begin(), bq.end());
    for (const auto& b : net.buses()) {
      vmin.push_back(b.v_min);
      vmax.push_back(b.v_max);
    }
    for (const auto& g : net.generators()) {
      lb.gen_bus.push_back(bus_off + g.bus);
      qmin.push_back(g.q_min);
      qmax.push_back(g.q_max);
      c2.push_back(g.cost.c2);
      c1.push_back(g.cost.c1);
      c0.push_back(g.cost.c0);
      lb.gen_graph.push_back(gi);
    }
    for (const auto& br : net.branches()) smax.push_back(br.s_max);
    if (lb.has_labels) {
      const auto& l = *samples[gi]->label;
      const std::array<const std::vector<double>*, q::num_quantities> f{&l.v, &l.theta, &l.p_g, &l.q_g,
                                                                        &l.s_branch};
      for (std::size_t k = 0; k < q::num_quantities; ++k) {
        if (k == static_cast<std::size_t>(q::Quantity::s) && !l.has_branch_flows()) {
          const auto s = branch_apparent_flows(net, l);
          label[k].insert(label[k].end(), s.begin(), s.end());
        } else {
          label[k].insert(label[k].end(), f[k]->begin(), f[k]->end());
        }
      }
      lcost.push_back(generation_cost(net, l.p_g));
      lcost_scale.push_back(1.0 / std::max(std::abs(lcost.back()), 1.0));
    }
    bus_off += nb;
  }
  for (std::size_t k = 0; k < q::num_quantities; ++k) lb.label[k] = column(label[k]);
  lb.y_g = column(yg);
  lb.y_b = column(yb);
  lb.p_d = column(pd);
  lb.q_d = column(qd);
  lb.v_min = column(vmin);
  lb.v_max = column(vmax);
  lb.q_min = column(qmin);
  lb.q_max = column(qmax);
  lb.s_max = column(smax);
  lb.c2 = column(c2);
  lb.c1 = column(c1);
  lb.c0 = column(c0);
  lb.label_cost = column(lcost);
  lb.label_cost_inv = column(lcost_scale);
  return lb;
}

LossVars loss(Tape& tape, const gnn::ForwardVars& fw, const LossBatch& lb, const gnn::Normalizer& norm,
              const LossWeights& w) {
  using namespace ad;
  auto c = [&](const Tensor& t) { return tape.constant(t); };
  const Var v = fw.value[0], th = fw.value[1], p = fw.value[2], qg = fw.value[3], s = fw.value[4];
  const std::size_t nb = lb.p_d.rows;
  const Var zero = tape.constant(Tensor(1, 1));

  Var sup = zero;
  Var obj = zero;
  if (lb.has_labels) {
    const std::array<double, q::num_quantities> alpha{w.alpha_v, w.alpha_theta, w.alpha_p, w.alpha_q, w.alpha_s};
    for (std::size_t k = 0; k < q::num_quantities; ++k) {
      if (alpha[k] == 0.0) continue;
      const Var err = scale(sub(fw.value[k], c(lb.label[k])), 1.0 / norm.label_scale[k]);
      sup = add(sup, scale(sum(square(err)), alpha[k]));
    }
    const Var cost_gen = add(mul(add(mul(c(lb.c2), p), c(lb.c1)), p), c(lb.c0));
    const Var cost = segment_sum(cost_gen, lb.gen_graph, lb.num_graphs);
    obj = sum(mul(abs(sub(cost, c(lb.label_cost))), c(lb.label_cost_inv)));
  }

  const Var vi = gather_rows(v, lb.y_row);
  const Var vj = gather_rows(v, lb.y_col);
  const Var d = sub(gather_rows(th, lb.y_row), gather_rows(th, lb.y_col));
  const Var cs = cos(d), sn = sin(d);
  const Var vv = mul(vi, vj);
  const Var g = c(lb.y_g), b = c(lb.y_b);
  const Var tp = mul(vv, add(mul(g, cs), mul(b, sn)));
  const Var tq = mul(vv, sub(mul(g, sn), mul(b, cs)));
  const Var r_p = sub(sub(segment_sum(p, lb.gen_bus, nb), c(lb.p_d)), segment_sum(tp, lb.y_row, nb));
  const Var r_q = sub(sub(segment_sum(qg, lb.gen_bus, nb), c(lb.q_d)), segment_sum(tq, lb.y_row, nb));
  const Var pf = add(sum(square(r_p)), sum(square(r_q)));

  auto hsq = [&](Var x) { return sum(square(hinge(x))); };
  Var box = add(hsq(sub(v, c(lb.v_max))), hsq(sub(c(lb.v_min), v)));
  box = add(box, add(hsq(sub(qg, c(lb.q_max))), hsq(sub(c(lb.q_min), qg))));
  if (lb.s_max.rows > 0) box = add(box, hsq(sub(s, c(lb.s_max))));

  Var res = zero;
  for (std::size_t k = 0; k < q::num_quantities; ++k)
    if (fw.delta[k].value().rows > 0) res = add(res, sum(square(fw.delta[k])));

  const double inv_g = 1.0 / static_cast<double>(lb.num_graphs);
  LossVars out;
  out.sup = scale(sup, inv_g);
  out.pf = scale(pf, inv_g);
  out.box = scale(box, inv_g);
  out.obj = scale(obj, inv_g);
  out.res = scale(res, inv_g);
  out.total = add(add(add(out.sup, scale(out.pf, w.pf)), add(scale(out.box, w.box), scale(out.obj, w.obj))),
                  scale(out.res, w.res));
  return out;
}

LossBreakdown evaluate_loss(const gnn::ModelParams& params, std::span<const Sample* const> samples,
                            const LossWeights& w, std::size_t batch_size) {
  LossBreakdown acc;
  if (samples.empty()) return acc;
  for (std::size_t s0 = 0; s0 < samples.size(); s0 += batch_size) {
    const auto n = std::min(batch_size, samples.size() - s0);
    const auto part = samples.subspan(s0, n);
    std::vector<gnn::EncodedGraph> enc;
    for (const auto* s : part) enc.push_back(gnn::encode_graph(*s));
    std::vector<const gnn::EncodedGraph*> ptrs;
    for (const auto& e : enc) ptrs.push_back(&e);
    const auto pb = prepare(part, ptrs, params);
    Tape tape;
    const auto pv = gnn::bind(tape, params, false);
    const auto fw = gnn::forward(tape, pv, pb.graph);
    accumulate(acc, read(loss(tape, fw, pb.loss, params.norm, w)), static_cast<double>(n));
  }
  return scaled(acc, 1.0 / static_cast<double>(samples.size()));
}

double global_norm(std::span<const Tensor> grads) {
  double s = 0.0;
  for (const auto& g : grads)
    for (double x : g.data) s += x * x;
  return std::sqrt(s);
}

void clip_to_norm(std::span<Tensor> grads, double max_norm) {
  const double n = global_norm(grads);
  if (!(n > max_norm)) return;
  const double f = max_norm / n;
  for (auto& g : grads)
    for (auto& x : g.data) x *= f;
}

json to_json(const TrainReport& r, bool include_timing) {
  json ep = json::array();
  for (const auto& e : r.epochs) {
    json j{{"epoch", e.epoch}, {"train", to_json(e.train)}, {"val", to_json(e.val)}, {"grad_norm", e.grad_norm}};
    if (include_timing) j["seconds"] = e.seconds;
    ep.push_back(std::move(j));
  }
  json j{{"epochs", std::move(ep)},
         {"best_epoch", r.best_epoch},
         {"best_val", r.best_val},
         {"diverged", r.diverged},
         {"stop_reason", r.stop_reason},
         {"parameter_count", r.parameter_count}};
  if (include_timing) j["seconds"] = r.seconds;
  return j;
}

Split make_split(std::size_t n, const TrainConfig& c) {
  validate(c);
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  std::mt19937_64 rng(c.seed);
  shuffle(idx, rng);
  const auto n_train = static_cast<std::size_t>(std::llround(c.train_fraction * static_cast<double>(n)));
  const auto n_val = std::min(n - std::min(n, n_train),
                              static_cast<std::size_t>(std::llround(c.val_fraction * static_cast<double>(n))));
  Split s;
  s.train.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(std::min(n, n_train)));
  s.val.assign(idx.begin() + static_cast<std::ptrdiff_t>(s.train.size()),
               idx.begin() + static_cast<std::ptrdiff_t>(s.train.size() + n_val));
  s.test.assign(idx.begin() + static_cast<std::ptrdiff_t>(s.train.size() + n_val), idx.end());
  if (s.train.empty() || s.val.empty() || (c.test_fraction > 0.0 && s.test.empty()))
    throw ConfigError("split of " + std::to_string(n) + " samples leaves an empty part");
  return s;
}

json to_json(const Split& s, std::span<const std::string> names) {
  auto side = [&](const std::vector<std::size_t>& v) {
    json a = json::array();
    for (auto i : v) {
      if (names.empty()) a.push_back(i);
      else a.push_back(names[i]);
    }
    return a;
  };
  json j{{"train", s.train}, {"val", s.val}, {"test", s.test}};
  if (!names.empty()) j["files"] = {{"train", side(s.train)}, {"val", side(s.val)}, {"test", side(s.test)}};
  return j;
}

Split split_from_json(const json& j) {
  try {
    return Split{j.at("train").get<std::vector<std::size_t>>(), j.at("val").get<std::vector<std::size_t>>(),
                 j.at("test").get<std::vector<std::size_t>>()};
  } catch (const json::exception& e) {
    throw ParseError(std::string("splits: ") + e.what());
  }
}

TrainResult fit(std::span<const Sample* const> train_set, std::span<const Sample* const> val_set,
                const TrainConfig& config, gnn::ModelParams init) {
  validate(config);
  if (train_set.empty() || val_set.empty()) throw ConfigError("training and validation sets must be non-empty");
  const auto t_start = std::chrono::steady_clock::now();
  std::vector<gnn::EncodedGraph> train_enc, val_enc;
  for (const auto* s : train_set) train_enc.push_back(gnn::encode_graph(*s));
  for (const auto* s : val_set) val_enc.push_back(gnn::encode_graph(*s));
  (void)make_loss_batch(train_set);  // rejects unlabeled samples up front

  gnn::ModelParams params = std::move(init);
  std::vector<PreparedBatch> val_batches;
  std::vector<std::size_t> val_sizes;
  for (std::size_t s0 = 0; s0 < val_set.size(); s0 += config.batch_size) {
    const auto n = std::min(config.batch_size, val_set.size() - s0);
    std::vector<const gnn::EncodedGraph*> ptrs;
    for (std::size_t i = 0; i < n; ++i) ptrs.push_back(&val_enc[s0 + i]);
    val_batches.push_back(prepare(val_set.subspan(s0, n), ptrs, params));
    val_sizes.push_back(n);
  }

  const std::size_t np = params.tensors.size();
  std::vector<Tensor> m1, m2;
  for (const auto& t : params.tensors) {
    m1.emplace_back(t.rows, t.cols);
    m2.emplace_back(t.rows, t.cols);
  }
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  std::size_t step = 0;

  TrainResult result{params, {}};
  auto& report = result.report;
  report.parameter_count = params.parameter_count();
  report.best_val = std::numeric_limits<double>::infinity();
  bool have_best = false;
  std::size_t wait = 0;
  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  auto diverge = [&](std::size_t epoch, const std::string& what) {
    report.diverged = true;
    report.stop_reason = what + " at epoch " + std::to_string(epoch);
    if (!have_best) result.model = params;
  };

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    shuffle(order, rng);
    LossBreakdown tr;
    double gsum = 0.0;
    std::size_t nbatches = 0;
    bool bad = false;
    for (std::size_t s0 = 0; s0 < order.size() && !bad; s0 += config.batch_size) {
      const auto n = std::min(config.batch_size, order.size() - s0);
      std::vector<const Sample*> ss;
      std::vector<const gnn::EncodedGraph*> gs;
      for (std::size_t i = 0; i < n; ++i) {
        ss.push_back(train_set[order[s0 + i]]);
        gs.push_back(&train_enc[order[s0 + i]]);
      }
      const auto pb = prepare(ss, gs, params);
      Tape tape;
      const auto pv = gnn::bind(tape, params, true);
      const auto fw = gnn::forward(tape, pv, pb.graph);
      const auto lv = loss(tape, fw, pb.loss, params.norm, config.weights);
      const auto br = read(lv);
      if (!finite(br.total)) {
        diverge(epoch, "non-finite training loss");
        bad = true;
        break;
      }
      tape.backward(lv.total);
      std::vector<Tensor> grads;
      grads.reserve(np);
      for (std::size_t i = 0; i < np; ++i) grads.push_back(tape.grad(pv.vars[i]));
      const double gn = global_norm(grads);
      if (!finite(gn)) {
        diverge(epoch, "non-finite gradient");
        bad = true;
        break;
      }
      clip_to_norm(grads, config.clip);
      ++step;
      const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
      const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
      for (std::size_t i = 0; i < np; ++i) {
        auto& p = params.tensors[i].data;
        auto& a = m1[i].data;
        auto& b = m2[i].data;
        const auto& g = grads[i].data;
        for (std::size_t k = 0; k < p.size(); ++k) {
          a[k] = beta1 * a[k] + (1.0 - beta1) * g[k];
          b[k] = beta2 * b[k] + (1.0 - beta2) * g[k] * g[k];
          p[k] -= config.learning_rate * (a[k] / bc1) / (std::sqrt(b[k] / bc2) + eps);
        }
      }
      accumulate(tr, br, static_cast<double>(n));
      gsum += gn;
      ++nbatches;
    }
    if (bad) break;

    LossBreakdown val;
    for (std::size_t b = 0; b < val_batches.size(); ++b) {
      Tape tape;
      const auto pv = gnn::bind(tape, params, false);
      const auto fw = gnn::forward(tape, pv, val_batches[b].graph);
      accumulate(val, read(loss(tape, fw, val_batches[b].loss, params.norm, config.weights)),
                 static_cast<double>(val_sizes[b]));
    }
    val = scaled(val, 1.0 / static_cast<double>(val_set.size()));
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train = scaled(tr, 1.0 / static_cast<double>(train_set.size()));
    rec.val = val;
    rec.grad_norm = nbatches ? gsum / static_cast<double>(nbatches) : 0.0;
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report.epochs.push_back(rec);
    if (!finite(val.total)) {
      diverge(epoch, "non-finite validation loss");
      break;
    }
    if (val.total < report.best_val) {
      report.best_val = val.total;
      report.best_epoch = epoch;
      result.model = params;
      have_best = true;
      wait = 0;
    } else if (++wait >= config.patience) {
      report.stop_reason = "early stopping after " + std::to_string(config.patience) + " epochs without improvement";
      break;
    }
  }
  if (report.stop_reason.empty()) report.stop_reason = "reached max_epochs";
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return result;
}

TrainResult train(std::span<const Sample> data, const TrainConfig& config, Split* split_out) {
  validate(config);
  if (data.size() < 10) throw ConfigError("training needs at least 10 samples, got " + std::to_string(data.size()));
  const auto split = make_split(data.size(), config);
  if (split_out) *split_out = split;
  std::vector<const Sample*> tr, va;
  for (auto i : split.train) tr.push_back(&data[i]);
  for (auto i : split.val) va.push_back(&data[i]);
  for (const auto& s : data)
    if (!s.label) throw ConfigError("sample " + s.name + " has no AC label");
  auto mc = config.model;
  mc.seed = config.seed;
  if (mc.ydc_width == 0) {
    for (const auto& s : data)
      mc.ydc_width = std::max(mc.ydc_width, s.network.num_buses() + s.network.num_generators() +
                                                s.network.num_branches());
  }
  const auto norm = gnn::fit_normalizer(tr, mc.mode);
  return fit(tr, va, config, gnn::init_params(mc, norm));
}

}  // namespace resopf::train
