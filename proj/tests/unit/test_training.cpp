#include <cmath>
#include <limits>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "resopf/ac_physics.hpp"
#include "resopf/errors.hpp"
#include "resopf/training.hpp"

using namespace resopf;
using namespace resopf::train;
using resopf::ad::Tape;
using resopf::ad::Tensor;

namespace {

std::vector<Sample> perturbed(std::string_view name, std::size_t n, std::uint64_t seed) {
  const auto base = oracle::load_fixture(name);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> f(0.8, 1.2);
  std::vector<Sample> out;
  while (out.size() < n) {
    std::vector<Load> loads(base.loads().begin(), base.loads().end());
    for (auto& l : loads) {
      const double k = f(rng);
      l.p_d *= k;
      l.q_d *= k;
    }
    auto s = make_sample(base.with_loads(loads));
    s.label = newton_pf(s.network, midpoint_setpoints(s.network, s.dc.p_g)).point;
    s.name = "s" + std::to_string(out.size());
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<const Sample*> ptrs(const std::vector<Sample>& v) {
  std::vector<const Sample*> p;
  for (const auto& s : v) p.push_back(&s);
  return p;
}

Tensor col(const std::vector<double>& v) { return Tensor(v.size(), 1, v); }

// Forward outputs pinned to a given point, as if a model had produced it.
gnn::ForwardVars pinned(Tape& tape, const Sample& s, const OperatingPoint& x) {
  gnn::ForwardVars fw;
  const std::array<const std::vector<double>*, 5> xv{&x.v, &x.theta, &x.p_g, &x.q_g, &x.s_branch};
  const std::array<const std::vector<double>*, 5> wv{&s.warm.v, &s.warm.theta, &s.warm.p_g, &s.warm.q_g,
                                                     &s.warm.s_branch};
  for (std::size_t q = 0; q < 5; ++q) {
    fw.value[q] = tape.constant(col(*xv[q]));
    fw.delta[q] = ad::sub(fw.value[q], tape.constant(col(*wv[q])));
  }
  return fw;
}

LossBreakdown pinned_loss(const Sample& s, const OperatingPoint& x, const LossWeights& w,
                          const gnn::Normalizer& norm = gnn::identity_normalizer()) {
  Tape tape;
  const Sample* p = &s;
  const auto lb = make_loss_batch(std::span(&p, 1));
  const auto l = loss(tape, pinned(tape, s, x), lb, norm, w);
  return {l.total.value().data[0], l.sup.value().data[0], l.pf.value().data[0],
          l.box.value().data[0],   l.obj.value().data[0], l.res.value().data[0]};
}

TrainConfig quick(std::uint64_t seed = 1) {
  TrainConfig c;
  c.model.hidden = 8;
  c.model.key = 4;
  c.model.layers = 2;
  c.batch_size = 8;
  c.max_epochs = 15;
  c.patience = 5;
  c.learning_rate = 3e-3;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("loss at the label: only the residual term is left") {
  const auto s = perturbed("case6ww", 1, 2).front();
  const auto l = pinned_loss(s, *s.label, LossWeights{});
  CHECK(l.sup == 0.0);
  CHECK(l.obj == 0.0);
  CHECK(l.pf < 1e-16);
  double res = 0.0, box = 0.0;
  const auto& x = *s.label;
  const auto& net = s.network;
  auto over = [](double a, double hi) { return a > hi ? (a - hi) * (a - hi) : 0.0; };
  for (std::size_t i = 0; i < x.v.size(); ++i)
    box += over(x.v[i], net.buses()[i].v_max) + over(net.buses()[i].v_min, x.v[i]);
  for (std::size_t g = 0; g < x.q_g.size(); ++g)
    box += over(x.q_g[g], net.generators()[g].q_max) + over(net.generators()[g].q_min, x.q_g[g]);
  for (std::size_t k = 0; k < x.s_branch.size(); ++k) box += over(x.s_branch[k], net.branches()[k].s_max);
  CHECK(l.box == doctest::Approx(box).epsilon(1e-12));
  for (std::size_t i = 0; i < x.v.size(); ++i)
    res += std::pow(x.v[i] - s.warm.v[i], 2) + std::pow(x.theta[i] - s.warm.theta[i], 2);
  for (std::size_t i = 0; i < x.p_g.size(); ++i)
    res += std::pow(x.p_g[i] - s.warm.p_g[i], 2) + std::pow(x.q_g[i] - s.warm.q_g[i], 2);
  for (std::size_t i = 0; i < x.s_branch.size(); ++i) res += std::pow(x.s_branch[i] - s.warm.s_branch[i], 2);
  CHECK(l.res == doctest::Approx(res).epsilon(1e-12));
  CHECK(l.res > 0.0);
}

TEST_CASE("power-flow term equals the squared KCL mismatch of an independent oracle") {
  const auto s = perturbed("case14", 1, 3).front();
  auto x = s.warm;  // DC warm start is not AC feasible
  const auto l = pinned_loss(s, x, LossWeights{});
  double ref = 0.0;
  for (const auto& m : oracle::kcl_mismatch(s.network, x)) ref += std::norm(m);
  CHECK(l.pf == doctest::Approx(ref).epsilon(1e-10));
  CHECK(l.pf > 1e-4);
}

TEST_CASE("box, cost and supervised terms by hand") {
  const auto s = perturbed("case3_triangle", 1, 4).front();
  auto x = *s.label;
  const auto& net = s.network;
  x.v[1] = net.buses()[1].v_max + 0.1;
  x.q_g[0] = net.generators()[0].q_min - 0.2;
  x.p_g[0] += 0.05;
  LossWeights w;
  auto norm = gnn::identity_normalizer();
  norm.label_scale = {2.0, 1.0, 0.5, 1.0, 1.0};
  const auto l = pinned_loss(s, x, w, norm);
  CHECK(l.box == doctest::Approx(0.1 * 0.1 + 0.2 * 0.2).epsilon(1e-12));
  const auto& c = net.generators()[0].cost;
  const double dc = c(x.p_g[0]) - c(s.label->p_g[0]);
  double c_star = 0.0;
  for (std::size_t g = 0; g < net.num_generators(); ++g) c_star += net.generators()[g].cost(s.label->p_g[g]);
  CHECK(l.obj == doctest::Approx(std::abs(dc) / std::max(std::abs(c_star), 1.0)).epsilon(1e-10));
  const double sup = std::pow((x.v[1] - s.label->v[1]) / 2.0, 2) + std::pow((x.q_g[0] - s.label->q_g[0]), 2) +
                     std::pow(0.05 / 0.5, 2);
  CHECK(l.sup == doctest::Approx(sup).epsilon(1e-9));
  CHECK(l.total == doctest::Approx(l.sup + 0.1 * l.pf + 0.1 * l.box + 0.01 * l.obj + 1e-4 * l.res).epsilon(1e-14));
}

TEST_CASE("with physics weights off the objective is the supervised term") {
  const auto s = perturbed("case6ww", 1, 5).front();
  LossWeights w;
  w.pf = w.box = w.obj = w.res = 0.0;
  const auto l = pinned_loss(s, s.warm, w);
  CHECK(l.total == l.sup);
  CHECK(l.sup > 0.0);
}

TEST_CASE("five-term loss gradient matches finite differences on a 3-bus batch") {
  const auto data = perturbed("case3_triangle", 3, 6);
  const auto p = ptrs(data);
  auto mc = quick().model;
  mc.ydc_width = gnn::encode_graph(data[0]).y_dc.size();
  auto params = gnn::init_params(mc, gnn::fit_normalizer(p, mc.mode));
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  for (std::size_t i = 0; i < params.names.size(); ++i) {
    const auto& n = params.names[i];
    if (n.ends_with("b0") || n.ends_with("b1") || n.ends_with("ln_bias") || n == "head.w2")
      for (auto& x : params.tensors[i].data) x += u(rng);
  }
  std::vector<gnn::EncodedGraph> enc;
  for (const auto& s : data) enc.push_back(gnn::encode_graph(s));
  std::vector<const gnn::EncodedGraph*> ep;
  for (const auto& e : enc) ep.push_back(&e);
  const auto batch = gnn::make_batch(ep, params.norm, mc.ydc_width);
  auto lb = make_loss_batch(p);
  for (auto& x : lb.v_max.data) x = 0.98;  // keeps the box term active
  LossWeights w;
  w.res = 0.3;  // make every term visible in the gradient
  w.obj = 0.5;
  const auto f = [&](Tape& tape, const std::vector<ad::Var>& vars) {
    const gnn::ParamVars pv{&params, vars};
    return loss(tape, gnn::forward(tape, pv, batch), lb, params.norm, w).total;
  };
  const auto r = ad::grad_check(f, params.tensors);
  INFO("worst parameter " << params.names[r.worst_input]);
  CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("gradient clipping bounds the global norm") {
  std::vector<Tensor> g{Tensor(1, 2, {3.0, 0.0}), Tensor(2, 1, {0.0, 4.0})};
  CHECK(global_norm(g) == 5.0);
  clip_to_norm(g, 1.0);
  CHECK(global_norm(g) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(g[0].data[0] == doctest::Approx(0.6));
  std::vector<Tensor> small{Tensor(1, 1, {0.5})};
  clip_to_norm(small, 1.0);
  CHECK(small[0].data[0] == 0.5);
}

TEST_CASE("config JSON round trip and rejection of unknown keys") {
  auto c = quick(9);
  c.model.mode = gnn::Mode::direct;
  c.weights.pf = 0.5;
  CHECK(config_from_json(to_json(c)) == c);
  CHECK(config_from_json(nlohmann::json::object()) == TrainConfig{});
  CHECK_THROWS_AS(config_from_json({{"learnig_rate", 0.1}}), ConfigError);
  CHECK_THROWS_AS(config_from_json({{"model", {{"mode", "both"}}}}), ConfigError);
  CHECK_THROWS_AS(config_from_json({{"weights", {{"pf", -1.0}}}}), ConfigError);
  CHECK_THROWS_AS(config_from_json({{"train_fraction", 0.9}}), ConfigError);
  CHECK_THROWS_AS(config_from_json({{"batch_size", "many"}}), ConfigError);
}

TEST_CASE("splits are disjoint, complete and seeded") {
  const auto c = quick(4);
  const auto s = make_split(50, c);
  CHECK(s.train.size() == 40);
  CHECK(s.val.size() == 5);
  CHECK(s.test.size() == 5);
  std::vector<int> seen(50, 0);
  for (const auto* part : {&s.train, &s.val, &s.test})
    for (auto i : *part) ++seen[i];
  for (int k : seen) CHECK(k == 1);
  CHECK(make_split(50, c) == s);
  CHECK_FALSE(make_split(50, quick(5)) == s);
  CHECK(split_from_json(to_json(s)) == s);
  CHECK_THROWS_AS(make_split(3, c), ConfigError);
}

TEST_CASE("training lowers the validation loss and is reproducible") {
  const auto data = perturbed("case3_triangle", 40, 10);
  Split sp;
  const auto a = train::train(data, quick(), &sp);
  const auto b = train::train(data, quick());
  CHECK(to_json(a.report, false) == to_json(b.report, false));
  CHECK(a.model == b.model);
  CHECK_FALSE(a.report.diverged);
  REQUIRE(!a.report.epochs.empty());
  CHECK(a.report.best_val < a.report.epochs.front().val.total);
  CHECK(a.report.best_val == a.report.epochs[a.report.best_epoch - 1].val.total);
  std::vector<const Sample*> val;
  for (auto i : sp.val) val.push_back(&data[i]);
  CHECK(evaluate_loss(a.model, val, quick().weights).total == doctest::Approx(a.report.best_val).epsilon(1e-12));
  CHECK(a.report.parameter_count == a.model.parameter_count());
}

TEST_CASE("early stopping halts after patience epochs without improvement") {
  const auto data = perturbed("case3_triangle", 20, 11);
  auto c = quick();
  c.learning_rate = 0.2;  // too hot to keep improving
  c.patience = 2;
  c.max_epochs = 200;
  const auto r = train::train(data, c).report;
  CHECK(r.epochs.size() == r.best_epoch + 2);
  CHECK(r.epochs.size() < 200);
  CHECK(r.stop_reason.find("early stopping") != std::string::npos);
}

TEST_CASE("non-finite loss stops training and keeps a finite model") {
  auto data = perturbed("case3_triangle", 12, 12);
  data[3].label->v[0] = std::numeric_limits<double>::quiet_NaN();
  auto c = quick();
  c.train_fraction = 1.0 - 0.2;
  c.val_fraction = 0.2;
  c.test_fraction = 0.0;
  std::vector<const Sample*> tr, va;
  for (std::size_t i = 0; i < 10; ++i) tr.push_back(&data[i]);
  for (std::size_t i = 10; i < 12; ++i) va.push_back(&data[i]);
  auto mc = c.model;
  mc.ydc_width = gnn::encode_graph(data[0]).y_dc.size();
  const auto init = gnn::init_params(mc, gnn::identity_normalizer());
  const auto r = fit(tr, va, c, init);
  CHECK(r.report.diverged);
  for (const auto& t : r.model.tensors)
    for (double x : t.data) CHECK(std::isfinite(x));
}

TEST_CASE("too few or unlabelled samples are rejected") {
  auto data = perturbed("case3_triangle", 12, 13);
  CHECK_THROWS_AS(train::train(std::span(data).first(9), quick()), ConfigError);
  data[0].label.reset();
  CHECK_THROWS_AS(train::train(data, quick()), ConfigError);
}
