#include "resopf/gnn.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "resopf/case_io.hpp"
#include "resopf/errors.hpp"

namespace resopf::gnn {

using ad::Tape;
using ad::Tensor;
using ad::Var;
using nlohmann::json;

std::string to_string(Mode m) { return m == Mode::residual ? "residual" : "direct"; }

Mode mode_from_string(std::string_view s) {
  if (s == "residual") return Mode::residual;
  if (s == "direct") return Mode::direct;
  throw ConfigError("unknown mode '" + std::string(s) + "' (expected residual or direct)");
}

std::string to_string(NodeKind k) {
  switch (k) {
    case NodeKind::bus: return "bus";
    case NodeKind::generator: return "generator";
    case NodeKind::load: return "load";
  }
  return "?";
}

std::string to_string(EdgeType t) {
  switch (t) {
    case EdgeType::ac_line: return "ac_line";
    case EdgeType::transformer: return "transformer";
    case EdgeType::generator_link: return "generator_link";
    case EdgeType::load_link: return "load_link";
  }
  return "?";
}

std::string to_string(Quantity q) {
  static const char* names[] = {"v", "theta", "p_g", "q_g", "s"};
  return names[static_cast<std::size_t>(q)];
}

namespace {

constexpr std::size_t kBus = 0, kGen = 1, kLoad = 2;
constexpr std::size_t tAc = 0, tTr = 1, tGen = 2, tLoad = 3;

std::vector<const std::vector<double>*> fields(const OperatingPoint& p) {
  return {&p.v, &p.theta, &p.p_g, &p.q_g, &p.s_branch};
}

void same_sizes(const OperatingPoint& a, const std::vector<std::vector<double>>& b, const char* what) {
  const auto fa = fields(a);
  for (std::size_t q = 0; q < num_quantities; ++q)
    if (fa[q]->size() != b[q].size())
      throw ContractViolation(std::string(what) + ": " + to_string(static_cast<Quantity>(q)) + " has " +
                              std::to_string(b[q].size()) + " entries, expected " +
                              std::to_string(fa[q]->size()));
}

std::vector<std::vector<double>> as_lists(const ResidualVector& d) {
  return {d.dv, d.dtheta, d.dp_g, d.dq_g, d.ds};
}

// 53 random bits -> [0, 1); same stream on every platform.
double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);
}

struct Stat {
  double sum = 0.0, sq = 0.0;
  std::size_t n = 0;
  void add(double x) {
    sum += x;
    sq += x * x;
    ++n;
  }
  double mean() const { return n ? sum / static_cast<double>(n) : 0.0; }
  double stddev() const {
    if (n == 0) return 0.0;
    const double m = mean();
    return std::sqrt(std::max(0.0, sq / static_cast<double>(n) - m * m));
  }
  double rms() const { return n ? std::sqrt(sq / static_cast<double>(n)) : 0.0; }
};

double usable_scale(double s) { return s > 1e-9 ? s : 1.0; }

ColumnStats column_stats(const std::vector<const Tensor*>& tables, std::size_t width) {
  std::vector<Stat> st(width);
  for (const auto* t : tables)
    for (std::size_t r = 0; r < t->rows; ++r)
      for (std::size_t c = 0; c < width; ++c) st[c].add((*t)(r, c));
  ColumnStats cs;
  for (const auto& s : st) {
    cs.mean.push_back(s.mean());
    cs.scale.push_back(usable_scale(s.stddev()));
  }
  return cs;
}

ColumnStats identity_stats(std::size_t width) {
  return ColumnStats{std::vector<double>(width, 0.0), std::vector<double>(width, 1.0)};
}

std::size_t head_input_width(const ModelConfig& c) { return 4 * c.hidden + c.ydc_width + 3; }

struct Shape {
  std::string name;
  std::size_t rows, cols;
  enum class Init { uniform, zero, one } init;
};

std::vector<Shape> parameter_layout(const ModelConfig& c) {
  std::vector<Shape> out;
  const auto h = c.hidden;
  auto mlp = [&](const std::string& p, std::size_t in, std::size_t hid, std::size_t o) {
    out.push_back({p + ".w0", in, hid, Shape::Init::uniform});
    out.push_back({p + ".b0", 1, hid, Shape::Init::zero});
    out.push_back({p + ".w1", hid, o, Shape::Init::uniform});
    out.push_back({p + ".b1", 1, o, Shape::Init::zero});
  };
  for (std::size_t k = 0; k < num_node_kinds; ++k)
    mlp("enc.node." + to_string(static_cast<NodeKind>(k)), node_feature_width[k], h, h);
  for (std::size_t t = 0; t < num_edge_types; ++t)
    mlp("enc.edge." + to_string(static_cast<EdgeType>(t)), edge_feature_width[t], h, h);
  for (std::size_t t : {tAc, tTr}) mlp("psi_geo." + to_string(static_cast<EdgeType>(t)), geo_width, h, 1);
  for (std::size_t t = 0; t < num_edge_types; ++t) mlp("psi_dc." + to_string(static_cast<EdgeType>(t)), 1, h, 1);
  for (std::size_t l = 0; l < c.layers; ++l) {
    const auto p = "layer" + std::to_string(l) + ".";
    for (std::size_t t = 0; t < num_edge_types; ++t) {
      const auto q = p + to_string(static_cast<EdgeType>(t));
      out.push_back({q + ".wq", h, c.key, Shape::Init::uniform});
      out.push_back({q + ".wk", 2 * h, c.key, Shape::Init::uniform});
      out.push_back({q + ".wv", 2 * h, h, Shape::Init::uniform});
    }
    for (std::size_t k = 0; k < num_node_kinds; ++k) {
      const auto q = p + to_string(static_cast<NodeKind>(k));
      out.push_back({q + ".wh", 2 * h, h, Shape::Init::uniform});
      out.push_back({q + ".ln_gain", 1, h, Shape::Init::one});
      out.push_back({q + ".ln_bias", 1, h, Shape::Init::zero});
    }
  }
  out.push_back({"head.w0", head_input_width(c), h, Shape::Init::uniform});
  out.push_back({"head.b0", 1, h, Shape::Init::zero});
  out.push_back({"head.w1", h, h, Shape::Init::uniform});
  out.push_back({"head.b1", 1, h, Shape::Init::zero});
  out.push_back({"head.w2", h, num_quantities, Shape::Init::uniform});
  out.push_back({"head.b2", 1, num_quantities, Shape::Init::zero});
  return out;
}

void validate(const ModelConfig& c) {
  if (c.hidden == 0 || c.key == 0) throw ConfigError("hidden and key widths must be positive");
  if (c.ydc_width == 0) throw ConfigError("ydc_width must be positive");
}

}  // namespace

namespace {

// Error-free transformation: a + b == s + e exactly.
std::pair<double, double> two_sum(double a, double b) {
  const double s = a + b;
  const double bb = s - a;
  return {s, (a - (s - bb)) + (b - bb)};
}

}  // namespace

OperatingPoint reconstruct(const OperatingPoint& x0, const ResidualVector& delta) {
  const auto d = as_lists(delta);
  same_sizes(x0, d, "reconstruct");
  OperatingPoint out = x0;
  std::vector<std::vector<double>*> dst{&out.v, &out.theta, &out.p_g, &out.q_g, &out.s_branch};
  for (std::size_t q = 0; q < num_quantities; ++q) {
    const auto& tail = delta.tail[q];
    if (!tail.empty() && tail.size() != d[q].size())
      throw ContractViolation("reconstruct: " + to_string(static_cast<Quantity>(q)) + " tail length mismatch");
    for (std::size_t i = 0; i < d[q].size(); ++i) {
      auto& x = (*dst[q])[i];
      if (tail.empty()) {
        x += d[q][i];
      } else {
        const auto [s, e] = two_sum(x, d[q][i]);
        x = s + (e + tail[i]);
      }
    }
  }
  return out;
}

ResidualVector residual_between(const OperatingPoint& x0, const OperatingPoint& label) {
  const auto a = fields(x0);
  const auto b = fields(label);
  std::vector<std::vector<double>> d(num_quantities);
  ResidualVector out;
  for (std::size_t q = 0; q < num_quantities; ++q) {
    if (a[q]->size() != b[q]->size())
      throw ContractViolation("residual_between: " + to_string(static_cast<Quantity>(q)) + " sizes differ");
    for (std::size_t i = 0; i < a[q]->size(); ++i) {
      const auto [hi, lo] = two_sum((*b[q])[i], -(*a[q])[i]);
      d[q].push_back(hi);
      out.tail[q].push_back(lo);
    }
  }
  out.dv = d[0];
  out.dtheta = d[1];
  out.dp_g = d[2];
  out.dq_g = d[3];
  out.ds = d[4];
  return out;
}

EncodedGraph encode_graph(const Sample& s) {
  const auto& net = s.network;
  const auto feats = extract_dc_features(s.dc, net);
  EncodedGraph g;
  g.num_buses = net.num_buses();
  g.num_generators = net.num_generators();
  g.num_loads = net.num_loads();
  g.num_branches = net.num_branches();
  g.slack = net.slack();
  g.warm = s.warm;
  g.y_dc = feats.flat;

  const auto buses = net.buses();
  g.node_x[kBus] = Tensor(g.num_buses, node_feature_width[kBus]);
  for (std::size_t i = 0; i < g.num_buses; ++i) {
    const auto& b = buses[i];
    const double row[] = {b.v_min,
                          b.v_max,
                          b.kind == BusKind::slack ? 1.0 : 0.0,
                          b.kind == BusKind::pv ? 1.0 : 0.0,
                          b.kind == BusKind::pq ? 1.0 : 0.0,
                          b.shunt_g,
                          b.shunt_b,
                          feats.node[i][0],
                          feats.node[i][1]};
    std::copy(std::begin(row), std::end(row), g.node_x[kBus].data.begin() + static_cast<std::ptrdiff_t>(i * 9));
  }
  const auto gens = net.generators();
  g.node_x[kGen] = Tensor(g.num_generators, node_feature_width[kGen]);
  for (std::size_t k = 0; k < gens.size(); ++k) {
    const auto& gen = gens[k];
    const double row[] = {gen.p_min,   gen.p_max,   gen.q_min,   gen.q_max,           gen.cost.c2,
                          gen.cost.c1, gen.cost.c0, s.dc.theta[gen.bus], s.dc.p_g[k]};
    std::copy(std::begin(row), std::end(row), g.node_x[kGen].data.begin() + static_cast<std::ptrdiff_t>(k * 9));
    g.gen_bus.push_back(gen.bus);
  }
  const auto loads = net.loads();
  g.node_x[kLoad] = Tensor(g.num_loads, node_feature_width[kLoad]);
  for (std::size_t k = 0; k < loads.size(); ++k) {
    const auto& l = loads[k];
    const double row[] = {l.p_d, l.q_d, s.dc.theta[l.bus], -l.p_d};
    std::copy(std::begin(row), std::end(row), g.node_x[kLoad].data.begin() + static_cast<std::ptrdiff_t>(k * 4));
  }

  std::array<std::vector<double>, num_edge_types> ex;
  auto add_pair = [&](std::size_t t, std::size_t a, std::size_t b, std::vector<double> f_fwd,
                      std::vector<double> f_rev) {
    g.edge_src[t].push_back(a);
    g.edge_dst[t].push_back(b);
    ex[t].insert(ex[t].end(), f_fwd.begin(), f_fwd.end());
    g.edge_src[t].push_back(b);
    g.edge_dst[t].push_back(a);
    ex[t].insert(ex[t].end(), f_rev.begin(), f_rev.end());
  };
  const auto branches = net.branches();
  for (std::size_t k = 0; k < branches.size(); ++k) {
    const auto& br = branches[k];
    const std::size_t t = br.kind == BranchKind::transformer ? tTr : tAc;
    const double f = s.dc.flow[k];
    std::vector<double> base{br.r, br.x, br.b_charge, br.tap, br.shift, br.s_max};
    auto fwd = base, rev = base;
    fwd.push_back(f);
    rev.push_back(-f);
    g.branch_from.push_back(br.from);
    g.branch_to.push_back(br.to);
    g.branch_type.push_back(static_cast<EdgeType>(t));
    g.branch_edge.push_back(g.edge_src[t].size());
    add_pair(t, br.from, br.to, fwd, rev);
  }
  for (std::size_t k = 0; k < gens.size(); ++k)
    add_pair(tGen, g.num_buses + k, gens[k].bus, {s.dc.p_g[k]}, {-s.dc.p_g[k]});
  for (std::size_t k = 0; k < loads.size(); ++k)
    add_pair(tLoad, g.num_buses + g.num_generators + k, loads[k].bus, {-loads[k].p_d}, {loads[k].p_d});
  for (std::size_t t = 0; t < num_edge_types; ++t)
    g.edge_x[t] = Tensor(g.edge_src[t].size(), edge_feature_width[t], std::move(ex[t]));
  return g;
}

Normalizer identity_normalizer() {
  Normalizer n;
  for (std::size_t k = 0; k < num_node_kinds; ++k) n.node[k] = identity_stats(node_feature_width[k]);
  for (std::size_t t = 0; t < num_edge_types; ++t) n.edge[t] = identity_stats(edge_feature_width[t]);
  return n;
}

Normalizer fit_normalizer(std::span<const Sample* const> samples, Mode mode) {
  if (samples.empty()) throw ConfigError("cannot fit feature scaling on an empty split");
  std::vector<EncodedGraph> graphs;
  graphs.reserve(samples.size());
  for (const auto* s : samples) graphs.push_back(encode_graph(*s));
  Normalizer n;
  for (std::size_t k = 0; k < num_node_kinds; ++k) {
    std::vector<const Tensor*> tabs;
    for (const auto& g : graphs) tabs.push_back(&g.node_x[k]);
    n.node[k] = column_stats(tabs, node_feature_width[k]);
  }
  for (std::size_t t = 0; t < num_edge_types; ++t) {
    std::vector<const Tensor*> tabs;
    for (const auto& g : graphs) tabs.push_back(&g.edge_x[t]);
    n.edge[t] = column_stats(tabs, edge_feature_width[t]);
  }
  std::array<Stat, 3> ydc;
  std::array<Stat, num_quantities> target, label;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& g = graphs[i];
    for (std::size_t j = 0; j < g.y_dc.size(); ++j) {
      const std::size_t grp = j < g.num_buses ? 0 : (j < g.num_buses + g.num_generators ? 1 : 2);
      ydc[grp].add(g.y_dc[j]);
    }
    const auto& s = *samples[i];
    if (!s.label) throw ConfigError("sample " + s.name + " has no AC label");
    const auto lab = fields(*s.label);
    const auto d = as_lists(residual_between(s.warm, *s.label));
    for (std::size_t q = 0; q < num_quantities; ++q) {
      for (std::size_t j = 0; j < lab[q]->size(); ++j) {
        label[q].add((*lab[q])[j]);
        target[q].add(mode == Mode::residual ? d[q][j] : (*lab[q])[j]);
      }
    }
  }
  for (std::size_t grp = 0; grp < 3; ++grp) n.ydc_scale[grp] = usable_scale(ydc[grp].rms());
  for (std::size_t q = 0; q < num_quantities; ++q) {
    n.out_mean[q] = target[q].mean();
    n.out_scale[q] = usable_scale(target[q].stddev());
    n.label_scale[q] = usable_scale(label[q].stddev());
  }
  return n;
}

std::size_t ModelParams::index(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return i;
  throw ContractViolation("no parameter named " + std::string(name));
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors) n += t.size();
  return n;
}

ModelParams init_params(const ModelConfig& config, const Normalizer& norm) {
  validate(config);
  ModelParams p;
  p.config = config;
  p.norm = norm;
  std::mt19937_64 rng(config.seed);
  for (const auto& s : parameter_layout(config)) {
    Tensor t(s.rows, s.cols);
    if (s.init == Shape::Init::uniform) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(s.rows));
      for (auto& x : t.data) x = (2.0 * unit_uniform(rng) - 1.0) * bound;
    } else if (s.init == Shape::Init::one) {
      std::fill(t.data.begin(), t.data.end(), 1.0);
    }
    p.names.push_back(s.name);
    p.tensors.push_back(std::move(t));
  }
  auto& b2 = p.at("head.b2");
  for (std::size_t q = 0; q < num_quantities; ++q) b2.data[q] = norm.out_mean[q] / norm.out_scale[q];
  return p;
}

void zero_head(ModelParams& params) {
  for (auto* name : {"head.w2", "head.b2"}) {
    auto& t = params.at(name);
    std::fill(t.data.begin(), t.data.end(), 0.0);
  }
}

GraphBatch make_batch(std::span<const EncodedGraph* const> graphs, const Normalizer& norm,
                      std::size_t ydc_width) {
  GraphBatch b;
  b.num_graphs = graphs.size();
  b.ydc_width = ydc_width;
  std::array<std::size_t, num_node_kinds> total{};
  std::array<std::size_t, num_edge_types> etotal{};
  for (const auto* g : graphs) {
    total[kBus] += g->num_buses;
    total[kGen] += g->num_generators;
    total[kLoad] += g->num_loads;
    for (std::size_t t = 0; t < num_edge_types; ++t) etotal[t] += g->edge_src[t].size();
    if (g->y_dc.size() > ydc_width)
      throw ContractViolation("DC solution vector of length " + std::to_string(g->y_dc.size()) +
                              " exceeds the model's ydc_width " + std::to_string(ydc_width));
  }
  b.kind_offset = {0, total[kBus], total[kBus] + total[kGen]};
  b.num_nodes = total[kBus] + total[kGen] + total[kLoad];
  for (std::size_t k = 0; k < num_node_kinds; ++k) {
    if (norm.node[k].mean.size() != node_feature_width[k])
      throw ContractViolation("node scaling for " + to_string(static_cast<NodeKind>(k)) + " has wrong width");
    b.node_x[k] = Tensor(total[k], node_feature_width[k]);
  }
  for (std::size_t t = 0; t < num_edge_types; ++t) {
    if (norm.edge[t].mean.size() != edge_feature_width[t])
      throw ContractViolation("edge scaling for " + to_string(static_cast<EdgeType>(t)) + " has wrong width");
    b.edge_x[t] = Tensor(etotal[t], edge_feature_width[t]);
    b.edge_geo[t] = Tensor(etotal[t], t <= tTr ? geo_width : 0);
    b.edge_flow[t] = Tensor(etotal[t], 1);
  }
  b.y = Tensor(b.num_graphs, ydc_width);
  b.slack_mask = Tensor(total[kBus], 1, 1.0);
  std::size_t nbr = 0;
  for (const auto* g : graphs) nbr += g->num_branches;
  const std::array<std::size_t, num_quantities> qrows{total[kBus], total[kBus], total[kGen], total[kGen], nbr};
  for (std::size_t q = 0; q < num_quantities; ++q) b.warm[q] = Tensor(qrows[q], 1);

  std::array<std::size_t, num_node_kinds> off{};
  std::array<std::size_t, num_edge_types> eoff{};
  std::size_t broff = 0;
  for (std::size_t gi = 0; gi < graphs.size(); ++gi) {
    const auto& g = *graphs[gi];
    auto global = [&](std::size_t local) {
      if (local < g.num_buses) return b.kind_offset[kBus] + off[kBus] + local;
      if (local < g.num_buses + g.num_generators) return b.kind_offset[kGen] + off[kGen] + local - g.num_buses;
      return b.kind_offset[kLoad] + off[kLoad] + local - g.num_buses - g.num_generators;
    };
    for (std::size_t k = 0; k < num_node_kinds; ++k) {
      const auto& src = g.node_x[k];
      const auto& st = norm.node[k];
      for (std::size_t r = 0; r < src.rows; ++r) {
        for (std::size_t c = 0; c < src.cols; ++c)
          b.node_x[k](off[k] + r, c) = (src(r, c) - st.mean[c]) / st.scale[c];
        b.node_graph[k].push_back(gi);
      }
    }
    for (std::size_t t = 0; t < num_edge_types; ++t) {
      const auto& src = g.edge_x[t];
      const auto& st = norm.edge[t];
      for (std::size_t r = 0; r < src.rows; ++r) {
        for (std::size_t c = 0; c < src.cols; ++c) {
          const double v = (src(r, c) - st.mean[c]) / st.scale[c];
          b.edge_x[t](eoff[t] + r, c) = v;
          if (c < b.edge_geo[t].cols) b.edge_geo[t](eoff[t] + r, c) = v;
          if (c + 1 == src.cols) b.edge_flow[t](eoff[t] + r, 0) = v;
        }
        b.edge_src[t].push_back(global(g.edge_src[t][r]));
        b.edge_dst[t].push_back(global(g.edge_dst[t][r]));
      }
    }
    for (std::size_t j = 0; j < g.y_dc.size(); ++j) {
      const std::size_t grp = j < g.num_buses ? 0 : (j < g.num_buses + g.num_generators ? 1 : 2);
      b.y(gi, j) = g.y_dc[j] / norm.ydc_scale[grp];
    }
    b.slack_mask(off[kBus] + g.slack, 0) = 0.0;
    for (auto gb : g.gen_bus) b.gen_bus.push_back(off[kBus] + gb);
    for (std::size_t k = 0; k < g.num_branches; ++k) {
      b.branch_from.push_back(off[kBus] + g.branch_from[k]);
      b.branch_to.push_back(off[kBus] + g.branch_to[k]);
      const auto t = static_cast<std::size_t>(g.branch_type[k]);
      b.branch_edge.push_back((t == tTr ? etotal[tAc] : 0) + eoff[t] + g.branch_edge[k]);
      b.branch_graph.push_back(gi);
    }
    const auto w = fields(g.warm);
    const std::array<std::size_t, num_quantities> qoff{off[kBus], off[kBus], off[kGen], off[kGen], broff};
    for (std::size_t q = 0; q < num_quantities; ++q)
      for (std::size_t j = 0; j < w[q]->size(); ++j) b.warm[q](qoff[q] + j, 0) = (*w[q])[j];
    b.buses_per_graph.push_back(g.num_buses);
    b.gens_per_graph.push_back(g.num_generators);
    b.branches_per_graph.push_back(g.num_branches);
    off[kBus] += g.num_buses;
    off[kGen] += g.num_generators;
    off[kLoad] += g.num_loads;
    for (std::size_t t = 0; t < num_edge_types; ++t) eoff[t] += g.edge_src[t].size();
    broff += g.num_branches;
  }
  return b;
}

ParamVars bind(Tape& tape, const ModelParams& params, bool requires_grad) {
  ParamVars pv;
  pv.params = &params;
  for (const auto& t : params.tensors) pv.vars.push_back(tape.leaf(t, requires_grad));
  return pv;
}

ForwardVars forward(Tape& tape, const ParamVars& pv, const GraphBatch& batch) {
  const auto& params = *pv.params;
  const auto& cfg = params.config;
  const auto h = cfg.hidden;
  if (batch.ydc_width != cfg.ydc_width)
    throw ContractViolation("batch ydc_width " + std::to_string(batch.ydc_width) + " != model " +
                            std::to_string(cfg.ydc_width));
  auto mlp = [&](Var x, const std::string& p) {
    const Var hid = ad::relu(ad::add_row(ad::matmul(x, pv[p + ".w0"]), pv[p + ".b0"]));
    return ad::add_row(ad::matmul(hid, pv[p + ".w1"]), pv[p + ".b1"]);
  };

  ForwardVars out;
  std::vector<Var> parts;
  for (std::size_t k = 0; k < num_node_kinds; ++k)
    parts.push_back(mlp(tape.constant(batch.node_x[k]), "enc.node." + to_string(static_cast<NodeKind>(k))));
  Var hcur = ad::concat_rows(parts);
  out.h0 = hcur;

  // Edge embeddings and attention biases stay fixed across layers.
  std::array<Var, num_edge_types> e{}, bias{};
  std::array<bool, num_edge_types> present{};
  for (std::size_t t = 0; t < num_edge_types; ++t) {
    present[t] = !batch.edge_src[t].empty();
    const auto tn = to_string(static_cast<EdgeType>(t));
    if (!present[t]) {
      e[t] = tape.constant(Tensor(0, h));
      continue;
    }
    e[t] = mlp(tape.constant(batch.edge_x[t]), "enc.edge." + tn);
    Var b = mlp(tape.constant(batch.edge_flow[t]), "psi_dc." + tn);
    if (t <= tTr) b = ad::add(b, mlp(tape.constant(batch.edge_geo[t]), "psi_geo." + tn));
    bias[t] = b;
  }
  std::vector<std::size_t> dst_all;
  for (std::size_t t = 0; t < num_edge_types; ++t)
    dst_all.insert(dst_all.end(), batch.edge_dst[t].begin(), batch.edge_dst[t].end());
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(cfg.key));

  const std::array<std::size_t, num_node_kinds> kind_rows{
      batch.node_x[kBus].rows, batch.node_x[kGen].rows, batch.node_x[kLoad].rows};
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const auto lp = "layer" + std::to_string(l) + ".";
    Var m;
    if (!dst_all.empty()) {
      std::vector<Var> logits, msgs;
      for (std::size_t t = 0; t < num_edge_types; ++t) {
        if (!present[t]) continue;
        const auto tp = lp + to_string(static_cast<EdgeType>(t));
        const Var hd = ad::gather_rows(hcur, batch.edge_dst[t]);
        const Var kin = ad::concat_cols({ad::gather_rows(hcur, batch.edge_src[t]), e[t]});
        const Var q = ad::matmul(hd, pv[tp + ".wq"]);
        const Var k = ad::matmul(kin, pv[tp + ".wk"]);
        logits.push_back(ad::add(ad::scale(ad::row_sum(ad::mul(q, k)), inv_sqrt_dk), bias[t]));
        msgs.push_back(ad::matmul(kin, pv[tp + ".wv"]));
      }
      const Var alpha = ad::softmax_over_segments(ad::concat_rows(logits), dst_all, batch.num_nodes);
      out.alpha_last = alpha;
      m = ad::segment_sum(ad::mul_rows(ad::concat_rows(msgs), alpha), dst_all, batch.num_nodes);
    } else {
      m = tape.constant(Tensor(batch.num_nodes, h));
    }
    std::vector<Var> next;
    for (std::size_t k = 0; k < num_node_kinds; ++k) {
      const auto kp = lp + to_string(static_cast<NodeKind>(k));
      const Var hk = ad::slice_rows(hcur, batch.kind_offset[k], kind_rows[k]);
      const Var mk = ad::slice_rows(m, batch.kind_offset[k], kind_rows[k]);
      const Var upd = ad::relu(ad::matmul(ad::concat_cols({hk, mk}), pv[kp + ".wh"]));
      next.push_back(ad::layer_norm(ad::add(hk, upd), pv[kp + ".ln_gain"], pv[kp + ".ln_bias"]));
    }
    hcur = ad::concat_rows(next);
  }
  out.h = hcur;

  const std::size_t nb = kind_rows[kBus];
  const std::size_t ng = kind_rows[kGen];
  const std::size_t nl = batch.branch_from.size();
  const Var hb = ad::slice_rows(hcur, 0, nb);
  out.z = ad::mean_over_segments(hb, batch.node_graph[kBus], batch.num_graphs);
  const Var y = tape.constant(batch.y);

  auto onehot = [&](std::size_t rows, std::size_t which) {
    Tensor t(rows, 3);
    for (std::size_t r = 0; r < rows; ++r) t(r, which) = 1.0;
    return tape.constant(std::move(t));
  };
  auto zeros = [&](std::size_t rows) { return tape.constant(Tensor(rows, h)); };
  std::vector<std::size_t> gen_graph = batch.node_graph[kGen];
  const Var bus_in = ad::concat_cols({hb, zeros(nb), zeros(nb), ad::gather_rows(out.z, batch.node_graph[kBus]),
                                      ad::gather_rows(y, batch.node_graph[kBus]), onehot(nb, 0)});
  const Var gen_in =
      ad::concat_cols({ad::slice_rows(hcur, batch.kind_offset[kGen], ng), ad::gather_rows(hcur, batch.gen_bus),
                       zeros(ng), ad::gather_rows(out.z, gen_graph), ad::gather_rows(y, gen_graph), onehot(ng, 1)});
  const Var e_branch = ad::gather_rows(ad::concat_rows({e[tAc], e[tTr]}), batch.branch_edge);
  const Var br_in = ad::concat_cols({ad::gather_rows(hcur, batch.branch_from), ad::gather_rows(hcur, batch.branch_to),
                                     e_branch, ad::gather_rows(out.z, batch.branch_graph),
                                     ad::gather_rows(y, batch.branch_graph), onehot(nl, 2)});
  const Var x = ad::concat_rows({bus_in, gen_in, br_in});
  Var o = ad::relu(ad::add_row(ad::matmul(x, pv["head.w0"]), pv["head.b0"]));
  o = ad::relu(ad::add_row(ad::matmul(o, pv["head.w1"]), pv["head.b1"]));
  o = ad::add_row(ad::matmul(o, pv["head.w2"]), pv["head.b2"]);

  const std::array<std::size_t, num_quantities> row0{0, 0, nb, nb, nb + ng};
  const std::array<std::size_t, num_quantities> rows{nb, nb, ng, ng, nl};
  const Var mask = tape.constant(batch.slack_mask);
  for (std::size_t q = 0; q < num_quantities; ++q) {
    Var raw = ad::scale(ad::slice_cols(ad::slice_rows(o, row0[q], rows[q]), q, 1), params.norm.out_scale[q]);
    if (q == static_cast<std::size_t>(Quantity::theta)) raw = ad::mul(raw, mask);
    const Var warm = tape.constant(batch.warm[q]);
    if (cfg.mode == Mode::residual) {
      out.delta[q] = raw;
      out.value[q] = ad::add(warm, raw);
    } else {
      out.value[q] = raw;
      out.delta[q] = ad::sub(raw, warm);
    }
  }
  return out;
}

std::vector<Prediction> predict(const ModelParams& params, std::span<const Sample* const> samples) {
  std::vector<Prediction> out;
  constexpr std::size_t chunk = 64;
  for (std::size_t s0 = 0; s0 < samples.size(); s0 += chunk) {
    const auto n = std::min(chunk, samples.size() - s0);
    std::vector<EncodedGraph> enc;
    for (std::size_t i = 0; i < n; ++i) enc.push_back(encode_graph(*samples[s0 + i]));
    std::vector<const EncodedGraph*> ptrs;
    for (const auto& g : enc) ptrs.push_back(&g);
    const auto batch = make_batch(ptrs, params.norm, params.config.ydc_width);
    Tape tape;
    const auto pv = bind(tape, params, false);
    const auto fw = forward(tape, pv, batch);
    std::array<std::size_t, num_quantities> off{};
    for (std::size_t i = 0; i < n; ++i) {
      const std::array<std::size_t, num_quantities> len{batch.buses_per_graph[i], batch.buses_per_graph[i],
                                                        batch.gens_per_graph[i], batch.gens_per_graph[i],
                                                        batch.branches_per_graph[i]};
      std::array<std::vector<double>, num_quantities> val, del;
      for (std::size_t q = 0; q < num_quantities; ++q) {
        const auto& vt = fw.value[q].value().data;
        const auto& dt = fw.delta[q].value().data;
        val[q].assign(vt.begin() + static_cast<std::ptrdiff_t>(off[q]),
                      vt.begin() + static_cast<std::ptrdiff_t>(off[q] + len[q]));
        del[q].assign(dt.begin() + static_cast<std::ptrdiff_t>(off[q]),
                      dt.begin() + static_cast<std::ptrdiff_t>(off[q] + len[q]));
        off[q] += len[q];
      }
      Prediction p;
      p.delta = ResidualVector{del[0], del[1], del[2], del[3], del[4]};
      if (params.config.mode == Mode::residual) {
        p.point = reconstruct(samples[s0 + i]->warm, p.delta);
      } else {
        p.point.v = val[0];
        p.point.theta = val[1];
        p.point.p_g = val[2];
        p.point.q_g = val[3];
        p.point.s_branch = val[4];
      }
      out.push_back(std::move(p));
    }
  }
  return out;
}

Prediction predict(const ModelParams& params, const Sample& sample) {
  const Sample* p = &sample;
  return predict(params, std::span<const Sample* const>(&p, 1)).front();
}

namespace {

json stats_to_json(const ColumnStats& s) { return {{"mean", s.mean}, {"scale", s.scale}}; }

template <class T>
T get_field(const json& j, const char* key, const std::string& ctx) {
  if (!j.is_object() || !j.contains(key)) throw ParseError(ctx + "." + key + ": missing field");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ParseError(ctx + "." + key + ": ill-typed");
  }
}

ColumnStats stats_from_json(const json& j, const std::string& ctx, std::size_t width) {
  ColumnStats s{get_field<std::vector<double>>(j, "mean", ctx), get_field<std::vector<double>>(j, "scale", ctx)};
  if (s.mean.size() != width || s.scale.size() != width)
    throw ContractViolation(ctx + ": expected " + std::to_string(width) + " columns");
  return s;
}

}  // namespace

json checkpoint_to_json(const ModelParams& params) {
  const auto& c = params.config;
  json j;
  j["format"] = "resopf-checkpoint";
  j["version"] = 1;
  j["config"] = {{"hidden", c.hidden}, {"key", c.key},   {"layers", c.layers},
                 {"ydc_width", c.ydc_width}, {"mode", to_string(c.mode)}, {"seed", c.seed}};
  const auto& n = params.norm;
  json nj;
  for (std::size_t k = 0; k < num_node_kinds; ++k) nj["node"][to_string(static_cast<NodeKind>(k))] = stats_to_json(n.node[k]);
  for (std::size_t t = 0; t < num_edge_types; ++t) nj["edge"][to_string(static_cast<EdgeType>(t))] = stats_to_json(n.edge[t]);
  nj["ydc_scale"] = n.ydc_scale;
  nj["out_mean"] = n.out_mean;
  nj["out_scale"] = n.out_scale;
  nj["label_scale"] = n.label_scale;
  j["normalizer"] = std::move(nj);
  json ps = json::array();
  for (std::size_t i = 0; i < params.names.size(); ++i) {
    const auto& t = params.tensors[i];
    ps.push_back({{"name", params.names[i]}, {"shape", {t.rows, t.cols}}, {"data", t.data}});
  }
  j["params"] = std::move(ps);
  return j;
}

ModelParams checkpoint_from_json(const json& j) {
  if (get_field<std::string>(j, "format", "checkpoint") != "resopf-checkpoint")
    throw ParseError("checkpoint.format: not a model checkpoint");
  if (get_field<int>(j, "version", "checkpoint") != 1) throw ParseError("checkpoint.version: unsupported");
  const auto& cj = j.at("config");
  ModelConfig c;
  c.hidden = get_field<std::size_t>(cj, "hidden", "checkpoint.config");
  c.key = get_field<std::size_t>(cj, "key", "checkpoint.config");
  c.layers = get_field<std::size_t>(cj, "layers", "checkpoint.config");
  c.ydc_width = get_field<std::size_t>(cj, "ydc_width", "checkpoint.config");
  c.mode = mode_from_string(get_field<std::string>(cj, "mode", "checkpoint.config"));
  c.seed = get_field<std::uint64_t>(cj, "seed", "checkpoint.config");
  if (!j.contains("normalizer")) throw ParseError("checkpoint.normalizer: missing field");
  const auto& nj = j.at("normalizer");
  Normalizer n;
  for (std::size_t k = 0; k < num_node_kinds; ++k) {
    const auto name = to_string(static_cast<NodeKind>(k));
    if (!nj.contains("node") || !nj["node"].contains(name)) throw ParseError("checkpoint.normalizer.node." + name + ": missing field");
    n.node[k] = stats_from_json(nj["node"][name], "checkpoint.normalizer.node." + name, node_feature_width[k]);
  }
  for (std::size_t t = 0; t < num_edge_types; ++t) {
    const auto name = to_string(static_cast<EdgeType>(t));
    if (!nj.contains("edge") || !nj["edge"].contains(name)) throw ParseError("checkpoint.normalizer.edge." + name + ": missing field");
    n.edge[t] = stats_from_json(nj["edge"][name], "checkpoint.normalizer.edge." + name, edge_feature_width[t]);
  }
  n.ydc_scale = get_field<std::array<double, 3>>(nj, "ydc_scale", "checkpoint.normalizer");
  n.out_mean = get_field<std::array<double, num_quantities>>(nj, "out_mean", "checkpoint.normalizer");
  n.out_scale = get_field<std::array<double, num_quantities>>(nj, "out_scale", "checkpoint.normalizer");
  n.label_scale = get_field<std::array<double, num_quantities>>(nj, "label_scale", "checkpoint.normalizer");

  ModelParams p = init_params(c, n);
  if (!j.contains("params") || !j["params"].is_array()) throw ParseError("checkpoint.params: missing field");
  const auto& ps = j["params"];
  if (ps.size() != p.names.size())
    throw ContractViolation("checkpoint holds " + std::to_string(ps.size()) + " tensors, configuration needs " +
                            std::to_string(p.names.size()));
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const auto ctx = "checkpoint.params[" + std::to_string(i) + "]";
    const auto name = get_field<std::string>(ps[i], "name", ctx);
    const auto shape = get_field<std::array<std::size_t, 2>>(ps[i], "shape", ctx);
    auto data = get_field<std::vector<double>>(ps[i], "data", ctx);
    auto& t = p.at(name);
    if (shape[0] != t.rows || shape[1] != t.cols || data.size() != t.size())
      throw ContractViolation(ctx + " (" + name + "): shape [" + std::to_string(shape[0]) + "x" +
                              std::to_string(shape[1]) + "] does not match expected " + ad::shape_string(t));
    t.data = std::move(data);
  }
  return p;
}

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path) {
  write_text_file(path, checkpoint_to_json(params).dump() + "\n");
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw ParseError("checkpoint " + path.string() + ": " + e.what());
  }
  return checkpoint_from_json(j);
}

}  // namespace resopf::gnn
