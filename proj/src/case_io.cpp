#include "resopf/case_io.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include "resopf/errors.hpp"

namespace resopf {

using nlohmann::json;

namespace {

std::string field(std::string_view ctx, std::string_view key) {
  return std::string(ctx) + "." + std::string(key);
}

const json& require(const json& obj, std::string_view key, std::string_view ctx) {
  if (!obj.is_object()) throw ParseError(std::string(ctx) + ": expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(field(ctx, key) + ": missing field");
  return *it;
}

double number(const json& obj, std::string_view key, std::string_view ctx) {
  const auto& v = require(obj, key, ctx);
  if (!v.is_number()) throw ParseError(field(ctx, key) + ": ill-typed, expected a number");
  return v.get<double>();
}

double number_or(const json& obj, std::string_view key, std::string_view ctx, double fallback) {
  if (!obj.contains(key)) return fallback;
  return number(obj, key, ctx);
}

int integer(const json& obj, std::string_view key, std::string_view ctx) {
  const auto& v = require(obj, key, ctx);
  if (!v.is_number_integer()) throw ParseError(field(ctx, key) + ": ill-typed, expected an integer");
  return v.get<int>();
}

const json& array(const json& obj, std::string_view key, std::string_view ctx) {
  const auto& v = require(obj, key, ctx);
  if (!v.is_array()) throw ParseError(field(ctx, key) + ": ill-typed, expected an array");
  return v;
}

std::vector<double> number_array(const json& v, std::string_view ctx) {
  if (!v.is_array()) throw ParseError(std::string(ctx) + ": ill-typed, expected an array");
  std::vector<double> out;
  out.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number())
      throw ParseError(std::string(ctx) + "[" + std::to_string(i) + "]: ill-typed, expected a number");
    out.push_back(v[i].get<double>());
  }
  return out;
}

std::string item(std::string_view name, std::size_t i) {
  return std::string(name) + "[" + std::to_string(i) + "]";
}

BusKind parse_bus_kind(const json& obj, std::string_view ctx) {
  const auto& v = require(obj, "kind", ctx);
  if (!v.is_string()) throw ParseError(field(ctx, "kind") + ": ill-typed, expected a string");
  const auto s = v.get<std::string>();
  if (s == "slack") return BusKind::slack;
  if (s == "pv") return BusKind::pv;
  if (s == "pq") return BusKind::pq;
  throw ParseError(field(ctx, "kind") + ": unknown bus kind '" + s + "'");
}

std::size_t lookup(const std::map<int, std::size_t>& index, int id, const std::string& ctx) {
  auto it = index.find(id);
  if (it == index.end())
    throw ValidationError(ctx + " references unknown bus id " + std::to_string(id));
  return it->second;
}

}  // namespace

OperatingPoint point_from_json(const json& j, std::string_view context) {
  OperatingPoint pt;
  pt.v = number_array(require(j, "v", context), field(context, "v"));
  pt.theta = number_array(require(j, "theta", context), field(context, "theta"));
  pt.p_g = number_array(require(j, "p_g", context), field(context, "p_g"));
  pt.q_g = number_array(require(j, "q_g", context), field(context, "q_g"));
  if (j.contains("s_branch"))
    pt.s_branch = number_array(j["s_branch"], field(context, "s_branch"));
  return pt;
}

json point_to_json(const OperatingPoint& pt) {
  json j;
  j["v"] = pt.v;
  j["theta"] = pt.theta;
  j["p_g"] = pt.p_g;
  j["q_g"] = pt.q_g;
  if (pt.has_branch_flows()) j["s_branch"] = pt.s_branch;
  return j;
}

Scenario parse_case(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what());
  }
  const std::string root = "case";
  const double base_mva = number(doc, "base_mva", root);

  std::vector<Bus> buses;
  std::map<int, std::size_t> index;
  const auto& jbuses = array(doc, "buses", root);
  for (std::size_t i = 0; i < jbuses.size(); ++i) {
    const auto ctx = item("buses", i);
    const auto& jb = jbuses[i];
    Bus bus;
    bus.id = integer(jb, "id", ctx);
    bus.v_min = number(jb, "v_min", ctx);
    bus.v_max = number(jb, "v_max", ctx);
    bus.kind = parse_bus_kind(jb, ctx);
    bus.shunt_g = number_or(jb, "shunt_g", ctx, 0.0);
    bus.shunt_b = number_or(jb, "shunt_b", ctx, 0.0);
    if (!index.emplace(bus.id, i).second)
      throw ValidationError("duplicate bus id " + std::to_string(bus.id));
    buses.push_back(bus);
  }

  std::vector<Branch> branches;
  const auto& jbr = array(doc, "branches", root);
  for (std::size_t k = 0; k < jbr.size(); ++k) {
    const auto ctx = item("branches", k);
    const auto& j = jbr[k];
    Branch br;
    br.from = lookup(index, integer(j, "from", ctx), ctx);
    br.to = lookup(index, integer(j, "to", ctx), ctx);
    br.r = number(j, "r", ctx);
    br.x = number(j, "x", ctx);
    br.b_charge = number_or(j, "b_charge", ctx, 0.0);
    br.tap = number_or(j, "tap", ctx, 1.0);
    br.shift = number_or(j, "shift", ctx, 0.0);
    br.s_max = number(j, "s_max", ctx);
    br.theta_min = number_or(j, "theta_min", ctx, -std::numbers::pi);
    br.theta_max = number_or(j, "theta_max", ctx, std::numbers::pi);
    if (j.contains("kind")) {
      if (!j["kind"].is_string()) throw ParseError(field(ctx, "kind") + ": ill-typed, expected a string");
      const auto s = j["kind"].get<std::string>();
      if (s == "ac_line") {
        br.kind = BranchKind::ac_line;
      } else if (s == "transformer") {
        br.kind = BranchKind::transformer;
      } else {
        throw ParseError(field(ctx, "kind") + ": unknown branch kind '" + s + "'");
      }
    } else {
      br.kind = (br.tap == 1.0 && br.shift == 0.0) ? BranchKind::ac_line : BranchKind::transformer;
    }
    branches.push_back(br);
  }

  std::vector<Generator> gens;
  const auto& jg = array(doc, "generators", root);
  for (std::size_t g = 0; g < jg.size(); ++g) {
    const auto ctx = item("generators", g);
    const auto& j = jg[g];
    Generator gen;
    gen.id = j.contains("id") ? integer(j, "id", ctx) : static_cast<int>(g);
    gen.bus = lookup(index, integer(j, "bus", ctx), ctx);
    gen.p_min = number(j, "p_min", ctx);
    gen.p_max = number(j, "p_max", ctx);
    gen.q_min = number(j, "q_min", ctx);
    gen.q_max = number(j, "q_max", ctx);
    const auto cost = number_array(require(j, "cost", ctx), field(ctx, "cost"));
    if (cost.size() != 3) throw ParseError(field(ctx, "cost") + ": expected [c2, c1, c0]");
    gen.cost = {cost[0], cost[1], cost[2]};
    gens.push_back(gen);
  }

  std::vector<Load> loads;
  const auto& jl = array(doc, "loads", root);
  for (std::size_t l = 0; l < jl.size(); ++l) {
    const auto ctx = item("loads", l);
    const auto& j = jl[l];
    loads.push_back({lookup(index, integer(j, "bus", ctx), ctx), number(j, "p_d", ctx),
                     number(j, "q_d", ctx)});
  }

  Scenario sc{Network(base_mva, std::move(buses), std::move(branches), std::move(gens),
                      std::move(loads)),
              std::nullopt, {}};
  if (doc.contains("labels_ac") && !doc["labels_ac"].is_null()) {
    auto pt = point_from_json(doc["labels_ac"], "labels_ac");
    try {
      check_dimensions(sc.network, pt);
    } catch (const ContractViolation& e) {
      throw ParseError(std::string("labels_ac: ") + e.what());
    }
    sc.labels = std::move(pt);
  }
  if (doc.contains("provenance")) {
    if (!doc["provenance"].is_string()) throw ParseError("case.provenance: ill-typed, expected a string");
    sc.provenance = doc["provenance"].get<std::string>();
  }
  return sc;
}

Scenario load_case(const std::filesystem::path& path) { return parse_case(read_text_file(path)); }

json case_to_json(const Network& net, const OperatingPoint* labels, std::string_view provenance) {
  json doc;
  doc["base_mva"] = net.base_mva();
  const auto buses = net.buses();
  json jb = json::array();
  for (const auto& b : buses) {
    jb.push_back({{"id", b.id},
                  {"v_min", b.v_min},
                  {"v_max", b.v_max},
                  {"kind", to_string(b.kind)},
                  {"shunt_g", b.shunt_g},
                  {"shunt_b", b.shunt_b}});
  }
  doc["buses"] = std::move(jb);
  json jbr = json::array();
  for (const auto& br : net.branches()) {
    jbr.push_back({{"from", buses[br.from].id},
                   {"to", buses[br.to].id},
                   {"r", br.r},
                   {"x", br.x},
                   {"b_charge", br.b_charge},
                   {"tap", br.tap},
                   {"shift", br.shift},
                   {"s_max", br.s_max},
                   {"theta_min", br.theta_min},
                   {"theta_max", br.theta_max},
                   {"kind", to_string(br.kind)}});
  }
  doc["branches"] = std::move(jbr);
  json jg = json::array();
  for (const auto& g : net.generators()) {
    jg.push_back({{"id", g.id},
                  {"bus", buses[g.bus].id},
                  {"p_min", g.p_min},
                  {"p_max", g.p_max},
                  {"q_min", g.q_min},
                  {"q_max", g.q_max},
                  {"cost", {g.cost.c2, g.cost.c1, g.cost.c0}}});
  }
  doc["generators"] = std::move(jg);
  json jl = json::array();
  for (const auto& l : net.loads()) {
    jl.push_back({{"bus", buses[l.bus].id}, {"p_d", l.p_d}, {"q_d", l.q_d}});
  }
  doc["loads"] = std::move(jl);
  if (labels != nullptr) doc["labels_ac"] = point_to_json(*labels);
  if (!provenance.empty()) doc["provenance"] = std::string(provenance);
  return doc;
}

std::string serialize_case(const Network& net, const OperatingPoint* labels,
                           std::string_view provenance) {
  return case_to_json(net, labels, provenance).dump(1) + "\n";
}

// OPFData record layout (per-unit):
//   grid.nodes.bus        [base_kv, bus_type, vmin, vmax]
//   grid.nodes.generator  [mbase, pg, pmin, pmax, qg, qmin, qmax, vg, c2, c1, c0]
//   grid.nodes.load       [pd, qd]
//   grid.nodes.shunt      [bs, gs]
//   grid.edges.ac_line     features [angmin, angmax, b_fr, b_to, r, x, rate_a, rate_b, rate_c]
//   grid.edges.transformer features [angmin, angmax, r, x, rate_a, rate_b, rate_c, tap, shift, b_fr, b_to]
//   grid.edges.{generator,load,shunt}_link  senders = element, receivers = bus
//   solution.nodes.bus [va, vm], solution.nodes.generator [pg, qg]
//   solution.edges.{ac_line,transformer}.features [pt, qt, pf, qf]
ImportResult import_opfdata(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what());
  }
  std::vector<std::string> warnings;
  auto warn_unknown = [&warnings](const json& obj, const std::set<std::string>& known,
                                  const std::string& ctx) {
    if (!obj.is_object()) return;
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      if (!known.contains(it.key())) warnings.push_back("ignoring unknown field " + ctx + "." + it.key());
    }
  };
  warn_unknown(doc, {"grid", "solution", "metadata"}, "record");

  const auto& grid = require(doc, "grid", "record");
  warn_unknown(grid, {"nodes", "edges", "context"}, "grid");
  const auto& nodes = require(grid, "nodes", "grid");
  const auto& edges = require(grid, "edges", "grid");
  warn_unknown(nodes, {"bus", "generator", "load", "shunt"}, "grid.nodes");
  warn_unknown(edges, {"ac_line", "transformer", "generator_link", "load_link", "shunt_link"},
               "grid.edges");

  double base_mva = 100.0;
  if (grid.contains("context")) {
    const json* c = &grid["context"];
    while (c->is_array() && !c->empty()) c = &(*c)[0];
    if (!c->is_number()) throw ParseError("grid.context: ill-typed, expected a number");
    base_mva = c->get<double>();
  }

  auto rows = [](const json& parent, std::string_view key, std::string_view ctx,
                 std::size_t width) -> std::vector<std::vector<double>> {
    std::vector<std::vector<double>> out;
    if (!parent.contains(key)) return out;
    const auto& arr = parent[std::string(key)];
    const auto name = field(ctx, key);
    if (!arr.is_array()) throw ParseError(name + ": ill-typed, expected an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      auto r = number_array(arr[i], item(name, i));
      if (r.size() < width)
        throw ParseError(item(name, i) + ": expected " + std::to_string(width) + " features");
      out.push_back(std::move(r));
    }
    return out;
  };
  auto links = [](const json& parent, std::string_view key, std::string_view ctx) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    if (!parent.contains(key)) return out;
    const auto& e = parent[std::string(key)];
    const auto name = field(ctx, key);
    const auto s = number_array(require(e, "senders", name), field(name, "senders"));
    const auto r = number_array(require(e, "receivers", name), field(name, "receivers"));
    if (s.size() != r.size()) throw ParseError(name + ": senders/receivers length mismatch");
    for (std::size_t i = 0; i < s.size(); ++i)
      out.emplace_back(static_cast<std::size_t>(s[i]), static_cast<std::size_t>(r[i]));
    return out;
  };

  const auto bus_rows = rows(nodes, "bus", "grid.nodes", 4);
  if (bus_rows.empty()) throw ParseError("grid.nodes.bus: missing field");
  std::vector<Bus> buses;
  for (std::size_t i = 0; i < bus_rows.size(); ++i) {
    const auto& r = bus_rows[i];
    Bus b;
    b.id = static_cast<int>(i);
    const int type = static_cast<int>(r[1]);
    if (type == 3) {
      b.kind = BusKind::slack;
    } else if (type == 2) {
      b.kind = BusKind::pv;
    } else if (type == 1) {
      b.kind = BusKind::pq;
    } else {
      throw ValidationError(item("grid.nodes.bus", i) + ": unsupported bus type " + std::to_string(type));
    }
    b.v_min = r[2];
    b.v_max = r[3];
    buses.push_back(b);
  }
  const auto nb = buses.size();
  auto bus_of = [nb](std::size_t idx, const std::string& ctx) {
    if (idx >= nb) throw ValidationError(ctx + " references unknown bus " + std::to_string(idx));
    return idx;
  };

  const auto shunt_rows = rows(nodes, "shunt", "grid.nodes", 2);
  for (auto [s, b] : links(edges, "shunt_link", "grid.edges")) {
    if (s >= shunt_rows.size()) throw ValidationError("shunt_link references unknown shunt");
    auto& bus = buses[bus_of(b, "shunt_link")];
    bus.shunt_b += shunt_rows[s][0];
    bus.shunt_g += shunt_rows[s][1];
  }

  std::vector<Branch> branches;
  auto add_branches = [&](std::string_view type, std::size_t width, bool transformer) {
    if (!edges.contains(type)) return;
    const auto& e = edges[std::string(type)];
    const auto ctx = field("grid.edges", type);
    const auto feats = rows(e, "features", ctx, width);
    const auto s = number_array(require(e, "senders", ctx), field(ctx, "senders"));
    const auto r = number_array(require(e, "receivers", ctx), field(ctx, "receivers"));
    if (s.size() != feats.size() || r.size() != feats.size())
      throw ParseError(ctx + ": senders/receivers/features length mismatch");
    for (std::size_t k = 0; k < feats.size(); ++k) {
      const auto& f = feats[k];
      Branch br;
      br.from = bus_of(static_cast<std::size_t>(s[k]), item(ctx, k));
      br.to = bus_of(static_cast<std::size_t>(r[k]), item(ctx, k));
      br.theta_min = f[0];
      br.theta_max = f[1];
      if (transformer) {
        br.r = f[2];
        br.x = f[3];
        br.s_max = f[4];
        br.tap = f[7] == 0.0 ? 1.0 : f[7];
        br.shift = f[8];
        br.b_charge = f[9] + f[10];
        br.kind = BranchKind::transformer;
      } else {
        br.b_charge = f[2] + f[3];
        br.r = f[4];
        br.x = f[5];
        br.s_max = f[6];
        br.kind = BranchKind::ac_line;
      }
      if (br.s_max <= 0.0) br.s_max = 99.0;
      branches.push_back(br);
    }
  };
  add_branches("ac_line", 9, false);
  add_branches("transformer", 11, true);

  const auto gen_rows = rows(nodes, "generator", "grid.nodes", 11);
  std::vector<std::size_t> gen_bus(gen_rows.size(), nb);
  for (auto [g, b] : links(edges, "generator_link", "grid.edges")) {
    if (g >= gen_rows.size()) throw ValidationError("generator_link references unknown generator");
    gen_bus[g] = bus_of(b, "generator_link");
  }
  std::vector<Generator> gens;
  for (std::size_t g = 0; g < gen_rows.size(); ++g) {
    const auto& r = gen_rows[g];
    if (gen_bus[g] >= nb) throw ValidationError(item("grid.nodes.generator", g) + " has no generator_link");
    Generator gen;
    gen.id = static_cast<int>(g);
    gen.bus = gen_bus[g];
    gen.p_min = r[2];
    gen.p_max = r[3];
    gen.q_min = r[5];
    gen.q_max = r[6];
    gen.cost = {r[8], r[9], r[10]};
    gens.push_back(gen);
  }

  const auto load_rows = rows(nodes, "load", "grid.nodes", 2);
  std::vector<Load> loads;
  std::vector<std::size_t> load_bus(load_rows.size(), nb);
  for (auto [l, b] : links(edges, "load_link", "grid.edges")) {
    if (l >= load_rows.size()) throw ValidationError("load_link references unknown load");
    load_bus[l] = bus_of(b, "load_link");
  }
  for (std::size_t l = 0; l < load_rows.size(); ++l) {
    if (load_bus[l] >= nb) throw ValidationError(item("grid.nodes.load", l) + " has no load_link");
    loads.push_back({load_bus[l], load_rows[l][0], load_rows[l][1]});
  }

  ImportResult result{Scenario{Network(base_mva, std::move(buses), std::move(branches),
                                       std::move(gens), std::move(loads)),
                               std::nullopt, "opfdata"},
                      std::move(warnings)};

  if (doc.contains("solution")) {
    const auto& sol = doc["solution"];
    const auto& snodes = require(sol, "nodes", "solution");
    const auto sbus = rows(snodes, "bus", "solution.nodes", 2);
    const auto sgen = rows(snodes, "generator", "solution.nodes", 2);
    OperatingPoint pt;
    for (const auto& r : sbus) {
      pt.theta.push_back(r[0]);
      pt.v.push_back(r[1]);
    }
    for (const auto& r : sgen) {
      pt.p_g.push_back(r[0]);
      pt.q_g.push_back(r[1]);
    }
    if (sol.contains("edges")) {
      const auto& sedges = sol["edges"];
      for (std::string_view type : {"ac_line", "transformer"}) {
        for (const auto& r : rows(sedges.contains(type) ? sedges[std::string(type)] : json::object(),
                                  "features", field("solution.edges", type), 4)) {
          pt.s_branch.push_back(std::hypot(r[2], r[3]));
        }
      }
    }
    try {
      check_dimensions(result.scenario.network, pt);
    } catch (const ContractViolation& e) {
      throw ParseError(std::string("solution: ") + e.what());
    }
    result.scenario.labels = std::move(pt);
  }
  return result;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

}  // namespace resopf
