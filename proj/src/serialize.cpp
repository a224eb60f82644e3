#include "regalloc/serialize.hpp"

#include "regalloc/error.hpp"

namespace regalloc {

Agent parse_agent(std::string_view s) {
  for (Agent a : {Agent::NodeSelector, Agent::TaskSelector, Agent::Splitter, Agent::Coloring, Agent::None})
    if (agent_name(a) == s) return a;
  throw Error("unknown agent '" + std::string(s) + "'");
}

Phase parse_phase(std::string_view s) {
  for (Phase p : {Phase::AwaitNodeSelect, Phase::AwaitTaskSelect, Phase::AwaitSplitPoint, Phase::AwaitColor, Phase::Done})
    if (phase_name(p) == s) return p;
  throw Error("unknown phase '" + std::string(s) + "'");
}

Annotation parse_annotation(std::string_view s) {
  for (Annotation a : {Annotation::NotVisited, Annotation::Spill, Annotation::Colored})
    if (annotation_name(a) == s) return a;
  throw Error("unknown annotation '" + std::string(s) + "'");
}

void to_json(Json& j, const LiveRange& r) { j = Json::array({r.start, r.end}); }
void from_json(const Json& j, LiveRange& r) {
  r.start = j.at(0).get<std::uint32_t>();
  r.end = j.at(1).get<std::uint32_t>();
}

void to_json(Json& j, const NodeInfo& n) {
  j = Json{{"name", n.name},   {"is_phys", n.is_phys}, {"type", n.type},
           {"weight", n.weight}, {"annotation", annotation_name(n.annotation)}, {"range", n.range}};
  if (!n.features.empty()) j["features"] = n.features;
}
void from_json(const Json& j, NodeInfo& n) {
  n.name = j.at("name").get<std::string>();
  n.is_phys = j.at("is_phys").get<bool>();
  n.type = j.at("type").get<std::string>();
  n.weight = j.at("weight").get<double>();
  n.annotation = parse_annotation(j.at("annotation").get<std::string>());
  n.range = j.at("range").get<LiveRange>();
  n.features = j.value("features", Matrix{});
}

void to_json(Json& j, const Observation& o) {
  j = Json{{"agent", agent_name(o.agent)}, {"phase", phase_name(o.phase)}, {"step", o.step}, {"mask", o.mask}};
  switch (o.phase) {
    case Phase::AwaitNodeSelect:
      j["nodes"] = o.nodes;
      j["edges"] = o.edges;
      break;
    case Phase::AwaitTaskSelect:
      j["vertex"] = o.vertex;
      j["chi_size"] = o.chi_size;
      j["degree"] = o.degree;
      j["num_uses"] = o.num_uses;
      j["weight"] = o.weight;
      break;
    case Phase::AwaitSplitPoint:
      j["vertex"] = o.vertex;
      j["weight"] = o.weight;
      j["use_points"] = o.use_points;
      j["use_weights"] = o.use_weights;
      j["distances"] = o.distances;
      break;
    case Phase::AwaitColor:
      j["vertex"] = o.vertex;
      j["weight"] = o.weight;
      j["chi_size"] = o.chi_size;
      j["uncolored"] = o.uncolored;
      break;
    case Phase::Done: break;
  }
  if (!o.vertex_features.empty()) j["vertex_features"] = o.vertex_features;
}
void from_json(const Json& j, Observation& o) {
  o = Observation{};
  o.agent = parse_agent(j.at("agent").get<std::string>());
  o.phase = parse_phase(j.at("phase").get<std::string>());
  o.step = j.at("step").get<std::uint64_t>();
  o.mask = j.at("mask").get<std::vector<std::string>>();
  o.nodes = j.value("nodes", std::vector<NodeInfo>{});
  o.edges = j.value("edges", std::vector<std::pair<std::size_t, std::size_t>>{});
  o.vertex = j.value("vertex", std::string{});
  o.vertex_features = j.value("vertex_features", Matrix{});
  o.chi_size = j.value("chi_size", std::size_t{0});
  o.degree = j.value("degree", std::size_t{0});
  o.num_uses = j.value("num_uses", std::size_t{0});
  o.weight = j.value("weight", 0.0);
  o.use_points = j.value("use_points", std::vector<std::uint32_t>{});
  o.use_weights = j.value("use_weights", std::vector<double>{});
  o.distances = j.value("distances", std::vector<std::uint32_t>{});
  o.uncolored = j.value("uncolored", std::size_t{0});
}

void to_json(Json& j, const GraphUpdate& u) {
  j = Json{{"removed", u.removed},
           {"added", u.added},
           {"edges_added", u.edges_added},
           {"edges_removed", u.edges_removed},
           {"move_points", u.move_points}};
}
void from_json(const Json& j, GraphUpdate& u) {
  u.removed = j.at("removed").get<std::string>();
  u.added = j.at("added").get<std::vector<NodeInfo>>();
  u.edges_added = j.at("edges_added").get<std::vector<std::pair<std::string, std::string>>>();
  u.edges_removed = j.at("edges_removed").get<std::vector<std::pair<std::string, std::string>>>();
  u.move_points = j.at("move_points").get<std::vector<std::uint32_t>>();
}

void to_json(Json& j, const StepInfo& s) {
  j = Json::object();
  if (s.task_credit) j["task_credit"] = *s.task_credit;
  if (s.node_credit) j["node_credit"] = *s.node_credit;
  if (s.graph_update) j["graph_update"] = *s.graph_update;
}
void from_json(const Json& j, StepInfo& s) {
  s = StepInfo{};
  if (j.contains("task_credit")) s.task_credit = j["task_credit"].get<double>();
  if (j.contains("node_credit")) s.node_credit = j["node_credit"].get<double>();
  if (j.contains("graph_update")) s.graph_update = j["graph_update"].get<GraphUpdate>();
}

void to_json(Json& j, const EnvConfig& c) {
  j = Json{{"min_vertices", c.min_vertices}, {"max_vertices", c.max_vertices}, {"k_min_uses", c.k_min_uses},
           {"w_o", c.w_o},                   {"w_a", c.w_a}};
  j["split_limit"] = c.split_limit ? Json(*c.split_limit) : Json(nullptr);
}
void from_json(const Json& j, EnvConfig& c) {
  c = EnvConfig{};
  c.min_vertices = j.value("min_vertices", c.min_vertices);
  c.max_vertices = j.value("max_vertices", c.max_vertices);
  c.k_min_uses = j.value("k_min_uses", c.k_min_uses);
  c.w_o = j.value("w_o", c.w_o);
  c.w_a = j.value("w_a", c.w_a);
  if (j.contains("split_limit") && !j["split_limit"].is_null()) c.split_limit = j["split_limit"].get<std::size_t>();
  if (!(0 < c.w_a && c.w_a < c.w_o && c.w_o <= 1)) throw Error("config: need 0 < w_a < w_o <= 1");
}

void to_json(Json& j, const GenParams& p) {
  j = Json{{"blocks", p.blocks}, {"instrs", p.instrs}, {"vregs", p.vregs}, {"loop_prob", p.loop_prob},
           {"types", p.types},   {"max_params", p.max_params}, {"call_prob", p.call_prob},
           {"max_loop_depth", p.max_loop_depth}};
}
void from_json(const Json& j, GenParams& p) {
  p = GenParams{};
  p.blocks = j.value("blocks", p.blocks);
  p.instrs = j.value("instrs", p.instrs);
  p.vregs = j.value("vregs", p.vregs);
  p.loop_prob = j.value("loop_prob", p.loop_prob);
  p.types = j.value("types", p.types);
  p.max_params = j.value("max_params", p.max_params);
  p.call_prob = j.value("call_prob", p.call_prob);
  p.max_loop_depth = j.value("max_loop_depth", p.max_loop_depth);
}

}  // namespace regalloc
