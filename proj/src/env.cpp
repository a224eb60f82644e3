#include "regalloc/env.hpp"

#include <algorithm>
#include <set>

#include "regalloc/error.hpp"

namespace regalloc {

std::string_view phase_name(Phase p) {
  switch (p) {
    case Phase::AwaitNodeSelect: return "await_node_select";
    case Phase::AwaitTaskSelect: return "await_task_select";
    case Phase::AwaitSplitPoint: return "await_split_point";
    case Phase::AwaitColor: return "await_color";
    case Phase::Done: return "done";
  }
  return "?";
}

std::string_view agent_name(Agent a) {
  switch (a) {
    case Agent::NodeSelector: return "node_selector";
    case Agent::TaskSelector: return "task_selector";
    case Agent::Splitter: return "splitter";
    case Agent::Coloring: return "coloring";
    case Agent::None: return "none";
  }
  return "?";
}

namespace {

Agent agent_for(Phase p) {
  switch (p) {
    case Phase::AwaitNodeSelect: return Agent::NodeSelector;
    case Phase::AwaitTaskSelect: return Agent::TaskSelector;
    case Phase::AwaitSplitPoint: return Agent::Splitter;
    case Phase::AwaitColor: return Agent::Coloring;
    case Phase::Done: return Agent::None;
  }
  return Agent::None;
}

}  // namespace

Environment::Environment(const MachineDescription& md, EnvConfig config, const EmbeddingVocabulary* vocab)
    : md_(md), config_(config), vocab_(vocab) {}

ResetStatus Environment::reset(const MachineFunction& fn) {
  original_ = fn;
  fn_ = fn;
  decisions_.clear();
  feature_cache_.clear();
  selected_.clear();
  splits_ = 0;
  step_ = 0;
  rebuild();
  const std::size_t nv = graph_.num_vregs();
  split_limit_ = config_.split_limit.value_or(2 * nv);
  if (nv == 0) {
    phase_ = Phase::Done;
    observe();
    return ResetStatus::Done;
  }
  if (nv < config_.min_vertices || nv > config_.max_vertices) {
    phase_ = Phase::Done;
    observe();
    return ResetStatus::BaselineRouted;
  }
  phase_ = Phase::AwaitNodeSelect;
  observe();
  return ResetStatus::Ready;
}

void Environment::rebuild() {
  live_ = compute_liveness(fn_, &md_);
  graph_ = build_interference_graph(fn_, live_, &md_);
  feature_cache_.clear();
}

PartialAssignment Environment::assignment() const {
  PartialAssignment a = initial_assignment(graph_, md_);
  for (std::size_t i = 0; i < graph_.vertices.size(); ++i) {
    if (graph_.vertices[i].is_phys) continue;
    auto it = decisions_.find(graph_.vertices[i].name);
    if (it == decisions_.end()) continue;
    if (it->second == kSpill)
      a.spilled[i] = true;
    else
      a.reg[i] = md_.register_id(it->second);
  }
  return a;
}

std::size_t Environment::vertex_of(const std::string& name) const {
  for (std::size_t i = 0; i < graph_.vertices.size(); ++i)
    if (!graph_.vertices[i].is_phys && graph_.vertices[i].name == name) return i;
  throw PreconditionError("no vreg vertex named %" + name);
}

LegalSets Environment::chi_of(std::size_t v) const { return legal_registers(graph_, md_, assignment(), v); }

std::vector<std::string> Environment::split_mask() const {
  const auto& K = live_.uses.at(graph_.vertices[vertex_of(selected_)].vreg);
  std::vector<std::string> out;
  for (std::size_t j = 1; j < K.size(); ++j) out.push_back(std::to_string(K[j]));
  return out;
}

std::vector<std::string> Environment::legal_action_mask() const {
  switch (phase_) {
    case Phase::AwaitNodeSelect: {
      std::vector<std::string> out;
      for (const auto& x : graph_.vertices)
        if (!x.is_phys && !decisions_.count(x.name)) out.push_back(x.name);
      return out;
    }
    case Phase::AwaitTaskSelect: {
      const auto& K = live_.uses.at(graph_.vertices[vertex_of(selected_)].vreg);
      if (K.size() < std::max<std::size_t>(config_.k_min_uses, 2) || splits_ >= split_limit_) return {kTaskColor};
      return {kTaskColor, kTaskSplit};
    }
    case Phase::AwaitSplitPoint: return split_mask();
    case Phase::AwaitColor: {
      LegalSets s = chi_of(vertex_of(selected_));
      if (s.chi.empty()) return {kSpill};
      std::vector<std::string> out;
      for (RegId r : s.chi) out.push_back(md_.reg(r).id);
      return out;
    }
    case Phase::Done: break;
  }
  throw PreconditionError("episode is done; no legal actions");
}

NodeInfo Environment::node_info(std::size_t v) const {
  const Vertex& x = graph_.vertices[v];
  NodeInfo n;
  n.name = x.name;
  n.is_phys = x.is_phys;
  n.type = x.type;
  n.weight = x.weight;
  n.range = x.range;
  if (!x.is_phys) {
    auto it = decisions_.find(x.name);
    if (it != decisions_.end()) n.annotation = it->second == kSpill ? Annotation::Spill : Annotation::Colored;
  } else {
    n.annotation = Annotation::Colored;
  }
  if (vocab_) {
    std::string key = (x.is_phys ? "$" : "%") + x.name;
    auto it = feature_cache_.find(key);
    if (it == feature_cache_.end())
      it = const_cast<Environment*>(this)
               ->feature_cache_.emplace(key, node_features(fn_, graph_, v, *vocab_, &md_, config_.w_o, config_.w_a))
               .first;
    n.features = it->second;
  }
  return n;
}

void Environment::observe() {
  Observation o;
  o.phase = phase_;
  o.agent = agent_for(phase_);
  o.step = step_;
  if (phase_ == Phase::Done) {
    obs_ = std::move(o);
    return;
  }
  o.mask = legal_action_mask();
  if (phase_ == Phase::AwaitNodeSelect) {
    for (std::size_t i = 0; i < graph_.vertices.size(); ++i) o.nodes.push_back(node_info(i));
    for (std::size_t i = 0; i < graph_.vertices.size(); ++i)
      for (std::size_t j : graph_.adj[i])
        if (i < j) o.edges.emplace_back(i, j);
  } else {
    std::size_t v = vertex_of(selected_);
    const Vertex& x = graph_.vertices[v];
    NodeInfo n = node_info(v);
    o.vertex = x.name;
    o.vertex_features = std::move(n.features);
    o.weight = x.weight;
    const auto& K = live_.uses.at(x.vreg);
    if (phase_ == Phase::AwaitTaskSelect || phase_ == Phase::AwaitColor) o.chi_size = chi_of(v).chi.size();
    if (phase_ == Phase::AwaitTaskSelect) {
      o.degree = graph_.adj[v].size();
      o.num_uses = K.size();
    }
    if (phase_ == Phase::AwaitSplitPoint) {
      o.use_points = K;
      for (auto p : K) o.use_weights.push_back(point_weight(fn_, p));
      o.distances = live_.distances.at(x.vreg);
    }
    if (phase_ == Phase::AwaitColor) {
      for (const auto& y : graph_.vertices)
        if (!y.is_phys && !decisions_.count(y.name)) ++o.uncolored;
    }
  }
  obs_ = std::move(o);
}

StepResult Environment::step(const std::string& action) {
  if (phase_ == Phase::Done) throw PreconditionError("step after the episode is done");
  auto mask = legal_action_mask();
  if (std::find(mask.begin(), mask.end(), action) == mask.end())
    throw OffMaskError("action '" + action + "' is not legal in phase " + std::string(phase_name(phase_)));

  StepResult r;
  r.agent = agent_for(phase_);
  ++step_;
  switch (phase_) {
    case Phase::AwaitNodeSelect:
      selected_ = action;
      phase_ = Phase::AwaitTaskSelect;
      break;
    case Phase::AwaitTaskSelect:
      phase_ = action == kTaskSplit ? Phase::AwaitSplitPoint : Phase::AwaitColor;
      break;
    case Phase::AwaitSplitPoint: {
      std::size_t v = vertex_of(selected_);
      VRegId vreg = graph_.vertices[v].vreg;
      double before = graph_.vertices[v].weight;
      InterferenceGraph old_graph = graph_;
      SplitResult s = split_live_range(fn_, vreg, static_cast<std::uint32_t>(std::stoul(action)));
      fn_ = std::move(s.fn);
      ++splits_;
      rebuild();
      const std::string a = fn_.vregs[s.first].name, b = fn_.vregs[s.second].name;
      r.reward = before - (live_.weights.at(s.first) + live_.weights.at(s.second));

      GraphUpdate u;
      u.removed = selected_;
      u.added.push_back(node_info(*graph_.find_vreg(s.first)));
      u.added.push_back(node_info(*graph_.find_vreg(s.second)));
      u.move_points.push_back(s.split_move);
      u.move_points.insert(u.move_points.end(), s.repair_moves.begin(), s.repair_moves.end());
      auto edge_set = [](const InterferenceGraph& g) {
        std::set<std::pair<std::string, std::string>> out;
        auto label = [&](std::size_t i) { return (g.vertices[i].is_phys ? "$" : "%") + g.vertices[i].name; };
        for (std::size_t i = 0; i < g.vertices.size(); ++i)
          for (std::size_t j : g.adj[i])
            if (i < j) out.insert(std::minmax(label(i), label(j)));
        return out;
      };
      auto e0 = edge_set(old_graph), e1 = edge_set(graph_);
      std::set_difference(e1.begin(), e1.end(), e0.begin(), e0.end(), std::back_inserter(u.edges_added));
      std::set_difference(e0.begin(), e0.end(), e1.begin(), e1.end(), std::back_inserter(u.edges_removed));
      r.info.graph_update = std::move(u);
      (void)a;
      (void)b;
      selected_.clear();
      phase_ = Phase::AwaitNodeSelect;
      break;
    }
    case Phase::AwaitColor: {
      std::size_t v = vertex_of(selected_);
      double m = graph_.vertices[v].weight;
      decisions_[selected_] = action;
      r.reward = action == kSpill ? -m : m;
      r.info.task_credit = r.reward;
      r.info.node_credit = r.reward;
      selected_.clear();
      bool remaining = false;
      for (const auto& y : graph_.vertices)
        if (!y.is_phys && !decisions_.count(y.name)) remaining = true;
      phase_ = remaining ? Phase::AwaitNodeSelect : Phase::Done;
      break;
    }
    case Phase::Done: break;
  }
  observe();
  r.next = obs_;
  r.done = phase_ == Phase::Done;
  return r;
}

FinalizeResult Environment::finalize() { return finalize(greedy_allocate(original_, md_)); }

FinalizeResult Environment::finalize(const GreedyResult& baseline) {
  if (phase_ != Phase::Done) throw PreconditionError("finalize before the episode is done");
  FinalizeResult f;
  f.color_map = decisions_;
  f.out = materialize_allocation(fn_, decisions_, md_);
  LivenessInfo live = compute_liveness(f.out.virtual_fn, &md_);
  f.violations = verify_allocation(f.out.virtual_fn, live, f.out.full_map, md_);
  if (!f.violations.empty()) throw Error("finalize: verifier rejected the allocation: " + format_violation(f.violations.front()));
  f.rl_cost = estimate_throughput(md_, f.out.physical_fn);
  f.baseline_cost = baseline.cost;
  f.global_reward = f.rl_cost <= f.baseline_cost ? 10.0 : -10.0;
  return f;
}

double spilled_weight(const Environment& env) {
  double w = 0;
  for (const auto& [name, d] : env.decisions())
    if (d == kSpill) w += env.liveness().weights.at(*env.working().find_vreg(name));
  return w;
}

}  // namespace regalloc
