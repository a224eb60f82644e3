#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "regalloc/baselines.hpp"
#include "regalloc/embeddings.hpp"
#include "regalloc/error.hpp"
#include "regalloc/igraph.hpp"
#include "regalloc/transforms.hpp"

namespace regalloc {

struct EnvConfig {
  std::size_t min_vertices = 4;
  std::size_t max_vertices = 200;
  std::size_t k_min_uses = 2;
  std::optional<std::size_t> split_limit;  // default 2 |V|
  double w_o = 1.0;
  double w_a = 0.5;
};

enum class Phase { AwaitNodeSelect, AwaitTaskSelect, AwaitSplitPoint, AwaitColor, Done };
enum class Agent { NodeSelector, TaskSelector, Splitter, Coloring, None };

std::string_view phase_name(Phase p);
std::string_view agent_name(Agent a);

inline constexpr const char* kTaskColor = "color";
inline constexpr const char* kTaskSplit = "split";

struct NodeInfo {
  std::string name;
  bool is_phys = false;
  std::string type;
  double weight = 0;
  Annotation annotation = Annotation::NotVisited;
  LiveRange range;
  Matrix features;
};

/// What the acting agent sees. Node selector: the graph. The others: the
/// selected vertex and the scalars of its tuple. `mask` lists legal actions:
/// vreg names, task names, split points (decimal) or register ids / SPILL.
struct Observation {
  Agent agent = Agent::None;
  Phase phase = Phase::Done;
  std::uint64_t step = 0;
  std::vector<NodeInfo> nodes;                            // node selector
  std::vector<std::pair<std::size_t, std::size_t>> edges; // node selector, i < j
  std::string vertex;
  Matrix vertex_features;
  std::size_t chi_size = 0;     // task selector, coloring
  std::size_t degree = 0;       // task selector
  std::size_t num_uses = 0;     // task selector
  double weight = 0;            // task selector
  std::vector<std::uint32_t> use_points;  // splitter
  std::vector<double> use_weights;        // splitter
  std::vector<std::uint32_t> distances;   // splitter
  std::size_t uncolored = 0;              // coloring
  std::vector<std::string> mask;
};

struct GraphUpdate {
  std::string removed;
  std::vector<NodeInfo> added;
  std::vector<std::pair<std::string, std::string>> edges_added;
  std::vector<std::pair<std::string, std::string>> edges_removed;
  std::vector<std::uint32_t> move_points;
};

struct StepInfo {
  std::optional<double> task_credit;  // R for the task selector, same step
  std::optional<double> node_credit;  // R for the node selector, same step
  std::optional<GraphUpdate> graph_update;
};

struct StepResult {
  Agent agent = Agent::None;  // who acted
  double reward = 0;
  Observation next;
  bool done = false;
  StepInfo info;
};

enum class ResetStatus { Ready, Done, BaselineRouted };

struct FinalizeResult {
  double global_reward = 0;
  double rl_cost = 0;
  double baseline_cost = 0;
  ColorMap color_map;  // the agents' decisions over the working function
  Materialized out;
  std::vector<Violation> violations;  // always empty on return
};

class OffMaskError : public Error {
 public:
  using Error::Error;
};

/// One episode of the hierarchical allocation MDP. Not thread-safe; one
/// owner per episode.
class Environment {
 public:
  Environment(const MachineDescription& md, EnvConfig config = {}, const EmbeddingVocabulary* vocab = nullptr);

  ResetStatus reset(const MachineFunction& fn);
  const Observation& observation() const { return obs_; }
  Phase phase() const { return phase_; }
  bool done() const { return phase_ == Phase::Done; }

  std::vector<std::string> legal_action_mask() const;
  StepResult step(const std::string& action);

  FinalizeResult finalize();
  FinalizeResult finalize(const GreedyResult& baseline);

  const MachineFunction& working() const { return fn_; }
  const MachineFunction& original() const { return original_; }
  const InterferenceGraph& graph() const { return graph_; }
  const LivenessInfo& liveness() const { return live_; }
  const ColorMap& decisions() const { return decisions_; }
  std::size_t splits() const { return splits_; }
  std::size_t split_limit() const { return split_limit_; }
  std::uint64_t steps() const { return step_; }
  const MachineDescription& machine() const { return md_; }

 private:
  void rebuild();
  PartialAssignment assignment() const;
  std::size_t vertex_of(const std::string& name) const;
  std::vector<std::string> split_mask() const;
  LegalSets chi_of(std::size_t v) const;
  NodeInfo node_info(std::size_t v) const;
  void observe();

  const MachineDescription& md_;
  EnvConfig config_;
  const EmbeddingVocabulary* vocab_;

  MachineFunction original_;
  MachineFunction fn_;
  LivenessInfo live_;
  InterferenceGraph graph_;
  ColorMap decisions_;
  std::map<std::string, Matrix> feature_cache_;

  Phase phase_ = Phase::Done;
  std::string selected_;
  std::size_t splits_ = 0;
  std::size_t split_limit_ = 0;
  std::uint64_t step_ = 0;
  Observation obs_;
};

/// Sum of M over the vreg vertices of the working function that were spilled.
double spilled_weight(const Environment& env);

}  // namespace regalloc
