#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "regalloc/env.hpp"
#include "regalloc/generator.hpp"

namespace regalloc {

/// Functions generated from seeds lo, lo+1, ... lo+count-1.
std::vector<MachineFunction> generate_corpus(std::uint64_t seed_lo, std::size_t count, const GenParams& params,
                                             const MachineDescription& md);

/// Every *.mir file under `dir`, sorted by path.
std::vector<MachineFunction> load_corpus(const std::filesystem::path& dir, const MachineDescription* md = nullptr);

struct FunctionEval {
  std::string name;
  std::size_t vregs = 0;
  std::size_t points = 0;
  bool routed = false;  // not Ready: the baseline result stands for both
  double greedy_cost = 0;
  double greedy_spilled_weight = 0;
  std::size_t greedy_spills = 0;
  std::size_t greedy_splits = 0;
  double rl_cost = 0;
  double rl_return = 0;  // sum of step rewards
  double rl_spilled_weight = 0;
  std::size_t rl_splits = 0;
  double global_reward = 0;
  bool semantics_ok = true;  // both allocations match the input on the probe inputs
  std::string error;         // non-empty when evaluation threw
  friend bool operator==(const FunctionEval&, const FunctionEval&) = default;
};

struct EvalOptions {
  EnvConfig env;
  std::uint64_t policy_seed = 0;  // function i uses random_policy(splitmix64(policy_seed + i))
  bool check_semantics = true;
};

/// Serial reference.
std::vector<FunctionEval> evaluate_corpus_serial(const std::vector<MachineFunction>& corpus,
                                                 const MachineDescription& md, const EvalOptions& opts);

/// OpenMP version; result-identical to the serial one. `threads` <= 0 uses
/// the OpenMP default.
std::vector<FunctionEval> evaluate_corpus_parallel(const std::vector<MachineFunction>& corpus,
                                                   const MachineDescription& md, const EvalOptions& opts,
                                                   int threads = 0);

struct CorpusSummary {
  std::size_t functions = 0;
  std::size_t routed = 0;
  std::size_t errors = 0;
  std::size_t semantic_failures = 0;
  double mean_greedy_cost = 0;
  double mean_rl_cost = 0;
  double rl_win_rate = 0;  // fraction with global reward +10 among non-routed
  double mean_greedy_spilled_weight = 0;
  double mean_rl_spilled_weight = 0;
  /// Pearson correlation between spilled weight and estimated cost over all
  /// allocations (greedy and RL); NaN when undefined.
  double spill_cost_correlation = 0;
};

CorpusSummary summarize(const std::vector<FunctionEval>& evals);

/// NaN when either side has zero variance or fewer than two samples.
double pearson(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace regalloc
