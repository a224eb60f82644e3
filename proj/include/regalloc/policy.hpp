#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "regalloc/env.hpp"

namespace regalloc {

/// Maps an observation to one entry of its mask.
using Policy = std::function<std::string(const Observation&)>;

/// mask[random_policy_index(|mask|, seed, step)].
Policy random_policy(std::uint64_t seed);

/// Colors every vertex as the minimum-spill-weight coloring of the initial
/// graph does; never splits. Needs at most 12 vregs.
Policy oracle_policy(const Environment& env);

struct StepRecord {
  Agent agent = Agent::None;
  std::string action;
  double reward = 0;
  StepInfo info;
};

struct Episode {
  ResetStatus status = ResetStatus::Ready;
  std::vector<StepRecord> steps;
  double total_reward = 0;  // sum of step rewards, global reward excluded
};

/// Runs `policy` from the current state until done.
Episode run_episode(Environment& env, const Policy& policy, std::size_t max_steps = 1000000);

}  // namespace regalloc
