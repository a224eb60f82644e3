#pragma once

#include <string>
#include <vector>

#include "regalloc/policy.hpp"
#include "regalloc/serialize.hpp"

namespace regalloc {

/// Everything needed to replay an episode: the input function, the machine,
/// the configuration and the action sequence, plus what was observed.
struct Transcript {
  std::string function;  // MIR text
  std::string machine;   // machine name or path, resolved by resolve_machine
  EnvConfig config;
  std::string policy;
  std::uint64_t seed = 0;
  ResetStatus status = ResetStatus::Ready;
  std::vector<StepRecord> steps;
  double total_reward = 0;
  double global_reward = 0;
  double rl_cost = 0;
  double baseline_cost = 0;
  ColorMap color_map;  // full map over the materialized virtual function
};

std::string_view reset_status_name(ResetStatus s);
ResetStatus parse_reset_status(std::string_view s);

void to_json(Json& j, const StepRecord& s);
void from_json(const Json& j, StepRecord& s);
void to_json(Json& j, const Transcript& t);
void from_json(const Json& j, Transcript& t);

/// Runs one episode of `policy` on `fn` and finalizes it when it was Ready.
Transcript record_episode(const MachineFunction& fn, const MachineDescription& md, const std::string& machine,
                          const EnvConfig& config, const Policy& policy, const std::string& policy_name,
                          std::uint64_t seed);

struct ReplayReport {
  bool ok = true;
  std::string message;  // first divergence
};

/// Re-executes the recorded actions and compares every reward, credit and
/// final field exactly.
ReplayReport replay_transcript(const Transcript& t);

}  // namespace regalloc
