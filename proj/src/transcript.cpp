#include "regalloc/transcript.hpp"

#include "regalloc/error.hpp"

namespace regalloc {

std::string_view reset_status_name(ResetStatus s) {
  switch (s) {
    case ResetStatus::Ready: return "ready";
    case ResetStatus::Done: return "done";
    case ResetStatus::BaselineRouted: return "baseline_routed";
  }
  return "?";
}

ResetStatus parse_reset_status(std::string_view s) {
  for (ResetStatus r : {ResetStatus::Ready, ResetStatus::Done, ResetStatus::BaselineRouted})
    if (reset_status_name(r) == s) return r;
  throw Error("unknown reset status '" + std::string(s) + "'");
}

void to_json(Json& j, const StepRecord& s) {
  j = Json{{"agent", agent_name(s.agent)}, {"action", s.action}, {"reward", s.reward}, {"info", s.info}};
}
void from_json(const Json& j, StepRecord& s) {
  s.agent = parse_agent(j.at("agent").get<std::string>());
  s.action = j.at("action").get<std::string>();
  s.reward = j.at("reward").get<double>();
  s.info = j.at("info").get<StepInfo>();
}

void to_json(Json& j, const Transcript& t) {
  j = Json{{"function", t.function},
           {"machine", t.machine},
           {"config", t.config},
           {"policy", t.policy},
           {"seed", t.seed},
           {"status", reset_status_name(t.status)},
           {"steps", t.steps},
           {"total_reward", t.total_reward},
           {"global_reward", t.global_reward},
           {"rl_cost", t.rl_cost},
           {"baseline_cost", t.baseline_cost},
           {"color_map", t.color_map}};
}
void from_json(const Json& j, Transcript& t) {
  t.function = j.at("function").get<std::string>();
  t.machine = j.at("machine").get<std::string>();
  t.config = j.at("config").get<EnvConfig>();
  t.policy = j.at("policy").get<std::string>();
  t.seed = j.at("seed").get<std::uint64_t>();
  t.status = parse_reset_status(j.at("status").get<std::string>());
  t.steps = j.at("steps").get<std::vector<StepRecord>>();
  t.total_reward = j.at("total_reward").get<double>();
  t.global_reward = j.at("global_reward").get<double>();
  t.rl_cost = j.at("rl_cost").get<double>();
  t.baseline_cost = j.at("baseline_cost").get<double>();
  t.color_map = j.at("color_map").get<ColorMap>();
}

Transcript record_episode(const MachineFunction& fn, const MachineDescription& md, const std::string& machine,
                          const EnvConfig& config, const Policy& policy, const std::string& policy_name,
                          std::uint64_t seed) {
  Transcript t;
  t.function = print_function(fn);
  t.machine = machine;
  t.config = config;
  t.policy = policy_name;
  t.seed = seed;
  Environment env(md, config);
  t.status = env.reset(fn);
  if (t.status != ResetStatus::Ready) return t;
  Episode ep = run_episode(env, policy);
  t.steps = std::move(ep.steps);
  t.total_reward = ep.total_reward;
  FinalizeResult f = env.finalize();
  t.global_reward = f.global_reward;
  t.rl_cost = f.rl_cost;
  t.baseline_cost = f.baseline_cost;
  t.color_map = f.out.full_map;
  return t;
}

ReplayReport replay_transcript(const Transcript& t) {
  auto fail = [](std::string m) { return ReplayReport{false, std::move(m)}; };
  MachineDescription md = resolve_machine(t.machine);
  MachineFunction fn = parse_function(t.function, &md);
  Environment env(md, t.config);
  ResetStatus status = env.reset(fn);
  if (status != t.status) return fail("reset status differs");
  if (status != ResetStatus::Ready) return t.steps.empty() ? ReplayReport{} : fail("steps recorded for a routed episode");
  Json recorded_info, replayed_info;
  double total = 0;
  for (std::size_t i = 0; i < t.steps.size(); ++i) {
    const StepRecord& s = t.steps[i];
    if (env.done()) return fail("episode ended before step " + std::to_string(i));
    StepResult r;
    try {
      r = env.step(s.action);
    } catch (const OffMaskError& e) {
      return fail("step " + std::to_string(i) + ": " + e.what());
    }
    if (r.agent != s.agent) return fail("step " + std::to_string(i) + ": agent differs");
    if (r.reward != s.reward) return fail("step " + std::to_string(i) + ": reward differs");
    recorded_info = s.info;
    replayed_info = r.info;
    if (recorded_info != replayed_info) return fail("step " + std::to_string(i) + ": info differs");
    total += r.reward;
  }
  if (!env.done()) return fail("episode not done after the recorded steps");
  if (total != t.total_reward) return fail("total reward differs");
  FinalizeResult f = env.finalize();
  if (f.global_reward != t.global_reward) return fail("global reward differs");
  if (f.rl_cost != t.rl_cost || f.baseline_cost != t.baseline_cost) return fail("cost differs");
  if (f.out.full_map != t.color_map) return fail("color map differs");
  return {};
}

}  // namespace regalloc
