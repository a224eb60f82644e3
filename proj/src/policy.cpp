#include "regalloc/policy.hpp"

#include <memory>

#include "regalloc/baselines.hpp"
#include "regalloc/error.hpp"

namespace regalloc {

Policy random_policy(std::uint64_t seed) {
  return [seed](const Observation& o) {
    if (o.mask.empty()) throw PreconditionError("empty action mask");
    return o.mask[random_policy_index(o.mask.size(), seed, o.step)];
  };
}

Policy oracle_policy(const Environment& env) {
  auto best = std::make_shared<ColorMap>(brute_force_color(env.graph(), env.machine()).cmap);
  return [best](const Observation& o) -> std::string {
    switch (o.phase) {
      case Phase::AwaitNodeSelect: {
        // Colored vertices first so spill choices never block a register pick.
        for (const auto& n : o.mask)
          if (best->at(n) != kSpill) return n;
        return o.mask.front();
      }
      case Phase::AwaitTaskSelect: return kTaskColor;
      case Phase::AwaitColor: {
        const std::string& want = best->at(o.vertex);
        for (const auto& m : o.mask)
          if (m == want) return m;
        return o.mask.front();
      }
      default: return o.mask.front();
    }
  };
}

Episode run_episode(Environment& env, const Policy& policy, std::size_t max_steps) {
  Episode ep;
  for (std::size_t i = 0; !env.done(); ++i) {
    if (i >= max_steps) throw Error("episode exceeded " + std::to_string(max_steps) + " steps");
    std::string a = policy(env.observation());
    StepResult r = env.step(a);
    ep.total_reward += r.reward;
    ep.steps.push_back({r.agent, std::move(a), r.reward, std::move(r.info)});
  }
  return ep;
}

}  // namespace regalloc
