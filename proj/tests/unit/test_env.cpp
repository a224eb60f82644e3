#include <algorithm>
#include <numeric>

#include "doctest.h"
#include "fixtures.hpp"
#include "regalloc/env.hpp"
#include "regalloc/error.hpp"
#include "regalloc/generator.hpp"
#include "regalloc/interpreter.hpp"
#include "regalloc/policy.hpp"

using namespace regalloc;

TEST_CASE("reset routes by vertex count") {
  auto md = uniform_machine(3);
  Environment env(md);
  CHECK(env.reset(fixtures::running_example()) == ResetStatus::Ready);
  CHECK(env.phase() == Phase::AwaitNodeSelect);
  CHECK(env.reset(parse_function("func e {\nbb0:\n  print 1\n}\n")) == ResetStatus::Done);
  CHECK(env.done());
  CHECK(env.reset(parse_function("func s {\nbb0:\n  %a:gr32 = mov 1\n  print %a:gr32\n}\n")) ==
        ResetStatus::BaselineRouted);
}

TEST_CASE("masks follow the phase") {
  auto md = uniform_machine(3);
  Environment env(md);
  env.reset(fixtures::running_example());
  auto m = env.legal_action_mask();
  CHECK(m == std::vector<std::string>{"i", "x", "y", "z"});
  CHECK(env.observation().nodes.size() == 4);
  CHECK(env.observation().edges.size() == 6);

  env.step("z");
  CHECK(env.phase() == Phase::AwaitTaskSelect);
  CHECK(env.legal_action_mask() == std::vector<std::string>{"color", "split"});
  CHECK(env.observation().num_uses == 3);
  CHECK(env.observation().degree == 3);
  CHECK(env.observation().chi_size == 3);

  env.step("split");
  // K(z) = {5, 7, 10}; the first access is not a split point.
  CHECK(env.legal_action_mask() == std::vector<std::string>{"7", "10"});
  CHECK(env.observation().use_points == std::vector<std::uint32_t>{5, 7, 10});

  CHECK_THROWS_AS(env.step("5"), OffMaskError);
  CHECK(env.phase() == Phase::AwaitSplitPoint);
}

TEST_CASE("coloring rewards, credits and termination") {
  auto md = uniform_machine(4);
  Environment env(md);
  env.reset(fixtures::running_example());
  double sum_m = 0;
  for (const auto& v : env.graph().vertices) sum_m += v.weight;
  double total = 0;
  while (!env.done()) {
    auto& o = env.observation();
    StepResult r = env.step(o.phase == Phase::AwaitTaskSelect ? std::string(kTaskColor) : o.mask.front());
    if (r.agent == Agent::Coloring) {
      REQUIRE(r.info.task_credit);
      CHECK(*r.info.task_credit == r.reward);
      CHECK(*r.info.node_credit == r.reward);
    } else {
      CHECK(r.reward == 0);
    }
    total += r.reward;
  }
  CHECK(total == doctest::Approx(sum_m));
  CHECK_THROWS_AS(env.step("x"), PreconditionError);
  auto f = env.finalize();
  CHECK(f.violations.empty());
  CHECK(f.rl_cost <= f.baseline_cost);
  CHECK(f.global_reward == 10.0);
}

TEST_CASE("spilling yields minus M") {
  auto md = uniform_machine(3);
  Environment env(md, EnvConfig{.min_vertices = 1});
  env.reset(fixtures::running_example());
  // Color x, y, z first; i then has no register left.
  for (std::string v : {"x", "y", "z"}) {
    env.step(v);
    env.step("color");
    env.step(env.observation().mask.front());
  }
  env.step("i");
  env.step("color");
  CHECK(env.legal_action_mask() == std::vector<std::string>{kSpill});
  double m = env.graph().vertices[*env.graph().find_vreg(*env.working().find_vreg("i"))].weight;
  auto r = env.step(kSpill);
  CHECK(r.reward == -m);
  CHECK(r.done);
  auto f = env.finalize();
  CHECK(f.out.spilled.count("i"));
  CHECK(interpret(f.out.physical_fn, {}, kDefaultFuel, &md) == interpret(fixtures::running_example()));
}

TEST_CASE("split step reports the graph update and the reward") {
  auto md = uniform_machine(3);
  Environment env(md);
  env.reset(fixtures::running_example());
  env.step("i");
  env.step("split");
  double before = env.graph().vertices[*env.graph().find_vreg(*env.working().find_vreg("i"))].weight;
  auto r = env.step("6");
  REQUIRE(r.info.graph_update);
  const auto& u = *r.info.graph_update;
  CHECK(u.removed == "i");
  REQUIRE(u.added.size() == 2);
  double after = u.added[0].weight + u.added[1].weight;
  CHECK(r.reward == doctest::Approx(before - after));
  CHECK(r.reward == doctest::Approx(-2.0));
  CHECK(env.phase() == Phase::AwaitNodeSelect);
  CHECK(env.splits() == 1);
  CHECK_FALSE(u.edges_removed.empty());
  for (const auto& [a, b] : u.edges_removed) CHECK((a == "%i" || b == "%i"));
  auto mask = env.legal_action_mask();
  CHECK(std::find(mask.begin(), mask.end(), "i") == mask.end());
  CHECK(std::find(mask.begin(), mask.end(), u.added[0].name) != mask.end());
}

TEST_CASE("the split limit forces coloring") {
  auto md = uniform_machine(3);
  Environment env(md, EnvConfig{.split_limit = 0});
  env.reset(fixtures::running_example());
  env.step("i");
  CHECK(env.legal_action_mask() == std::vector<std::string>{"color"});
}

TEST_CASE("random policies terminate with verifier-clean, behavior-preserving allocations") {
  const auto& md = fixtures::x86like();
  GenParams p;
  p.types = {"gr32", "gr64"};
  int ran = 0;
  for (std::uint64_t seed = 1; seed <= 60; ++seed) {
    auto fn = generate_random_function(seed, p, &md);
    Environment env(md);
    if (env.reset(fn) != ResetStatus::Ready) continue;
    ++ran;
    auto ep = run_episode(env, random_policy(seed), 100000);
    CHECK(env.done());
    CHECK(env.splits() <= env.split_limit());
    auto f = env.finalize();
    CHECK(f.violations.empty());
    std::vector<std::int64_t> in{4, 11};
    std::optional<Outputs> a, b;
    try {
      a = interpret(fn, in, kDefaultFuel, &md);
    } catch (const InterpretError&) {
    }
    try {
      b = interpret(f.out.physical_fn, in, kDefaultFuel, &md);
    } catch (const InterpretError&) {
    }
    CHECK(a == b);
  }
  CHECK(ran > 30);
}

TEST_CASE("oracle policy reaches the brute-force spill weight") {
  auto md = uniform_machine(3);
  GenParams p;
  p.vregs = 6;
  p.instrs = 14;
  p.blocks = 4;
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    auto fn = generate_random_function(seed, p, &md);
    Environment env(md, EnvConfig{.min_vertices = 1});
    if (env.reset(fn) != ResetStatus::Ready || env.graph().num_vregs() > 12) continue;
    double best = brute_force_color(env.graph(), md).spilled_weight;
    run_episode(env, oracle_policy(env));
    CHECK(spilled_weight(env) == doctest::Approx(best));
  }
}

TEST_CASE("features are attached when a vocabulary is given") {
  auto md = uniform_machine(3);
  auto corpus = std::vector<MachineFunction>{fixtures::running_example()};
  TransEConfig cfg;
  cfg.dim = 8;
  cfg.epochs = 5;
  auto vocab = train_transe(generate_triplets(corpus, &md), cfg);
  Environment env(md, {}, &vocab);
  env.reset(fixtures::running_example());
  const auto& n = env.observation().nodes.front();
  CHECK(n.features.size() == n.range.length());
  CHECK(n.features.front().size() == 8);
}
