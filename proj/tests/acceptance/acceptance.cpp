// Acceptance suite: one PASS/FAIL line per criterion, thresholds pinned below.

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "regalloc/baselines.hpp"
#include "regalloc/corpus.hpp"
#include "regalloc/dominance.hpp"
#include "regalloc/embeddings.hpp"
#include "regalloc/generator.hpp"
#include "regalloc/interpreter.hpp"
#include "regalloc/protocol.hpp"
#include "regalloc/transcript.hpp"

using namespace regalloc;

namespace {

// Pinned thresholds.
constexpr std::size_t kConstraintFunctions = 1000;
constexpr std::size_t kMaxPoints = 40;
constexpr std::size_t kMaxVregs = 12;
constexpr double kConstraintSeconds = 60;
constexpr std::size_t kSemanticFunctions = 1000;
constexpr std::size_t kInputsPerFunction = 16;
constexpr double kSemanticSeconds = 300;
constexpr std::uint32_t kFig2SplitPoint = 6;  // the use of i right after z = y / x
constexpr std::size_t kRewardTranscripts = 100;
constexpr double kRewardTolerance = 1e-9;
constexpr std::size_t kExhaustiveBlocks = 5;
constexpr std::size_t kSampledPerSize = 20000;
constexpr std::size_t kMaxFrontierBlocks = 7;
constexpr std::size_t kProtocolTranscripts = 100;
constexpr std::size_t kGreedyGraphs = 500;
constexpr double kGreedyMedianRatio = 1.5;
constexpr std::size_t kVocabFunctions = 500;
constexpr std::size_t kHeldOutFunctions = 100;
constexpr unsigned kVocabDim = 32;
// Unit-norm entities in a dense NextInst graph cannot separate by a full unit of L2 distance.
constexpr double kVocabMargin = 0.2;
constexpr double kRankThreshold = 0.80;
constexpr double kVocabSeconds = 120;

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// Seeded functions satisfying the size caps, in seed order.
std::vector<MachineFunction> small_functions(std::size_t count, const GenParams& p, const MachineDescription& md,
                                             std::uint64_t first_seed) {
  std::vector<MachineFunction> out;
  for (std::uint64_t seed = first_seed; out.size() < count; ++seed) {
    auto fn = generate_random_function(seed, p, &md);
    if (fn.num_points() <= kMaxPoints && fn.live_vregs().size() <= kMaxVregs) out.push_back(std::move(fn));
  }
  return out;
}

GenParams small_params() {
  GenParams p;
  p.blocks = 5;
  p.instrs = 14;
  p.vregs = 7;
  p.types = {"gr32", "gr64", "gr16"};
  p.call_prob = 0.1;
  return p;
}

// ---------------------------------------------------------------------------

Outcome constraint_equivalence() {
  auto t0 = Clock::now();
  const auto& md = fixtures::x86like();
  auto corpus = small_functions(kConstraintFunctions, small_params(), md, 1);
  std::size_t checks = 0, mismatches = 0;
  std::uint64_t rng = 7;
  for (const auto& fn : corpus) {
    auto live = compute_liveness(fn, &md);
    auto g = build_interference_graph(fn, live, &md);
    auto a = initial_assignment(g, md);
    std::map<VRegId, RegId> assigned;
    for (std::size_t v = 0; v < g.vertices.size(); ++v) {
      if (g.vertices[v].is_phys) continue;
      // Every undecided vertex against the oracle at this state.
      for (std::size_t u = v; u < g.vertices.size(); ++u) {
        if (g.vertices[u].is_phys || a.decided(u)) continue;
        std::vector<RegId> expect;
        auto t = md.find_type(g.vertices[u].type);
        for (RegId r : md.type(*t).members) {
          auto trial = assigned;
          trial[g.vertices[u].vreg] = r;
          if (oracle::point_checker_accepts(fn, live, trial, md)) expect.push_back(r);
        }
        ++checks;
        try {
          if (legal_registers(g, md, a, u).chi != expect) ++mismatches;
        } catch (const Error&) {
          ++mismatches;
        }
      }
      auto s = legal_registers(g, md, a, v);
      if (s.chi.empty()) {
        a.spilled[v] = true;
      } else {
        RegId r = s.chi[splitmix64(rng++) % s.chi.size()];
        a.reg[v] = r;
        assigned[g.vertices[v].vreg] = r;
      }
    }
  }
  double secs = seconds_since(t0);
  return {mismatches == 0 && secs < kConstraintSeconds,
          fmt::format("{} functions, {} chi checks, {} mismatches, {:.1f}s (limit {}s)", corpus.size(), checks,
                      mismatches, secs, kConstraintSeconds)};
}

// ---------------------------------------------------------------------------

std::string run_outputs(const MachineFunction& fn, std::span<const std::int64_t> in, const MachineDescription& md) {
  try {
    return format_outputs(interpret(fn, in, kDefaultFuel, &md));
  } catch (const InterpretError& e) {
    return std::string("error:") + std::to_string(static_cast<int>(e.kind()));
  }
}

Outcome semantic_preservation() {
  auto t0 = Clock::now();
  const auto& md = fixtures::x86like();
  GenParams p;
  p.types = {"gr32", "gr64"};
  p.call_prob = 0.05;
  EnvConfig cfg;
  cfg.min_vertices = 1;
  cfg.max_vertices = 100000;
  std::size_t preserved = 0, total = 0, splits = 0, spills = 0, failures = 0;
  for (std::uint64_t seed = 1; seed <= kSemanticFunctions; ++seed) {
    auto fn = generate_random_function(seed, p, &md);
    std::vector<std::vector<std::int64_t>> inputs;
    std::uint64_t r = splitmix64(seed * 1315423911ULL);
    for (std::size_t k = 0; k < kInputsPerFunction; ++k) {
      std::vector<std::int64_t> in;
      for (std::size_t j = 0; j < 2; ++j) {
        r = splitmix64(r);
        in.push_back(static_cast<std::int64_t>(r % 2001) - 1000);
      }
      inputs.push_back(in);
    }
    MachineFunction physical;
    try {
      Environment env(md, cfg);
      if (env.reset(fn) == ResetStatus::Ready) {
        run_episode(env, random_policy(seed));
        auto f = env.finalize();
        physical = f.out.physical_fn;
        splits += env.splits();
        spills += f.out.spilled.size() + f.out.evicted.size();
      } else {
        physical = fn;  // no virtual registers at all
      }
    } catch (const Error& e) {
      ++failures;
      total += inputs.size();
      continue;
    }
    for (const auto& in : inputs) {
      ++total;
      preserved += run_outputs(fn, in, md) == run_outputs(physical, in, md);
    }
  }
  double secs = seconds_since(t0);
  return {preserved == total && failures == 0 && secs < kSemanticSeconds,
          fmt::format("{}/{} runs preserved over {} functions ({} pipeline failures, {} splits, {} spills), "
                      "{:.1f}s (limit {}s)",
                      preserved, total, kSemanticFunctions, failures, splits, spills, secs, kSemanticSeconds)};
}

// ---------------------------------------------------------------------------

Outcome fig2_reproduction() {
  auto md = uniform_machine(3);
  auto fn = fixtures::running_example();
  auto live = compute_liveness(fn, &md);
  bool before = oracle::find_spill_free_map(fn, live, md).has_value();
  VRegId i = *fn.find_vreg("i");
  auto split = split_live_range(fn, i, kFig2SplitPoint);
  auto live2 = compute_liveness(split.fn, &md);
  auto map = oracle::find_spill_free_map(split.fn, live2, md);
  bool verified = false;
  if (map) {
    ColorMap cmap;
    for (const auto& [v, r] : *map) cmap[split.fn.vregs[v].name] = md.reg(r).id;
    verified = verify_allocation(split.fn, live2, cmap, md).empty();
  }
  std::size_t live_at_5 = 0;
  for (const auto& [v, range] : live.ranges) live_at_5 += range.contains(5);
  // Any other split point of i, for the record.
  std::vector<std::string> others;
  for (auto k : live.uses.at(i)) {
    if (k == live.uses.at(i).front()) continue;
    auto s = split_live_range(fn, i, k);
    auto l = compute_liveness(s.fn, &md);
    others.push_back(fmt::format("{}:{}", k, oracle::find_spill_free_map(s.fn, l, md) ? "yes" : "no"));
  }
  std::string o;
  for (const auto& x : others) o += (o.empty() ? "" : " ") + x;
  return {!before && map && verified,
          fmt::format("no spill-free map before split: {}; after split of i at {}: spill-free map {}, verifies {}; "
                      "pressure at point 5 is {} (3-colorable per split point: {})",
                      before ? "false" : "true", kFig2SplitPoint, map ? "found" : "absent", verified ? "yes" : "no",
                      live_at_5, o)};
}

// ---------------------------------------------------------------------------

Outcome reward_arithmetic() {
  const auto& md = fixtures::x86like();
  GenParams p;
  p.types = {"gr32", "gr64"};
  std::size_t steps = 0, bad = 0, checked = 0;
  double worst = 0;
  auto check = [&](double got, double want) {
    ++steps;
    double d = std::abs(got - want);
    worst = std::max(worst, d);
    if (!(d <= kRewardTolerance)) ++bad;
  };
  for (std::uint64_t seed = 1; checked < kRewardTranscripts; ++seed) {
    auto fn = generate_random_function(seed, p, &md);
    Transcript rec = record_episode(fn, md, "x86like", EnvConfig{}, random_policy(seed), "random", seed);
    if (rec.status != ResetStatus::Ready) continue;
    ++checked;
    Transcript t = Json::parse(Json(rec).dump()).get<Transcript>();

    MachineFunction working = parse_function(t.function, &md);
    ColorMap decisions;
    std::string selected;
    double total = 0;
    for (const auto& s : t.steps) {
      total += s.reward;
      switch (s.agent) {
        case Agent::NodeSelector:
          selected = s.action;
          check(s.reward, 0);
          break;
        case Agent::TaskSelector: check(s.reward, 0); break;
        case Agent::Splitter: {
          VRegId v = *working.find_vreg(selected);
          double before = oracle::spill_weight(working, v);
          auto r = split_live_range(working, v, static_cast<std::uint32_t>(std::stoul(s.action)));
          working = r.fn;
          check(s.reward, before - (oracle::spill_weight(working, r.first) + oracle::spill_weight(working, r.second)));
          break;
        }
        case Agent::Coloring: {
          double m = oracle::spill_weight(working, *working.find_vreg(selected));
          double want = s.action == kSpill ? -m : m;
          check(s.reward, want);
          check(s.info.task_credit.value_or(NAN), want);
          check(s.info.node_credit.value_or(NAN), want);
          decisions[selected] = s.action;
          break;
        }
        case Agent::None: ++bad; break;
      }
    }
    check(t.total_reward, total);
    auto out = materialize_allocation(working, decisions, md);
    double rl = estimate_throughput(md, out.physical_fn);
    double base = greedy_allocate(fn, md).cost;
    check(t.rl_cost, rl);
    check(t.baseline_cost, base);
    check(t.global_reward, rl <= base ? 10.0 : -10.0);
  }
  return {bad == 0, fmt::format("{} transcripts, {} reward terms, {} off by more than {:g}, worst {:g}", checked, steps,
                                bad, kRewardTolerance, worst)};
}

// ---------------------------------------------------------------------------

bool frontier_matches(const Successors& succs) {
  auto got = compute_dominance_frontier(succs, 0).frontier;
  return got == oracle::frontier_by_paths(succs, 0);
}

Outcome dominance_frontier_oracle() {
  auto t0 = Clock::now();
  std::size_t graphs = 0, mismatches = 0;
  // Exhaustive: every block picks a successor set of size <= 2.
  for (std::size_t n = 1; n <= kExhaustiveBlocks; ++n) {
    std::vector<std::vector<BlockId>> choices{{}};
    for (BlockId a = 0; a < n; ++a) choices.push_back({a});
    for (BlockId a = 0; a < n; ++a)
      for (BlockId b = a + 1; b < n; ++b) choices.push_back({a, b});
    std::int64_t total = 1;
    for (std::size_t k = 0; k < n; ++k) total *= static_cast<std::int64_t>(choices.size());
    std::size_t bad = 0;
#pragma omp parallel for schedule(dynamic, 4096) reduction(+ : bad)
    for (std::int64_t code = 0; code < total; ++code) {
      Successors succs(n);
      std::int64_t c = code;
      for (std::size_t k = 0; k < n; ++k) {
        succs[k] = choices[static_cast<std::size_t>(c % static_cast<std::int64_t>(choices.size()))];
        c /= static_cast<std::int64_t>(choices.size());
      }
      if (!frontier_matches(succs)) ++bad;
    }
    graphs += static_cast<std::size_t>(total);
    mismatches += bad;
  }
  std::size_t sampled = 0;
  for (std::size_t n = kExhaustiveBlocks + 1; n <= kMaxFrontierBlocks; ++n) {
    std::size_t bad = 0;
#pragma omp parallel for schedule(dynamic, 256) reduction(+ : bad)
    for (std::int64_t s = 0; s < static_cast<std::int64_t>(kSampledPerSize); ++s) {
      std::uint64_t r = splitmix64(n * 1000003ULL + static_cast<std::uint64_t>(s));
      Successors succs(n);
      for (BlockId b = 0; b < n; ++b) {
        r = splitmix64(r);
        std::size_t deg = r % 3;
        for (std::size_t k = 0; k < deg; ++k) {
          r = splitmix64(r);
          BlockId t = r % n;
          if (std::find(succs[b].begin(), succs[b].end(), t) == succs[b].end()) succs[b].push_back(t);
        }
      }
      if (!frontier_matches(succs)) ++bad;
    }
    sampled += kSampledPerSize;
    mismatches += bad;
  }
  return {mismatches == 0,
          fmt::format("{} exhaustive CFGs (1..{} blocks, out-degree <= 2) + {} sampled ({}..{} blocks), {} mismatches, "
                      "{:.1f}s",
                      graphs, kExhaustiveBlocks, sampled, kExhaustiveBlocks + 1, kMaxFrontierBlocks, mismatches,
                      seconds_since(t0))};
}

// ---------------------------------------------------------------------------

bool same_bits(double a, double b) { return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b); }

Outcome protocol_equivalence() {
  const std::string machine = "x86like";
  const auto& md = fixtures::x86like();
  TcpServer server(ServerConfig{});
  std::thread th([&] { server.run(); });
  std::size_t same = 0, done = 0;
  std::string first_diff;
  try {
    EnvClient client(connect_tcp("127.0.0.1", server.port()));
    client.hello();
    for (std::uint64_t seed = 1; done < kProtocolTranscripts; ++seed) {
      auto fn = generate_random_function(seed, GenParams{}, &md);
      EnvConfig cfg;
      Transcript local = record_episode(fn, md, machine, cfg, random_policy(seed), "random", seed);
      if (local.status != ResetStatus::Ready) continue;
      ++done;
      Transcript remote =
          run_remote_episode(client, start_with_function(fn, machine, cfg), random_policy(seed), "random", seed);
      bool eq = local.color_map == remote.color_map && same_bits(local.global_reward, remote.global_reward) &&
                same_bits(local.total_reward, remote.total_reward) && local.steps.size() == remote.steps.size() &&
                Json(local).dump() == Json(remote).dump();
      for (std::size_t k = 0; eq && k < local.steps.size(); ++k)
        eq = same_bits(local.steps[k].reward, remote.steps[k].reward);
      same += eq;
      if (!eq && first_diff.empty()) first_diff = fn.name;
    }
  } catch (const std::exception& e) {
    first_diff = e.what();
  }
  server.stop();
  th.join();
  return {same == kProtocolTranscripts,
          fmt::format("{}/{} transcripts identical in-process and over loopback{}", same, kProtocolTranscripts,
                      first_diff.empty() ? "" : "; first difference: " + first_diff)};
}

// ---------------------------------------------------------------------------

Outcome greedy_sanity() {
  auto md = uniform_machine(3);
  GenParams p;
  p.blocks = 5;
  p.instrs = 14;
  p.vregs = 7;
  auto corpus = small_functions(kGreedyGraphs, p, md, 1);
  std::vector<double> ratios;
  double sum_greedy = 0, sum_opt = 0;
  std::size_t below_opt = 0, illegal = 0, pipeline_bad = 0, with_spills = 0;
  for (const auto& fn : corpus) {
    auto live = compute_liveness(fn, &md);
    auto g = build_interference_graph(fn, live, &md);
    auto greedy = greedy_color_graph(g, md);
    auto opt = brute_force_color(g, md);
    sum_greedy += greedy.spilled_weight;
    sum_opt += opt.spilled_weight;
    if (greedy.spilled_weight < opt.spilled_weight - 1e-9) ++below_opt;
    if (opt.spilled_weight > 0) ++with_spills;
    std::map<VRegId, RegId> colored;
    for (const auto& [name, reg] : greedy.cmap)
      if (reg != kSpill) colored[*fn.find_vreg(name)] = md.register_id(reg);
    if (!oracle::point_checker_accepts(fn, live, colored, md)) ++illegal;
    if (opt.spilled_weight == 0)
      ratios.push_back(greedy.spilled_weight == 0 ? 1.0 : INFINITY);
    else
      ratios.push_back(greedy.spilled_weight / opt.spilled_weight);
    auto full = greedy_allocate(fn, md);
    if (!verify_allocation(full.out.virtual_fn, compute_liveness(full.out.virtual_fn, &md), full.out.full_map, md)
             .empty())
      ++pipeline_bad;
  }
  std::sort(ratios.begin(), ratios.end());
  double median = ratios.size() % 2 ? ratios[ratios.size() / 2]
                                    : (ratios[ratios.size() / 2 - 1] + ratios[ratios.size() / 2]) / 2;
  bool ok = sum_greedy >= sum_opt - 1e-9 && below_opt == 0 && median <= kGreedyMedianRatio && illegal == 0 &&
            pipeline_bad == 0;
  return {ok, fmt::format("{} graphs ({} need spills): greedy weight {} vs optimum {}, median ratio {:.3f} (limit {}), "
                          "{} illegal colorings, {} unverified allocations",
                          corpus.size(), with_spills, sum_greedy, sum_opt, median, kGreedyMedianRatio, illegal,
                          pipeline_bad)};
}

// ---------------------------------------------------------------------------

Outcome mir2vec() {
  auto t0 = Clock::now();
  const auto& md = fixtures::x86like();
  GenParams p;
  p.types = {"gr32", "gr64"};
  auto train_fns = generate_corpus(1, kVocabFunctions, p, md);
  auto held_fns = generate_corpus(1000000, kHeldOutFunctions, p, md);
  auto train = generate_triplets(train_fns, &md);
  auto held = generate_triplets(held_fns, &md);
  TransEConfig cfg;
  cfg.dim = kVocabDim;
  cfg.margin = kVocabMargin;
  auto vocab = train_transe(train, cfg);
  bool monotone = true;
  for (std::size_t k = 1; k < vocab.loss.size(); ++k) monotone = monotone && vocab.loss[k] <= vocab.loss[k - 1];

  std::set<Triplet> known(train.begin(), train.end());
  known.insert(held.begin(), held.end());
  std::vector<std::string> tails;
  for (const auto& t : known)
    if (t.relation == kNextInst) tails.push_back(t.tail);
  std::sort(tails.begin(), tails.end());
  tails.erase(std::unique(tails.begin(), tails.end()), tails.end());

  std::size_t ranked = 0, wins = 0;
  std::uint64_t r = 12345;
  for (const auto& t : held) {
    if (t.relation != kNextInst) continue;
    std::vector<std::string> corrupt;
    for (const auto& c : tails)
      if (!known.count(Triplet{t.head, t.relation, c})) corrupt.push_back(c);
    if (corrupt.empty()) continue;
    r = splitmix64(r);
    const std::string& c = corrupt[r % corrupt.size()];
    ++ranked;
    wins += transe_distance(vocab, t.head, t.relation, t.tail) < transe_distance(vocab, t.head, t.relation, c);
  }
  double rate = ranked ? static_cast<double>(wins) / static_cast<double>(ranked) : 0.0;
  double secs = seconds_since(t0);
  return {monotone && rate >= kRankThreshold && secs < kVocabSeconds,
          fmt::format("{} training triplets, margin {}, loss {:.4f} -> {:.4f} over {} epochs ({}), held-out NextInst ranked "
                      "above filtered corruption {}/{} = {:.1f}% (need {:.0f}%), {:.1f}s (limit {}s)",
                      train.size(), cfg.margin, vocab.loss.front(), vocab.loss.back(), cfg.epochs,
                      monotone ? "monotone" : "NOT monotone", wins, ranked, 100 * rate, 100 * kRankThreshold, secs,
                      kVocabSeconds)};
}

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::err);
  struct Entry {
    const char* name;
    std::function<Outcome()> run;
  };
  std::vector<Entry> criteria{
      {"constraint equivalence", constraint_equivalence},
      {"semantic preservation", semantic_preservation},
      {"running example split makes 3 registers suffice", fig2_reproduction},
      {"reward arithmetic", reward_arithmetic},
      {"dominance frontier", dominance_frontier_oracle},
      {"protocol equivalence", protocol_equivalence},
      {"greedy baseline sanity", greedy_sanity},
      {"instruction embeddings", mir2vec},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s  %s: %s\n", o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
  return failed ? 1 : 0;
}
