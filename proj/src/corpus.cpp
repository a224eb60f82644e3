#include "regalloc/corpus.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "regalloc/baselines.hpp"
#include "regalloc/error.hpp"
#include "regalloc/interpreter.hpp"
#include "regalloc/policy.hpp"

namespace regalloc {

std::vector<MachineFunction> generate_corpus(std::uint64_t seed_lo, std::size_t count, const GenParams& params,
                                             const MachineDescription& md) {
  std::vector<MachineFunction> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(generate_random_function(seed_lo + i, params, &md));
  return out;
}

std::vector<MachineFunction> load_corpus(const std::filesystem::path& dir, const MachineDescription* md) {
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".mir") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<MachineFunction> out;
  for (const auto& f : files) {
    std::ifstream in(f);
    std::stringstream ss;
    ss << in.rdbuf();
    try {
      out.push_back(parse_function(ss.str(), md));
    } catch (const Error& e) {
      throw Error(f.string() + ": " + e.what());
    }
  }
  return out;
}

namespace {

const std::vector<std::vector<std::int64_t>>& probe_inputs() {
  static const std::vector<std::vector<std::int64_t>> in{{}, {3, -7}, {1000, 12}};
  return in;
}

bool same_behavior(const MachineFunction& a, const MachineFunction& b, const MachineDescription& md) {
  for (const auto& in : probe_inputs()) {
    std::optional<Outputs> oa, ob;
    try {
      oa = interpret(a, in, kDefaultFuel, &md);
    } catch (const InterpretError&) {
    }
    try {
      ob = interpret(b, in, kDefaultFuel, &md);
    } catch (const InterpretError&) {
    }
    if (oa != ob) return false;
  }
  return true;
}

FunctionEval evaluate_one(const MachineFunction& fn, const MachineDescription& md, const EvalOptions& opts,
                          std::size_t index) {
  FunctionEval e;
  e.name = fn.name;
  e.vregs = fn.live_vregs().size();
  e.points = fn.num_points();
  try {
    GreedyResult g = greedy_allocate(fn, md);
    e.greedy_cost = g.cost;
    e.greedy_spilled_weight = g.spilled_weight;
    e.greedy_spills = g.out.spilled.size() + g.out.evicted.size();
    e.greedy_splits = g.splits;
    if (opts.check_semantics) e.semantics_ok = same_behavior(fn, g.out.physical_fn, md);

    Environment env(md, opts.env);
    if (env.reset(fn) != ResetStatus::Ready) {
      e.routed = true;
      e.rl_cost = g.cost;
      e.rl_spilled_weight = g.spilled_weight;
      return e;
    }
    Episode ep = run_episode(env, random_policy(splitmix64(opts.policy_seed + index)));
    e.rl_return = ep.total_reward;
    e.rl_splits = env.splits();
    e.rl_spilled_weight = spilled_weight(env);
    FinalizeResult f = env.finalize(g);
    e.rl_cost = f.rl_cost;
    e.global_reward = f.global_reward;
    if (opts.check_semantics) e.semantics_ok = e.semantics_ok && same_behavior(fn, f.out.physical_fn, md);
  } catch (const std::exception& ex) {
    e.error = ex.what();
  }
  return e;
}

}  // namespace

std::vector<FunctionEval> evaluate_corpus_serial(const std::vector<MachineFunction>& corpus,
                                                 const MachineDescription& md, const EvalOptions& opts) {
  std::vector<FunctionEval> out;
  out.reserve(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) out.push_back(evaluate_one(corpus[i], md, opts, i));
  return out;
}

std::vector<FunctionEval> evaluate_corpus_parallel(const std::vector<MachineFunction>& corpus,
                                                   const MachineDescription& md, const EvalOptions& opts,
                                                   int threads) {
  std::vector<FunctionEval> out(corpus.size());
  const auto n = static_cast<std::int64_t>(corpus.size());
  const int nt = threads > 0 ? threads : omp_get_max_threads();
  // evaluate_one never throws; each slot is written by exactly one thread.
#pragma omp parallel for schedule(dynamic, 1) num_threads(nt)
  for (std::int64_t i = 0; i < n; ++i)
    out[static_cast<std::size_t>(i)] = evaluate_one(corpus[static_cast<std::size_t>(i)], md, opts, static_cast<std::size_t>(i));
  return out;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = std::min(x.size(), y.size());
  if (n < 2) return std::numeric_limits<double>::quiet_NaN();
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0 || syy == 0) return std::numeric_limits<double>::quiet_NaN();
  return sxy / std::sqrt(sxx * syy);
}

CorpusSummary summarize(const std::vector<FunctionEval>& evals) {
  CorpusSummary s;
  s.functions = evals.size();
  std::vector<double> spill, cost;
  std::size_t ok = 0, played = 0, wins = 0;
  for (const auto& e : evals) {
    if (!e.error.empty()) {
      ++s.errors;
      continue;
    }
    ++ok;
    s.routed += e.routed;
    s.semantic_failures += !e.semantics_ok;
    s.mean_greedy_cost += e.greedy_cost;
    s.mean_rl_cost += e.rl_cost;
    s.mean_greedy_spilled_weight += e.greedy_spilled_weight;
    s.mean_rl_spilled_weight += e.rl_spilled_weight;
    spill.push_back(e.greedy_spilled_weight);
    cost.push_back(e.greedy_cost);
    if (!e.routed) {
      ++played;
      wins += e.global_reward > 0;
      spill.push_back(e.rl_spilled_weight);
      cost.push_back(e.rl_cost);
    }
  }
  if (ok) {
    const double d = static_cast<double>(ok);
    s.mean_greedy_cost /= d;
    s.mean_rl_cost /= d;
    s.mean_greedy_spilled_weight /= d;
    s.mean_rl_spilled_weight /= d;
  }
  s.rl_win_rate = played ? static_cast<double>(wins) / static_cast<double>(played) : 0.0;
  s.spill_cost_correlation = pearson(spill, cost);
  return s;
}

}  // namespace regalloc
