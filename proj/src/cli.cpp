#include "regalloc/cli.hpp"

#include <omp.h>
#include <pthread.h>

#include <algorithm>
#include <cmath>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "regalloc/baselines.hpp"
#include "regalloc/corpus.hpp"
#include "regalloc/error.hpp"
#include "regalloc/interpreter.hpp"
#include "regalloc/protocol.hpp"
#include "regalloc/transcript.hpp"

namespace regalloc {

namespace {

// A usage problem: bad flag values, unreadable inputs, unknown machines.
struct UsageError : Error {
  using Error::Error;
};

void configure_logging() {
  static const bool once = [] {
    auto logger = spdlog::stderr_color_mt("regalloc-rl");
    spdlog::set_default_logger(logger);
    return true;
  }();
  (void)once;
  const char* env = std::getenv("REGALLOC_RL_LOG");
  spdlog::set_level(env ? spdlog::level::from_str(env) : spdlog::level::warn);
}

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw UsageError("cannot write '" + path + "'");
  out << text;
}

MachineDescription machine_or_usage(const std::string& name) {
  try {
    return resolve_machine(name);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
}

MachineFunction function_or_usage(const std::string& path, const MachineDescription& md) {
  std::string text = read_text(path);
  try {
    return parse_function(text, &md);
  } catch (const Error& e) {
    throw UsageError(path + ": " + e.what());
  }
}

// "A:B" -> (A, B).
std::pair<std::uint64_t, std::uint64_t> parse_pair(const std::string& s, const std::string& what) {
  auto colon = s.find(':');
  try {
    if (colon == std::string::npos) throw std::invalid_argument(s);
    std::size_t used = 0;
    std::uint64_t a = std::stoull(s.substr(0, colon), &used);
    if (used != colon) throw std::invalid_argument(s);
    std::string rest = s.substr(colon + 1);
    std::uint64_t b = std::stoull(rest, &used);
    if (used != rest.size()) throw std::invalid_argument(s);
    return {a, b};
  } catch (const std::logic_error&) {
    throw UsageError(what + " expects N:M, got '" + s + "'");
  }
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

void print_table(std::ostream& out, const Table& t, bool csv) {
  if (csv) {
    auto line = [&](const std::vector<std::string>& r) {
      for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << csv_field(r[i]);
      out << "\n";
    };
    line(t.header);
    for (const auto& r : t.rows) line(r);
    return;
  }
  std::vector<std::size_t> w(t.header.size(), 0);
  auto widen = [&](const std::vector<std::string>& r) {
    for (std::size_t i = 0; i < r.size() && i < w.size(); ++i) w[i] = std::max(w[i], r[i].size());
  };
  widen(t.header);
  for (const auto& r : t.rows) widen(r);
  auto line = [&](const std::vector<std::string>& r) {
    for (std::size_t i = 0; i < r.size(); ++i) {
      // First column left aligned, the rest right aligned.
      out << (i ? "  " : "") << (i == 0 ? fmt::format("{:<{}}", r[i], w[i]) : fmt::format("{:>{}}", r[i], w[i]));
    }
    out << "\n";
  };
  line(t.header);
  std::size_t total = 0;
  for (std::size_t x : w) total += x;
  out << std::string(total + 2 * (w.empty() ? 0 : w.size() - 1), '-') << "\n";
  for (const auto& r : t.rows) line(r);
}

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (v == std::floor(v) && std::abs(v) < 1e15) return fmt::format("{}", static_cast<long long>(v));
  return fmt::format("{:.4g}", v);
}

std::string pct(double v) { return std::isnan(v) ? "n/a" : fmt::format("{:.1f}", v); }

bool same_behavior(const MachineFunction& a, const MachineFunction& b, const MachineDescription& md,
                   std::string* why) {
  static const std::vector<std::vector<std::int64_t>> inputs{{}, {1, 2}, {-5, 40}, {7, 0}, {123456, -99}};
  for (const auto& in : inputs) {
    std::string ra, rb;
    try {
      ra = format_outputs(interpret(a, in, kDefaultFuel, &md));
    } catch (const InterpretError& e) {
      ra = std::string("error: ") + e.what();
    }
    try {
      rb = format_outputs(interpret(b, in, kDefaultFuel, &md));
    } catch (const InterpretError& e) {
      rb = std::string("error: ") + e.what();
    }
    if (ra != rb) {
      if (why) *why = "outputs differ: input gave '" + ra + "' before and '" + rb + "' after allocation";
      return false;
    }
  }
  return true;
}

double weight_of(const MachineFunction& working, const std::vector<std::string>& names, const MachineDescription& md) {
  LivenessInfo live = compute_liveness(working, &md);
  double w = 0;
  for (const auto& n : names)
    if (auto v = working.find_vreg(n); v && live.weights.count(*v)) w += live.weights.at(*v);
  return w;
}

EnvConfig env_config(std::size_t min_v, std::size_t max_v, int split_limit) {
  EnvConfig c;
  c.min_vertices = min_v;
  c.max_vertices = max_v;
  if (split_limit >= 0) c.split_limit = static_cast<std::size_t>(split_limit);
  return c;
}

std::vector<MachineFunction> corpus_from(const std::string& dir, const std::string& seeds, const GenParams& gen,
                                         const MachineDescription& md) {
  if (!dir.empty() && !seeds.empty()) throw UsageError("give either --corpus or --seeds, not both");
  if (!dir.empty()) {
    if (!std::filesystem::is_directory(dir)) throw UsageError("corpus directory '" + dir + "' does not exist");
    try {
      auto c = load_corpus(dir, &md);
      if (c.empty()) throw UsageError("no .mir files under '" + dir + "'");
      return c;
    } catch (const UsageError&) {
      throw;
    } catch (const Error& e) {
      throw UsageError(e.what());
    }
  }
  if (seeds.empty()) throw UsageError("need --corpus DIR or --seeds LO:COUNT");
  auto [lo, count] = parse_pair(seeds, "--seeds");
  return generate_corpus(lo, count, gen, md);
}

// ---------------------------------------------------------------------------

struct AllocOpts {
  std::string input, machine = "x86like", policy = "greedy", record, out, map_out, virtual_out;
  std::uint64_t seed = 0;
  bool verify = false, dump_liveness = false, dump_graph = false, csv = false;
  std::size_t min_vertices = 4, max_vertices = 200;
  int split_limit = -1;
};

int cmd_alloc(const AllocOpts& o, std::ostream& out, std::ostream& err) {
  MachineDescription md = machine_or_usage(o.machine);
  MachineFunction fn = function_or_usage(o.input, md);
  if (o.dump_liveness) out << dump_liveness(fn, compute_liveness(fn, &md));
  if (o.dump_graph) {
    LivenessInfo live = compute_liveness(fn, &md);
    out << dump_graph(build_interference_graph(fn, live, &md));
  }

  GreedyResult g = greedy_allocate(fn, md);
  Materialized result = g.out;
  MachineFunction working = g.working;
  std::size_t splits = g.splits;
  std::string note;
  std::optional<Transcript> transcript;

  if (o.policy != "greedy") {
    EnvConfig cfg = env_config(o.min_vertices, o.max_vertices, o.split_limit);
    Environment env(md, cfg);
    ResetStatus status = env.reset(fn);
    Transcript t;
    t.function = print_function(fn);
    t.machine = o.machine;
    t.config = cfg;
    t.policy = o.policy;
    t.seed = o.seed;
    t.status = status;
    if (status == ResetStatus::Ready) {
      Policy p;
      if (o.policy == "random") {
        p = random_policy(o.seed);
      } else if (o.policy == "oracle") {
        if (env.graph().num_vregs() > 12)
          throw UsageError("the oracle policy handles at most 12 virtual registers; this function has " +
                           std::to_string(env.graph().num_vregs()));
        p = oracle_policy(env);
      } else if (o.policy.rfind("remote:", 0) == 0) {
        auto [host, port] = parse_host_port(o.policy.substr(7));
        p = remote_policy(host, port);
      } else {
        throw UsageError("unknown policy '" + o.policy + "' (greedy, random, oracle or remote:HOST:PORT)");
      }
      Episode ep = run_episode(env, p);
      FinalizeResult f = env.finalize(g);
      result = f.out;
      working = env.working();
      splits = env.splits();
      t.steps = std::move(ep.steps);
      t.total_reward = ep.total_reward;
      t.global_reward = f.global_reward;
      t.rl_cost = f.rl_cost;
      t.baseline_cost = f.baseline_cost;
      t.color_map = f.out.full_map;
    } else {
      note = status == ResetStatus::Done ? "no virtual registers" : "vertex count outside the episode range; greedy used";
    }
    transcript = std::move(t);
  } else if (!o.record.empty()) {
    throw UsageError("--record needs an environment policy (random, oracle or remote:HOST:PORT)");
  }

  std::vector<std::string> spilled(result.spilled.begin(), result.spilled.end());
  spilled.insert(spilled.end(), result.evicted.begin(), result.evicted.end());
  std::sort(spilled.begin(), spilled.end());
  spilled.erase(std::unique(spilled.begin(), spilled.end()), spilled.end());
  const double cost = estimate_throughput(md, result.physical_fn);

  Table t{{"field", "value"}, {}};
  t.rows.push_back({"function", fn.name});
  t.rows.push_back({"machine", md.name()});
  t.rows.push_back({"policy", o.policy});
  t.rows.push_back({"cost", num(cost)});
  t.rows.push_back({"greedy_cost", num(g.cost)});
  t.rows.push_back({"spills", std::to_string(spilled.size())});
  t.rows.push_back({"spilled_weight", num(weight_of(working, spilled, md))});
  t.rows.push_back({"splits", std::to_string(splits)});
  t.rows.push_back({"reload_temps", std::to_string(result.reload_temps.size())});
  std::string names;
  for (const auto& s : spilled) names += (names.empty() ? "%" : " %") + s;
  t.rows.push_back({"spilled", names.empty() ? "-" : names});
  if (transcript && transcript->status == ResetStatus::Ready) {
    t.rows.push_back({"episode_return", num(transcript->total_reward)});
    t.rows.push_back({"global_reward", num(transcript->global_reward)});
  }
  if (!note.empty()) t.rows.push_back({"note", note});
  print_table(out, t, o.csv);

  if (!o.out.empty()) write_text(o.out, print_function(result.physical_fn));
  if (!o.map_out.empty()) write_text(o.map_out, format_color_map(result.full_map));
  if (!o.virtual_out.empty()) write_text(o.virtual_out, print_function(result.virtual_fn));
  if (!o.record.empty() && transcript) write_text(o.record, Json(*transcript).dump(2) + "\n");

  if (o.verify) {
    LivenessInfo live = compute_liveness(result.virtual_fn, &md);
    auto violations = verify_allocation(result.virtual_fn, live, result.full_map, md);
    std::string why;
    bool same = same_behavior(fn, result.physical_fn, md, &why);
    for (const auto& v : violations) err << "violation: " << format_violation(v) << "\n";
    if (!same) err << "semantics: " << why << "\n";
    if (!violations.empty() || !same) {
      out << "verification: FAILED\n";
      return kExitVerifyFailed;
    }
    out << "verification: ok\n";
  }
  return kExitOk;
}

struct VerifyOpts {
  std::string input, map, machine = "x86like", transcript, original;
};

int cmd_verify(const VerifyOpts& o, std::ostream& out, std::ostream& err) {
  if (!o.transcript.empty()) {
    Transcript t;
    try {
      t = Json::parse(read_text(o.transcript)).get<Transcript>();
    } catch (const Json::exception& e) {
      err << "transcript: " << e.what() << "\n";
      return kExitVerifyFailed;
    }
    ReplayReport r = replay_transcript(t);
    if (!r.ok) {
      err << "replay: " << r.message << "\n";
      out << "verification: FAILED\n";
      return kExitVerifyFailed;
    }
    out << "replay: " << t.steps.size() << " steps match\nverification: ok\n";
    return kExitOk;
  }
  if (o.input.empty() || o.map.empty()) throw UsageError("verify needs --input and --map (or --transcript)");
  MachineDescription md = machine_or_usage(o.machine);
  MachineFunction fn = function_or_usage(o.input, md);
  ColorMap cmap;
  try {
    cmap = parse_color_map(read_text(o.map));
  } catch (const UsageError&) {
    throw;
  } catch (const Error& e) {
    err << "color map: " << e.what() << "\n";
    out << "verification: FAILED\n";
    return kExitVerifyFailed;
  }
  LivenessInfo live = compute_liveness(fn, &md);
  auto violations = verify_allocation(fn, live, cmap, md);
  for (const auto& v : violations) out << "violation: " << format_violation(v) << "\n";
  bool same = true;
  if (violations.empty() && !o.original.empty()) {
    MachineFunction orig = function_or_usage(o.original, md);
    std::string why;
    same = same_behavior(orig, apply_assignment(fn, cmap, md), md, &why);
    if (!same) out << "semantics: " << why << "\n";
  }
  if (!violations.empty() || !same) {
    out << "verification: FAILED (" << violations.size() << " violations)\n";
    return kExitVerifyFailed;
  }
  out << "verification: ok\n";
  return kExitOk;
}

struct GenOpts {
  std::uint64_t seed = 0;
  std::size_t count = 1;
  std::string out, machine = "x86like", types = "gr32";
  GenParams params;
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');)
    if (!item.empty()) out.push_back(item);
  return out;
}

int cmd_gen(GenOpts o, std::ostream& out) {
  MachineDescription md = machine_or_usage(o.machine);
  o.params.types = split_list(o.types);
  if (o.params.types.empty()) throw UsageError("--types must name at least one type");
  if (o.out.empty()) {
    for (std::size_t i = 0; i < o.count; ++i) out << print_function(generate_random_function(o.seed + i, o.params, &md));
    return kExitOk;
  }
  std::filesystem::create_directories(o.out);
  for (std::size_t i = 0; i < o.count; ++i) {
    auto path = std::filesystem::path(o.out) / fmt::format("fn_{:06}.mir", o.seed + i);
    write_text(path.string(), print_function(generate_random_function(o.seed + i, o.params, &md)));
  }
  out << "wrote " << o.count << " functions to " << o.out << "\n";
  return kExitOk;
}

struct EmbedOpts {
  std::string corpus, seeds, machine = "x86like", out;
  TransEConfig cfg;
};

int cmd_embed(const EmbedOpts& o, std::ostream& out) {
  MachineDescription md = machine_or_usage(o.machine);
  auto corpus = corpus_from(o.corpus, o.seeds, GenParams{}, md);
  auto triplets = generate_triplets(corpus, &md);
  if (triplets.empty()) throw UsageError("the corpus yields no triplets");
  EmbeddingVocabulary vocab = train_transe(triplets, o.cfg);
  write_text(o.out, save_vocabulary(vocab));
  Table t{{"field", "value"}, {}};
  t.rows.push_back({"functions", std::to_string(corpus.size())});
  t.rows.push_back({"triplets", std::to_string(triplets.size())});
  t.rows.push_back({"entities", std::to_string(vocab.entities.size())});
  t.rows.push_back({"relations", std::to_string(vocab.relations.size())});
  t.rows.push_back({"initial_loss", fmt::format("{:.6f}", vocab.loss.front())});
  t.rows.push_back({"final_loss", fmt::format("{:.6f}", vocab.loss.back())});
  t.rows.push_back({"output", o.out});
  print_table(out, t, false);
  return kExitOk;
}

struct ServeOpts {
  std::uint16_t port = 5050;
  std::string bind = "127.0.0.1", machine = "x86like", vocab, corpus, seed_range;
  bool stdio = false;
  std::size_t min_vertices = 4, max_vertices = 200;
  int split_limit = -1;
};

int cmd_serve(const ServeOpts& o, std::ostream& out) {
  ServerConfig cfg;
  MachineDescription md = machine_or_usage(o.machine);
  cfg.machine = o.machine;
  cfg.env = env_config(o.min_vertices, o.max_vertices, o.split_limit);
  EmbeddingVocabulary vocab;
  if (!o.vocab.empty()) {
    try {
      vocab = load_vocabulary(read_text(o.vocab));
    } catch (const UsageError&) {
      throw;
    } catch (const std::exception& e) {
      throw UsageError(o.vocab + ": " + e.what());
    }
    cfg.vocab = &vocab;
  }
  if (!o.corpus.empty()) cfg.corpus = corpus_from(o.corpus, "", GenParams{}, md);
  if (!o.seed_range.empty()) std::tie(cfg.seed_lo, cfg.seed_hi) = parse_pair(o.seed_range, "--seed-range");
  if (cfg.seed_lo > cfg.seed_hi) throw UsageError("--seed-range needs LO <= HI");

  if (o.stdio) {
    FdTransport t(0, 1, false);
    serve_session(t, cfg, 1);
    return kExitOk;
  }
  // SIGINT and SIGTERM are taken by a watcher thread that stops the server.
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
  TcpServer server(cfg, o.port, o.bind);
  out << "listening on " << o.bind << ":" << server.port() << std::endl;
  std::thread watcher([&] {
    int sig = 0;
    sigwait(&set, &sig);
    server.stop();
  });
  server.run();
  if (watcher.joinable()) {
    pthread_kill(watcher.native_handle(), SIGTERM);
    watcher.join();
  }
  return kExitOk;
}

struct StatsOpts {
  std::string corpus, seeds, machine = "x86like";
  bool csv = false;
};

int cmd_stats(const StatsOpts& o, std::ostream& out) {
  MachineDescription md = machine_or_usage(o.machine);
  auto corpus = corpus_from(o.corpus, o.seeds, GenParams{}, md);
  Table t{{"function", "vertices", "interferences", "pressure"}, {}};
  std::vector<double> v, e, p;
  for (const auto& fn : corpus) {
    LivenessInfo live = compute_liveness(fn, &md);
    InterferenceGraph g = build_interference_graph(fn, live, &md);
    v.push_back(static_cast<double>(g.num_vregs()));
    e.push_back(static_cast<double>(g.num_edges()));
    p.push_back(static_cast<double>(register_pressure(fn, live)));
    t.rows.push_back({fn.name, num(v.back()), num(e.back()), num(p.back())});
  }
  print_table(out, t, o.csv);
  Table c{{"pair", "pearson_r"}, {}};
  c.rows.push_back({"vertices~interferences", fmt::format("{:.4f}", pearson(v, e))});
  c.rows.push_back({"vertices~pressure", fmt::format("{:.4f}", pearson(v, p))});
  c.rows.push_back({"interferences~pressure", fmt::format("{:.4f}", pearson(e, p))});
  out << "\n";
  print_table(out, c, o.csv);
  return kExitOk;
}

struct BenchOpts {
  std::string corpus, seeds, machine = "x86like", policies = "random";
  std::uint64_t seed = 0;
  int threads = 0;
  bool csv = false, serial = false;
};

struct PolicyRun {
  double cost = 0;
  double spilled_weight = 0;
  bool ok = false;  // false when the policy does not apply (oracle on large functions)
};

PolicyRun run_policy_on(const MachineFunction& fn, const MachineDescription& md, const std::string& policy,
                        std::uint64_t seed, const GreedyResult& g) {
  PolicyRun r;
  Environment env(md, EnvConfig{});
  if (env.reset(fn) != ResetStatus::Ready) return {g.cost, g.spilled_weight, true};
  if (policy == "oracle" && env.graph().num_vregs() > 12) return r;
  Policy p = policy == "oracle" ? oracle_policy(env) : random_policy(seed);
  run_episode(env, p);
  FinalizeResult f = env.finalize(g);
  std::vector<std::string> names(f.out.spilled.begin(), f.out.spilled.end());
  names.insert(names.end(), f.out.evicted.begin(), f.out.evicted.end());
  return {f.rl_cost, weight_of(env.working(), names, md), true};
}

int cmd_bench(const BenchOpts& o, std::ostream& out) {
  MachineDescription md = machine_or_usage(o.machine);
  auto corpus = corpus_from(o.corpus, o.seeds, GenParams{}, md);
  auto policies = split_list(o.policies);
  for (const auto& p : policies)
    if (p != "random" && p != "oracle") throw UsageError("bench policies are random and oracle, got '" + p + "'");

  const std::size_t n = corpus.size(), k = policies.size();
  std::vector<GreedyResult> greedy(n);
  std::vector<std::vector<PolicyRun>> runs(n, std::vector<PolicyRun>(k));
  std::vector<std::string> errors(n);
  auto work = [&](std::size_t i) {
    try {
      greedy[i] = greedy_allocate(corpus[i], md);
      for (std::size_t j = 0; j < k; ++j)
        runs[i][j] = run_policy_on(corpus[i], md, policies[j], splitmix64(o.seed + i), greedy[i]);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  };
  if (o.serial) {
    for (std::size_t i = 0; i < n; ++i) work(i);
  } else {
    const int nt = o.threads > 0 ? o.threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic, 1) num_threads(nt)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) work(static_cast<std::size_t>(i));
  }
  for (std::size_t i = 0; i < n; ++i)
    if (!errors[i].empty()) throw Error(corpus[i].name + ": " + errors[i]);

  Table totals{{"policy", "functions", "total_cost", "total_spilled_weight"}, {}};
  double gc = 0, gw = 0;
  for (const auto& g : greedy) {
    gc += g.cost;
    gw += g.spilled_weight;
  }
  totals.rows.push_back({"greedy", std::to_string(n), num(gc), num(gw)});
  // Percent cost improvement over greedy per function: positive is better.
  Table diff{{"stat"}, {}};
  std::vector<std::vector<double>> pcts(k);
  for (std::size_t j = 0; j < k; ++j) {
    double c = 0, w = 0;
    std::size_t used = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!runs[i][j].ok) continue;
      ++used;
      c += runs[i][j].cost;
      w += runs[i][j].spilled_weight;
      double base = greedy[i].cost;
      pcts[j].push_back(base > 0 ? 100.0 * (base - runs[i][j].cost) / base : 0.0);
    }
    totals.rows.push_back({policies[j], std::to_string(used), num(c), num(w)});
    diff.header.push_back(policies[j]);
  }
  auto stat_row = [&](const std::string& name, auto f) {
    std::vector<std::string> row{name};
    for (std::size_t j = 0; j < k; ++j) row.push_back(f(pcts[j]));
    diff.rows.push_back(std::move(row));
  };
  stat_row("average", [](const std::vector<double>& x) {
    if (x.empty()) return std::string("n/a");
    double s = 0;
    for (double d : x) s += d;
    return pct(s / static_cast<double>(x.size()));
  });
  stat_row("# (val>0)", [](const std::vector<double>& x) {
    return std::to_string(std::count_if(x.begin(), x.end(), [](double d) { return d > 0; }));
  });
  stat_row("# (val<0)", [](const std::vector<double>& x) {
    return std::to_string(std::count_if(x.begin(), x.end(), [](double d) { return d < 0; }));
  });
  stat_row("max", [](const std::vector<double>& x) {
    return x.empty() ? std::string("n/a") : pct(*std::max_element(x.begin(), x.end()));
  });
  stat_row("min", [](const std::vector<double>& x) {
    return x.empty() ? std::string("n/a") : pct(*std::min_element(x.begin(), x.end()));
  });
  print_table(out, totals, o.csv);
  out << "\n";
  if (!o.csv) out << "% cost improvement over greedy\n";
  print_table(out, diff, o.csv);
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  configure_logging();
  CLI::App app{"Register allocation environment, baselines and tools", "regalloc-rl"};
  app.require_subcommand(1);

  AllocOpts ao;
  auto* alloc = app.add_subcommand("alloc", "Allocate registers for one MIR function");
  alloc->add_option("--input", ao.input, "MIR file")->required();
  alloc->add_option("--machine", ao.machine, "x86like, arm64like, uniformN or a JSON path");
  alloc->add_option("--policy", ao.policy, "greedy, random, oracle or remote:HOST:PORT");
  alloc->add_option("--seed", ao.seed, "seed for the random policy");
  alloc->add_flag("--verify", ao.verify, "check the result with the verifier and the interpreter");
  alloc->add_option("--record", ao.record, "write the episode transcript (JSON)");
  alloc->add_option("--out", ao.out, "write the allocated function");
  alloc->add_option("--map-out", ao.map_out, "write the color map");
  alloc->add_option("--virtual-out", ao.virtual_out, "write the function with spill code, before rewriting");
  alloc->add_flag("--dump-liveness", ao.dump_liveness, "print live ranges first");
  alloc->add_flag("--dump-graph", ao.dump_graph, "print the interference graph first");
  alloc->add_flag("--csv", ao.csv, "CSV output");
  alloc->add_option("--min-vertices", ao.min_vertices, "smallest function handled by the environment");
  alloc->add_option("--max-vertices", ao.max_vertices, "largest function handled by the environment");
  alloc->add_option("--split-limit", ao.split_limit, "split budget per episode (default 2|V|)");

  VerifyOpts vo;
  auto* verify = app.add_subcommand("verify", "Check a color map against a function, or replay a transcript");
  verify->add_option("--input", vo.input, "MIR function the map refers to (with spill code)");
  verify->add_option("--map", vo.map, "color map file");
  verify->add_option("--machine", vo.machine, "machine");
  verify->add_option("--original", vo.original, "original MIR; also compare interpreter outputs");
  verify->add_option("--transcript", vo.transcript, "transcript JSON to replay");

  GenOpts go;
  auto* gen = app.add_subcommand("gen", "Generate random MIR functions");
  gen->add_option("--seed", go.seed, "first seed");
  gen->add_option("--count", go.count, "number of functions");
  gen->add_option("--out", go.out, "output directory (stdout when absent)");
  gen->add_option("--machine", go.machine, "machine");
  gen->add_option("--blocks", go.params.blocks, "soft cap on blocks");
  gen->add_option("--instrs", go.params.instrs, "soft cap on statements");
  gen->add_option("--vregs", go.params.vregs, "data registers");
  gen->add_option("--loop-prob", go.params.loop_prob, "loop probability")->check(CLI::Range(0.0, 1.0));
  gen->add_option("--types", go.types, "comma separated register types");
  gen->add_option("--max-params", go.params.max_params, "parameters at most");
  gen->add_option("--call-prob", go.params.call_prob, "call probability")->check(CLI::Range(0.0, 1.0));
  gen->add_option("--max-loop-depth", go.params.max_loop_depth, "loop nesting at most");

  EmbedOpts eo;
  auto* embed = app.add_subcommand("embed", "Instruction embeddings");
  embed->require_subcommand(1);
  auto* train = embed->add_subcommand("train-vocab", "Train a TransE vocabulary on a corpus");
  train->add_option("--corpus", eo.corpus, "directory of MIR files");
  train->add_option("--seeds", eo.seeds, "LO:COUNT generated functions");
  train->add_option("--machine", eo.machine, "machine");
  train->add_option("--dim", eo.cfg.dim, "embedding dimension")->check(CLI::PositiveNumber);
  train->add_option("--epochs", eo.cfg.epochs, "training epochs");
  train->add_option("--margin", eo.cfg.margin, "ranking margin");
  train->add_option("--lr", eo.cfg.lr, "learning rate")->check(CLI::PositiveNumber);
  train->add_option("--seed", eo.cfg.seed, "seed");
  train->add_option("--out", eo.out, "vocabulary JSON")->required();

  ServeOpts so;
  auto* serve = app.add_subcommand("serve", "Serve environment sessions over TCP or stdio");
  serve->add_option("--port", so.port, "TCP port (0 picks one)");
  serve->add_option("--bind", so.bind, "bind address");
  serve->add_flag("--stdio", so.stdio, "one session over stdin and stdout");
  serve->add_option("--machine", so.machine, "default machine");
  serve->add_option("--vocab", so.vocab, "vocabulary JSON for node features");
  serve->add_option("--corpus", so.corpus, "directory of MIR files addressable by corpus_index");
  serve->add_option("--seed-range", so.seed_range, "LO:HI accepted corpus_seed values");
  serve->add_option("--min-vertices", so.min_vertices, "smallest function handled");
  serve->add_option("--max-vertices", so.max_vertices, "largest function handled");
  serve->add_option("--split-limit", so.split_limit, "split budget per episode");

  StatsOpts sto;
  auto* stats = app.add_subcommand("stats", "Per-function graph size and pressure with correlations");
  stats->add_option("--corpus", sto.corpus, "directory of MIR files");
  stats->add_option("--seeds", sto.seeds, "LO:COUNT generated functions");
  stats->add_option("--machine", sto.machine, "machine");
  stats->add_flag("--csv", sto.csv, "CSV output");

  BenchOpts bo;
  auto* bench = app.add_subcommand("bench", "Compare policies against greedy over a corpus");
  bench->add_option("--corpus", bo.corpus, "directory of MIR files");
  bench->add_option("--seeds", bo.seeds, "LO:COUNT generated functions");
  bench->add_option("--machine", bo.machine, "machine");
  bench->add_option("--policies", bo.policies, "comma separated: random, oracle");
  bench->add_option("--seed", bo.seed, "policy seed");
  bench->add_option("--threads", bo.threads, "worker threads (0 = default)");
  bench->add_flag("--serial", bo.serial, "single-threaded reference run");
  bench->add_flag("--csv", bo.csv, "CSV output");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    for (auto* sub : app.get_subcommands()) err << sub->help();
    if (app.get_subcommands().empty()) err << app.help();
    return kExitUsage;
  }

  try {
    if (alloc->parsed()) return cmd_alloc(ao, out, err);
    if (verify->parsed()) return cmd_verify(vo, out, err);
    if (gen->parsed()) return cmd_gen(go, out);
    if (train->parsed()) return cmd_embed(eo, out);
    if (serve->parsed()) return cmd_serve(so, out);
    if (stats->parsed()) return cmd_stats(sto, out);
    if (bench->parsed()) return cmd_bench(bo, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitVerifyFailed;
  }
  err << "error: no command\n";
  return kExitUsage;
}

}  // namespace regalloc
