#include "regalloc/baselines.hpp"

#include <algorithm>
#include <bit>
#include <functional>
#include <tuple>

#include "regalloc/error.hpp"
#include "regalloc/generator.hpp"

namespace regalloc {

std::vector<RegId> prefer_callee_saved(const MachineDescription& md, const std::vector<RegId>& chi) {
  std::vector<RegId> out = chi;
  std::stable_partition(out.begin(), out.end(), [&](RegId r) { return !md.is_call_clobbered(r); });
  return out;
}

namespace {

std::vector<std::size_t> priority_order(const InterferenceGraph& g) {
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < g.vertices.size(); ++i)
    if (!g.vertices[i].is_phys) order.push_back(i);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const Vertex& x = g.vertices[a];
    const Vertex& y = g.vertices[b];
    return std::make_tuple(-x.weight, x.range.start, x.name) < std::make_tuple(-y.weight, y.range.start, y.name);
  });
  return order;
}

PartialAssignment assignment_from(const InterferenceGraph& g, const MachineDescription& md, const ColorMap& decisions) {
  PartialAssignment a = initial_assignment(g, md);
  for (std::size_t i = 0; i < g.vertices.size(); ++i) {
    if (g.vertices[i].is_phys) continue;
    auto it = decisions.find(g.vertices[i].name);
    if (it == decisions.end()) continue;
    if (it->second == kSpill)
      a.spilled[i] = true;
    else
      a.reg[i] = md.register_id(it->second);
  }
  return a;
}

}  // namespace

GreedyResult greedy_allocate(const MachineFunction& fn, const MachineDescription& md) {
  GreedyResult res;
  res.working = fn;
  const std::size_t split_cap = 2 * fn.live_vregs().size();
  ColorMap& dec = res.decisions;

  while (true) {
    LivenessInfo live = compute_liveness(res.working, &md);
    InterferenceGraph g = build_interference_graph(res.working, live, &md);
    PartialAssignment a = assignment_from(g, md, dec);
    bool restructured = false;
    for (std::size_t v : priority_order(g)) {
      if (a.decided(v)) continue;
      const Vertex& x = g.vertices[v];
      LegalSets s = legal_registers(g, md, a, v);
      if (!s.chi.empty()) {
        RegId r = prefer_callee_saved(md, s.chi).front();
        a.reg[v] = r;
        dec[x.name] = md.reg(r).id;
        continue;
      }
      const auto& K = live.uses.at(x.vreg);
      if (K.size() >= 3 && res.splits < split_cap) {
        // Candidates: interior accesses, widest following gap first.
        std::vector<std::size_t> idx;
        for (std::size_t j = 1; j + 1 < K.size(); ++j) idx.push_back(j);
        std::stable_sort(idx.begin(), idx.end(),
                         [&](std::size_t p, std::size_t q) { return K[p + 1] - K[p] > K[q + 1] - K[q]; });
        for (std::size_t j : idx) {
          SplitResult sr = split_live_range(res.working, x.vreg, K[j]);
          LivenessInfo l2 = compute_liveness(sr.fn, &md);
          InterferenceGraph g2 = build_interference_graph(sr.fn, l2, &md);
          PartialAssignment a2 = assignment_from(g2, md, dec);
          if (legal_registers(g2, md, a2, *g2.find_vreg(sr.first)).chi.empty()) continue;
          res.working = std::move(sr.fn);
          ++res.splits;
          restructured = true;
          break;
        }
        if (restructured) break;
      }
      a.spilled[v] = true;
      dec[x.name] = kSpill;
    }
    if (!restructured) break;
  }

  LivenessInfo live = compute_liveness(res.working, &md);
  res.out = materialize_allocation(res.working, dec, md);
  res.cost = estimate_throughput(md, res.out.physical_fn);
  for (const auto& name : res.out.spilled) res.spilled_weight += live.weights.at(*res.working.find_vreg(name));
  return res;
}

GraphColoring greedy_color_graph(const InterferenceGraph& g, const MachineDescription& md) {
  GraphColoring out;
  PartialAssignment a = initial_assignment(g, md);
  for (std::size_t v : priority_order(g)) {
    LegalSets s = legal_registers(g, md, a, v);
    if (s.chi.empty()) {
      a.spilled[v] = true;
      out.cmap[g.vertices[v].name] = kSpill;
      out.spilled_weight += g.vertices[v].weight;
      ++out.spill_count;
    } else {
      a.reg[v] = prefer_callee_saved(md, s.chi).front();
      out.cmap[g.vertices[v].name] = md.reg(*a.reg[v]).id;
    }
  }
  return out;
}

GraphColoring brute_force_color(const InterferenceGraph& g, const MachineDescription& md, std::size_t max_vertices) {
  std::vector<std::size_t> vs = priority_order(g);
  if (vs.size() > max_vertices)
    throw PreconditionError("brute_force_color: " + std::to_string(vs.size()) + " vregs exceed the limit of " +
                            std::to_string(max_vertices));
  // Spill sets in order of (weight, size, mask); the first colorable one is optimal.
  const std::size_t n = vs.size();
  std::vector<std::uint32_t> masks(std::size_t{1} << n);
  for (std::uint32_t m = 0; m < masks.size(); ++m) masks[m] = m;
  auto weight_of = [&](std::uint32_t m) {
    double w = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (m >> i & 1) w += g.vertices[vs[i]].weight;
    return w;
  };
  std::vector<double> weights(masks.size());
  for (std::uint32_t m = 0; m < masks.size(); ++m) weights[m] = weight_of(m);
  std::sort(masks.begin(), masks.end(), [&](std::uint32_t x, std::uint32_t y) {
    return std::make_tuple(weights[x], std::popcount(x), x) < std::make_tuple(weights[y], std::popcount(y), y);
  });

  for (std::uint32_t m : masks) {
    PartialAssignment a = initial_assignment(g, md);
    std::vector<std::size_t> todo;
    for (std::size_t i = 0; i < n; ++i) {
      if (m >> i & 1)
        a.spilled[vs[i]] = true;
      else
        todo.push_back(vs[i]);
    }
    // Most constrained first keeps the search shallow.
    std::sort(todo.begin(), todo.end(), [&](std::size_t x, std::size_t y) { return g.adj[x].size() > g.adj[y].size(); });
    std::function<bool(std::size_t)> color = [&](std::size_t i) -> bool {
      if (i == todo.size()) return true;
      for (RegId r : legal_registers(g, md, a, todo[i]).chi) {
        a.reg[todo[i]] = r;
        if (color(i + 1)) return true;
        a.reg[todo[i]].reset();
      }
      return false;
    };
    if (!color(0)) continue;
    GraphColoring out;
    for (std::size_t i = 0; i < n; ++i) {
      const Vertex& x = g.vertices[vs[i]];
      if (m >> i & 1) {
        out.cmap[x.name] = kSpill;
        out.spilled_weight += x.weight;
        ++out.spill_count;
      } else {
        out.cmap[x.name] = md.reg(*a.reg[vs[i]]).id;
      }
    }
    return out;
  }
  throw Error("brute_force_color: spilling everything must be colorable");
}

std::size_t random_policy_index(std::size_t mask_size, std::uint64_t seed, std::uint64_t step) {
  if (mask_size == 0) throw PreconditionError("random policy: empty mask");
  return static_cast<std::size_t>(splitmix64(splitmix64(seed) ^ (step * 0x9e3779b97f4a7c15ULL + 1)) % mask_size);
}

}  // namespace regalloc
