#include "regalloc/dominance.hpp"

#include <algorithm>
#include <functional>

namespace regalloc {

DominatorTree::DominatorTree(const Successors& succs, BlockId entry)
    : entry_(entry), reachable_(succs.size(), false), idom_(succs.size()), rpo_index_(succs.size(), 0) {
  if (succs.empty()) return;

  // Iterative DFS post-order.
  std::vector<BlockId> post;
  std::vector<std::pair<BlockId, std::size_t>> stack{{entry, 0}};
  reachable_[entry] = true;
  while (!stack.empty()) {
    auto& [b, next] = stack.back();
    if (next < succs[b].size()) {
      BlockId s = succs[b][next++];
      if (!reachable_[s]) {
        reachable_[s] = true;
        stack.push_back({s, 0});
      }
    } else {
      post.push_back(b);
      stack.pop_back();
    }
  }
  rpo_.assign(post.rbegin(), post.rend());
  for (std::size_t i = 0; i < rpo_.size(); ++i) rpo_index_[rpo_[i]] = i;

  std::vector<std::vector<BlockId>> preds(succs.size());
  for (BlockId b = 0; b < succs.size(); ++b)
    if (reachable_[b])
      for (BlockId s : succs[b]) preds[s].push_back(b);

  auto intersect = [&](BlockId a, BlockId b) {
    while (a != b) {
      while (rpo_index_[a] > rpo_index_[b]) a = *idom_[a];
      while (rpo_index_[b] > rpo_index_[a]) b = *idom_[b];
    }
    return a;
  };

  idom_[entry] = entry;
  bool changed = true;
  while (changed) {
    changed = false;
    for (BlockId b : rpo_) {
      if (b == entry) continue;
      std::optional<BlockId> pick;
      for (BlockId p : preds[b]) {
        if (!idom_[p]) continue;
        pick = pick ? intersect(*pick, p) : p;
      }
      if (pick && idom_[b] != pick) {
        idom_[b] = pick;
        changed = true;
      }
    }
  }
  idom_[entry].reset();
}

bool DominatorTree::dominates(BlockId a, BlockId b) const {
  if (!reachable_.at(a) || !reachable_.at(b)) return false;
  for (std::optional<BlockId> cur = b; cur; cur = idom_[*cur])
    if (*cur == a) return true;
  return false;
}

DominanceFrontier compute_dominance_frontier(const Successors& succs, BlockId entry) {
  DominanceFrontier out;
  if (succs.empty()) return out;
  DominatorTree dom(succs, entry);

  std::vector<std::vector<BlockId>> preds(succs.size());
  for (BlockId b = 0; b < succs.size(); ++b) {
    if (!dom.reachable(b)) {
      out.unreachable.push_back(b);
      continue;
    }
    out.frontier[b];
    for (BlockId s : succs[b]) preds[s].push_back(b);
  }

  // Walk from each join point's predecessors up to its idom.
  for (BlockId b = 0; b < succs.size(); ++b) {
    if (!dom.reachable(b) || preds[b].size() < 2) continue;
    for (BlockId p : preds[b]) {
      std::optional<BlockId> runner = p;
      while (runner && *runner != dom.idom(b)) {
        out.frontier[*runner].insert(b);
        runner = dom.idom(*runner);
      }
    }
  }
  // A single-predecessor self loop (or back edge into the entry) is not a
  // join in the classic sense but still ends the block's dominance.
  for (BlockId b = 0; b < succs.size(); ++b) {
    if (!dom.reachable(b) || preds[b].size() >= 2) continue;
    for (BlockId p : preds[b])
      for (std::optional<BlockId> runner = p; runner; runner = dom.idom(*runner)) {
        if (dom.strictly_dominates(*runner, b)) break;
        out.frontier[*runner].insert(b);
      }
  }
  return out;
}

DominanceFrontier dominance_frontier(const MachineFunction& fn) { return compute_dominance_frontier(fn.cfg.succs, 0); }

LoopInfo compute_loops(const Successors& succs, const DominatorTree& dom) {
  LoopInfo info;
  info.depth.assign(succs.size(), 0);

  std::vector<std::vector<BlockId>> preds(succs.size());
  for (BlockId b = 0; b < succs.size(); ++b)
    if (dom.reachable(b))
      for (BlockId s : succs[b]) preds[s].push_back(b);

  // Retreating edges in a DFS must all be dominator back edges.
  std::vector<int> state(succs.size(), 0);  // 0 new, 1 on stack, 2 done
  std::function<void(BlockId)> dfs = [&](BlockId b) {
    state[b] = 1;
    for (BlockId s : succs[b]) {
      if (state[s] == 0) {
        dfs(s);
      } else if (state[s] == 1 && !dom.dominates(s, b)) {
        info.reducible = false;
      }
    }
    state[b] = 2;
  };
  if (!succs.empty()) dfs(dom.entry());

  std::map<BlockId, std::set<BlockId>> bodies;
  for (BlockId b = 0; b < succs.size(); ++b) {
    if (!dom.reachable(b)) continue;
    for (BlockId h : succs[b]) {
      if (!dom.dominates(h, b)) continue;
      info.back_edges.emplace_back(b, h);
      auto& body = bodies[h];
      body.insert(h);
      std::vector<BlockId> work{b};
      while (!work.empty()) {
        BlockId x = work.back();
        work.pop_back();
        if (!body.insert(x).second) continue;
        for (BlockId p : preds[x]) work.push_back(p);
      }
    }
  }
  for (const auto& [header, body] : bodies)
    for (BlockId b : body) ++info.depth[b];
  return info;
}

}  // namespace regalloc
