#pragma once

#include <map>
#include <optional>
#include <set>
#include <utility>
#include <vector>

#include "regalloc/mir.hpp"

namespace regalloc {

using Successors = std::vector<std::vector<BlockId>>;

/// Immediate dominators by the Cooper-Harvey-Kennedy iteration over reverse
/// post-order. Unreachable blocks have no idom and dominate nothing.
class DominatorTree {
 public:
  DominatorTree(const Successors& succs, BlockId entry = 0);

  bool reachable(BlockId b) const { return reachable_.at(b); }
  std::optional<BlockId> idom(BlockId b) const { return idom_.at(b); }
  bool dominates(BlockId a, BlockId b) const;
  bool strictly_dominates(BlockId a, BlockId b) const { return a != b && dominates(a, b); }
  const std::vector<BlockId>& reverse_post_order() const { return rpo_; }
  BlockId entry() const { return entry_; }
  std::size_t size() const { return idom_.size(); }

 private:
  BlockId entry_;
  std::vector<bool> reachable_;
  std::vector<std::optional<BlockId>> idom_;
  std::vector<std::size_t> rpo_index_;
  std::vector<BlockId> rpo_;
};

struct DominanceFrontier {
  std::map<BlockId, std::set<BlockId>> frontier;  // reachable blocks only
  std::vector<BlockId> unreachable;
};

DominanceFrontier compute_dominance_frontier(const Successors& succs, BlockId entry = 0);
DominanceFrontier dominance_frontier(const MachineFunction& fn);

struct LoopInfo {
  std::vector<std::uint32_t> depth;               // per block, 0 outside loops
  std::vector<std::pair<BlockId, BlockId>> back_edges;  // (latch, header)
  bool reducible = true;
};

/// Natural loops from dominator back edges; loops sharing a header are merged.
LoopInfo compute_loops(const Successors& succs, const DominatorTree& dom);

}  // namespace regalloc
