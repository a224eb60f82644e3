#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "regalloc/igraph.hpp"
#include "regalloc/transforms.hpp"

namespace regalloc {

struct GraphColoring {
  ColorMap cmap;  // every vreg vertex: register or kSpill
  double spilled_weight = 0;
  std::size_t spill_count = 0;
};

struct GreedyResult {
  MachineFunction working;  // after splits, before spill code
  ColorMap decisions;       // over working's vregs
  Materialized out;
  double cost = 0;
  double spilled_weight = 0;  // M over spilled working vregs, evictions included
  std::size_t splits = 0;
};

/// Registers of `chi` with call-clobbered ones moved last, order otherwise kept.
std::vector<RegId> prefer_callee_saved(const MachineDescription& md, const std::vector<RegId>& chi);

/// Priority-queue allocator: decreasing M, ties by first point then name. A
/// vertex with empty chi is split at the access followed by the widest gap
/// that leaves the first half colorable, otherwise spilled.
GreedyResult greedy_allocate(const MachineFunction& fn, const MachineDescription& md);

/// The same priority order on a fixed graph, no splitting.
GraphColoring greedy_color_graph(const InterferenceGraph& g, const MachineDescription& md);

/// Minimum spilled weight (then spill count) over all legal colorings.
/// Throws PreconditionError when the graph has more than `max_vertices` vregs.
GraphColoring brute_force_color(const InterferenceGraph& g, const MachineDescription& md, std::size_t max_vertices = 12);

/// Uniform choice from `mask`, a pure function of (seed, step).
std::size_t random_policy_index(std::size_t mask_size, std::uint64_t seed, std::uint64_t step);

}  // namespace regalloc
