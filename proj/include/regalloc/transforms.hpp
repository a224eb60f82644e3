#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "regalloc/liveness.hpp"
#include "regalloc/machine.hpp"
#include "regalloc/mir.hpp"

namespace regalloc {

/// vreg name -> register id or kSpill.
using ColorMap = std::map<std::string, std::string>;
inline constexpr const char* kSpill = "SPILL";

struct SplitResult {
  MachineFunction fn;
  VRegId first = 0;   // v', covers [def, k]
  VRegId second = 0;  // v'', covers (k, end]
  std::uint32_t split_move = 0;
  std::vector<std::uint32_t> repair_moves;
};

/// Splits `v` at access point `k`: v'' = mov v' goes right after `k` (before
/// it when `k` is a terminator); the rest of k's block and every block it
/// strictly dominates read v''; every other access reads v'. Predecessors of
/// dominance-frontier blocks that lie in that region get v' = mov v'' when
/// v is live into the frontier block.
SplitResult split_live_range(const MachineFunction& fn, VRegId v, std::uint32_t k);

struct SpillResult {
  MachineFunction fn;
  std::int64_t slot = 0;
  std::vector<VRegId> temps;
};

/// Rewrites every access to `v` through a fresh stack slot: a def writes a
/// fresh temp then stores it, a use loads into a fresh temp first. An
/// instruction reading and writing `v` shares one temp.
SpillResult insert_spill(const MachineFunction& fn, VRegId v);

/// Replaces every vreg operand (and param) by its register.
MachineFunction apply_assignment(const MachineFunction& fn, const ColorMap& cmap, const MachineDescription& md);

struct Violation {
  enum class Kind { Missing, Type, Congruence, Interference };
  Kind kind;
  std::vector<std::string> values;  // "%v" or "$r"
  std::string reg;
};

std::string_view violation_kind_name(Violation::Kind k);
std::string format_violation(const Violation& v);

/// Every type, congruence and interference violation of `cmap` on `fn`.
std::vector<Violation> verify_allocation(const MachineFunction& fn, const LivenessInfo& liveness, const ColorMap& cmap,
                                         const MachineDescription& md);

struct Materialized {
  MachineFunction virtual_fn;   // spill code inserted, still virtual
  MachineFunction physical_fn;  // fully rewritten
  ColorMap full_map;            // over virtual_fn's vregs
  std::set<std::string> spilled;           // names of spilled input vregs
  std::vector<std::string> evicted;        // colored by the caller, spilled here
  std::vector<std::string> recolored;      // colored by the caller, moved here
  std::vector<std::string> reload_temps;
};

/// Materializes spills for every kSpill entry, then colors the reload temps
/// in point order. A temp with no legal register first tries to move one
/// overlapping colored vreg to another legal register; failing that the
/// cheapest such vreg (live-through ones first) is spilled and the process
/// restarts. Throws Error if the result does not verify.
Materialized materialize_allocation(const MachineFunction& fn, const ColorMap& cmap, const MachineDescription& md);

/// Latency x 10^depth summed over instructions. Throws PreconditionError on
/// vreg operands.
double estimate_throughput(const MachineDescription& md, const MachineFunction& fn);

std::string format_color_map(const ColorMap& cmap);
/// Lines of "%v $reg" or "%v SPILL"; blank lines and ';' comments ignored.
ColorMap parse_color_map(std::string_view text);

}  // namespace regalloc
