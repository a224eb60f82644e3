#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "regalloc/mir.hpp"

namespace regalloc {

class MachineDescription;

/// Closed interval of program points.
struct LiveRange {
  std::uint32_t start = 0;
  std::uint32_t end = 0;

  bool contains(std::uint32_t p) const { return start <= p && p <= end; }
  bool overlaps(const LiveRange& o) const { return start <= o.end && o.start <= end; }
  std::uint32_t length() const { return end - start + 1; }
  friend bool operator==(const LiveRange&, const LiveRange&) = default;
};

struct LivenessInfo {
  std::map<VRegId, LiveRange> ranges;
  std::map<VRegId, std::vector<std::uint32_t>> uses;  // K(v): access points, def included
  std::map<VRegId, std::vector<std::uint32_t>> distances;
  std::map<VRegId, double> weights;  // M(v)
  std::uint32_t pressure = 0;

  // Physical registers: explicit operands plus call clobbers (implicit defs
  // at the call). Keyed by register name. A physreg is live on the exact
  // point set `phys_live`; `phys_ranges` is only its hull.
  std::map<std::string, LiveRange> phys_ranges;
  std::map<std::string, std::vector<std::uint32_t>> phys_points;
  std::map<std::string, std::vector<std::uint32_t>> phys_live;
};

/// Ranges are the convex hull of every point where the value is accessed or
/// live across, so a def conflicts with anything live or read at its point.
/// Params count as defined at point 1. `md` supplies call clobbers.
LivenessInfo compute_liveness(const MachineFunction& fn, const MachineDescription* md = nullptr);

/// Max number of vreg ranges containing a single point.
std::uint32_t register_pressure(const MachineFunction& fn, const LivenessInfo& info);

/// 10^depth for the instruction at `p`.
double point_weight(const MachineFunction& fn, std::uint32_t p);

std::string dump_liveness(const MachineFunction& fn, const LivenessInfo& info);

}  // namespace regalloc
