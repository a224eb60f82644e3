#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "regalloc/mir.hpp"

namespace regalloc {

class MachineDescription;

struct GenParams {
  unsigned blocks = 8;      // soft cap on basic blocks
  unsigned instrs = 30;     // soft cap on straight-line statements
  unsigned vregs = 8;       // data vregs; loop counters come on top
  double loop_prob = 0.3;
  std::vector<std::string> types = {"gr32"};
  unsigned max_params = 2;
  double call_prob = 0.03;
  unsigned max_loop_depth = 2;
};

/// Deterministic per (seed, params, machine). Produces structured reducible
/// CFGs (diamonds, counted do-while loops) whose every use is dominated by a
/// def, that divide only by non-zero immediates and load only from slots a
/// dominating store wrote. With `md`, fixed-register operands are honored and
/// types missing from the machine fall back to its first type.
MachineFunction generate_random_function(std::uint64_t seed, const GenParams& params = {},
                                         const MachineDescription* md = nullptr);

/// Deterministic 64-bit mixer used for seeding and per-step randomness.
std::uint64_t splitmix64(std::uint64_t x);

}  // namespace regalloc
