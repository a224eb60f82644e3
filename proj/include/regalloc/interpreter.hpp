#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "regalloc/mir.hpp"

namespace regalloc {

class MachineDescription;

struct Outputs {
  std::vector<std::int64_t> printed;
  std::optional<std::int64_t> ret;

  friend bool operator==(const Outputs&, const Outputs&) = default;
};

inline constexpr std::uint64_t kDefaultFuel = 100000;

/// Executes `fn` on `inputs` (params beyond the input list read 0). Values are
/// 64-bit and wrap. With `md`, physical registers share storage per congruence
/// class and `call` erases every clobbered class; without it physregs are
/// independent locations and `call` is a no-op.
Outputs interpret(const MachineFunction& fn, std::span<const std::int64_t> inputs = {},
                  std::uint64_t fuel = kDefaultFuel, const MachineDescription* md = nullptr);

std::string format_outputs(const Outputs& out);

}  // namespace regalloc
