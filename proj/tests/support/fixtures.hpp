#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include "regalloc/machine.hpp"
#include "regalloc/mir.hpp"

namespace fixtures {

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline regalloc::MachineFunction running_example() {
  return regalloc::parse_function(read_file(regalloc::data_dir() / "examples" / "running_example.mir"));
}

inline regalloc::MachineFunction running_example_x86(const regalloc::MachineDescription& md) {
  return regalloc::parse_function(read_file(regalloc::data_dir() / "examples" / "running_example_x86.mir"), &md);
}

inline const regalloc::MachineDescription& x86like() {
  static const regalloc::MachineDescription md = regalloc::resolve_machine("x86like");
  return md;
}

inline const regalloc::MachineDescription& arm64like() {
  static const regalloc::MachineDescription md = regalloc::resolve_machine("arm64like");
  return md;
}

}  // namespace fixtures
