#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "regalloc/opcode.hpp"

namespace regalloc {

using RegId = std::uint32_t;
using TypeId = std::uint32_t;

struct RegType {
  std::string id;
  unsigned width = 0;
  std::string kind;  // "gpr", "fpr", ... informational only
  std::vector<RegId> members;  // R^t, in declaration order
};

struct PhysReg {
  std::string id;
  TypeId type = 0;
  unsigned width = 0;
  std::uint32_t congruence_class = 0;
};

/// Registers sharing one physical storage, ordered by increasing width.
struct CongruenceClass {
  std::string id;
  std::vector<RegId> chain;
};

struct FixedConstraint {
  std::size_t operand = 0;  // index over defs then uses
  RegId reg = 0;
};

struct OpcodeInfo {
  unsigned latency = 1;
  bool is_mem = false;
  std::vector<FixedConstraint> fixed;
};

/// An abstract target: register file, register types, congruence classes and
/// the per-opcode cost table. Immutable once loaded.
class MachineDescription {
 public:
  const std::string& name() const noexcept { return name_; }

  std::span<const PhysReg> registers() const noexcept { return registers_; }
  std::span<const RegType> types() const noexcept { return types_; }
  std::span<const CongruenceClass> classes() const noexcept { return classes_; }

  const PhysReg& reg(RegId id) const { return registers_.at(id); }
  const RegType& type(TypeId id) const { return types_.at(id); }

  std::optional<RegId> find_register(std::string_view id) const;
  std::optional<TypeId> find_type(std::string_view id) const;

  /// Throws PreconditionError for unknown ids.
  RegId register_id(std::string_view id) const;
  TypeId type_id(std::string_view id) const;

  const OpcodeInfo& opcode(Opcode op) const { return opcodes_.at(static_cast<std::size_t>(op)); }

  /// True iff both registers live in the same congruence class.
  bool aliases(RegId a, RegId b) const { return reg(a).congruence_class == reg(b).congruence_class; }

  std::span<const RegId> call_clobbers() const noexcept { return call_clobbers_; }
  bool is_call_clobbered(RegId r) const;

 private:
  friend class MachineBuilder;

  std::string name_;
  std::vector<RegType> types_;
  std::vector<PhysReg> registers_;
  std::vector<CongruenceClass> classes_;
  std::vector<OpcodeInfo> opcodes_;
  std::vector<RegId> call_clobbers_;
  std::map<std::string, RegId, std::less<>> reg_index_;
  std::map<std::string, TypeId, std::less<>> type_index_;
};

/// Checked in-memory construction; `build()` validates every invariant.
class MachineBuilder {
 public:
  explicit MachineBuilder(std::string name);

  MachineBuilder& type(std::string id, unsigned width, std::string kind = "gpr");
  MachineBuilder& reg(std::string id, std::string_view type);
  MachineBuilder& congruence(std::string id, std::vector<std::string> members);
  MachineBuilder& latency(Opcode op, unsigned cycles, bool is_mem = false);
  MachineBuilder& fixed(Opcode op, std::size_t operand, std::string reg);
  MachineBuilder& clobber(std::string reg);

  MachineDescription build() &&;

 private:
  struct PendingReg {
    std::string id;
    std::string type;
    std::optional<unsigned> width;
  };
  struct PendingClass {
    std::string id;
    std::vector<std::string> members;
  };
  struct PendingFixed {
    Opcode op;
    std::size_t operand;
    std::string reg;
  };

  friend MachineDescription load_machine_description(std::string_view text);

  std::string name_;
  std::vector<RegType> types_;
  std::vector<PendingReg> regs_;
  std::vector<PendingClass> classes_;
  std::vector<OpcodeInfo> opcodes_;
  std::vector<PendingFixed> fixed_;
  std::vector<std::string> clobbers_;
};

/// Default cost table: memory 4, ALU 1, mul 3, div 10, control/print 1.
OpcodeInfo default_opcode_info(Opcode op);

/// Parses and validates a machine-description document (JSON).
MachineDescription load_machine_description(std::string_view text);
MachineDescription load_machine_file(const std::filesystem::path& path);

/// Single-type machine "uniformN": registers r0..r{N-1} of type gr32, each in
/// its own congruence class, no fixed constraints, no call clobbers.
MachineDescription uniform_machine(unsigned nregs, std::string type_id = "gr32");

/// Resolves "x86like", "arm64like", "uniformN", or a path to a description file.
/// Shipped descriptions are searched in REGALLOC_RL_DATA (or the build-time data dir).
MachineDescription resolve_machine(std::string_view name_or_path);

std::filesystem::path data_dir();

}  // namespace regalloc
