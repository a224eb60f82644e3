#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "regalloc/opcode.hpp"

namespace regalloc {

class MachineDescription;

using VRegId = std::uint32_t;
using BlockId = std::size_t;

enum class OperandKind : std::uint8_t { VReg, PhysReg, Imm, Slot, Block };

/// `value` is the vreg id, the index into the function's physreg name table,
/// the immediate, the stack-slot number or the block index, depending on kind.
struct Operand {
  OperandKind kind = OperandKind::Imm;
  std::int64_t value = 0;

  static Operand vreg(VRegId id) { return {OperandKind::VReg, static_cast<std::int64_t>(id)}; }
  static Operand phys(std::uint32_t index) { return {OperandKind::PhysReg, static_cast<std::int64_t>(index)}; }
  static Operand imm(std::int64_t v) { return {OperandKind::Imm, v}; }
  static Operand slot(std::int64_t s) { return {OperandKind::Slot, s}; }
  static Operand block(BlockId b) { return {OperandKind::Block, static_cast<std::int64_t>(b)}; }

  bool is_vreg() const { return kind == OperandKind::VReg; }
  bool is_phys() const { return kind == OperandKind::PhysReg; }
  bool is_reg() const { return is_vreg() || is_phys(); }
  VRegId vreg_id() const { return static_cast<VRegId>(value); }
  std::uint32_t phys_index() const { return static_cast<std::uint32_t>(value); }

  friend bool operator==(const Operand&, const Operand&) = default;
};

struct Instruction {
  Opcode op = Opcode::Mov;
  std::string mnemonic;  // spelling as written, e.g. "mov32"
  std::vector<Operand> defs;
  std::vector<Operand> uses;

  // Derived by MachineFunction::analyze().
  std::uint32_t point = 0;  // 1-based, function-global, textual order
  std::uint32_t loop_depth = 0;

  std::size_t num_operands() const { return defs.size() + uses.size(); }
  const Operand& operand(std::size_t i) const { return i < defs.size() ? defs[i] : uses[i - defs.size()]; }

  bool reads(const Operand& o) const;
  bool writes(const Operand& o) const;
};

struct BasicBlock {
  std::string label;
  std::vector<Instruction> insts;
};

struct VRegInfo {
  std::string name;
  std::string type;
};

struct Cfg {
  std::vector<std::vector<BlockId>> succs;
  std::vector<std::vector<BlockId>> preds;
};

struct InstrRef {
  BlockId block = 0;
  std::size_t index = 0;
};

/// The toy machine IR. A function is a value: transforms copy and rebuild.
/// Derived data (points, CFG, loop depths) is refreshed by analyze().
struct MachineFunction {
  std::string name;
  std::vector<Operand> params;  // vregs before allocation, physregs after
  std::vector<BasicBlock> blocks;
  std::vector<VRegInfo> vregs;
  std::vector<std::string> physregs;

  // Derived.
  Cfg cfg;
  std::vector<InstrRef> points;  // points[p - 1] locates point p
  std::vector<std::uint32_t> block_depth;

  VRegId add_vreg(std::string name, std::string type);
  std::optional<VRegId> find_vreg(std::string_view name) const;
  /// Fresh name derived from `base` that no vreg uses yet.
  std::string fresh_vreg_name(std::string_view base) const;
  std::uint32_t intern_phys(std::string_view name);
  std::optional<std::uint32_t> find_phys(std::string_view name) const;

  std::size_t num_points() const { return points.size(); }
  const Instruction& at(std::uint32_t point) const;
  BlockId block_of(std::uint32_t point) const { return points.at(point - 1).block; }
  /// Point of the first instruction of `b`, or the point the block would
  /// occupy if it is empty.
  std::uint32_t first_point(BlockId b) const;

  /// Vregs that occur as a param or operand, in id order.
  std::vector<VRegId> live_vregs() const;
  bool has_vregs() const;

  /// Recomputes points, CFG edges (including fallthrough) and loop depths.
  /// Throws ValidationError for irreducible control flow.
  void analyze();
};

/// Parses toy-MIR text. With `md`, register types, physregs and fixed-register
/// constraints are also checked against the machine.
MachineFunction parse_function(std::string_view text, const MachineDescription* md = nullptr);

std::string print_function(const MachineFunction& fn);
std::string print_operand(const MachineFunction& fn, const Operand& op);
std::string print_instruction(const MachineFunction& fn, const Instruction& inst);

/// Full structural validation: operand shapes, terminator placement, branch
/// targets, def-dominates-use. Throws ValidationError.
void validate(const MachineFunction& fn, const MachineDescription* md = nullptr);

/// Structural equality ignoring derived fields.
bool structurally_equal(const MachineFunction& a, const MachineFunction& b);

}  // namespace regalloc
