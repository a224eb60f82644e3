#include "regalloc/interpreter.hpp"

#include <limits>
#include <map>

#include "regalloc/error.hpp"
#include "regalloc/machine.hpp"

namespace regalloc {

namespace {

std::int64_t wrap_add(std::int64_t a, std::int64_t b) {
  return static_cast<std::int64_t>(static_cast<std::uint64_t>(a) + static_cast<std::uint64_t>(b));
}
std::int64_t wrap_sub(std::int64_t a, std::int64_t b) {
  return static_cast<std::int64_t>(static_cast<std::uint64_t>(a) - static_cast<std::uint64_t>(b));
}
std::int64_t wrap_mul(std::int64_t a, std::int64_t b) {
  return static_cast<std::int64_t>(static_cast<std::uint64_t>(a) * static_cast<std::uint64_t>(b));
}

class Machine {
 public:
  Machine(const MachineFunction& fn, const MachineDescription* md) : fn_(fn), vregs_(fn.vregs.size()) {
    // Physreg storage slot: its congruence class with a machine, else itself.
    phys_slot_.resize(fn.physregs.size());
    std::map<std::string, std::size_t> by_key;
    for (std::size_t i = 0; i < fn.physregs.size(); ++i) {
      std::string key = "reg:" + fn.physregs[i];
      if (md)
        if (auto r = md->find_register(fn.physregs[i])) key = "class:" + std::to_string(md->reg(*r).congruence_class);
      auto [it, inserted] = by_key.emplace(key, by_key.size());
      phys_slot_[i] = it->second;
    }
    phys_.resize(by_key.size());
    if (md) {
      for (std::size_t i = 0; i < fn.physregs.size(); ++i) {
        auto r = md->find_register(fn.physregs[i]);
        if (r && md->is_call_clobbered(*r)) clobbered_slots_.push_back(phys_slot_[i]);
      }
    }
  }

  std::int64_t read(const Operand& o) const {
    switch (o.kind) {
      case OperandKind::Imm: return o.value;
      case OperandKind::VReg: {
        const auto& v = vregs_.at(o.vreg_id());
        if (!v) throw InterpretError(InterpretError::Kind::UnwrittenRead, "read of unwritten " + print_operand(fn_, o));
        return *v;
      }
      case OperandKind::PhysReg: {
        const auto& v = phys_.at(phys_slot_.at(o.phys_index()));
        if (!v) throw InterpretError(InterpretError::Kind::UnwrittenRead, "read of unwritten " + print_operand(fn_, o));
        return *v;
      }
      default: throw InterpretError(InterpretError::Kind::Malformed, "operand is not a value: " + print_operand(fn_, o));
    }
  }

  void write(const Operand& o, std::int64_t value) {
    if (o.is_vreg())
      vregs_.at(o.vreg_id()) = value;
    else if (o.is_phys())
      phys_.at(phys_slot_.at(o.phys_index())) = value;
    else
      throw InterpretError(InterpretError::Kind::Malformed, "write to non-register " + print_operand(fn_, o));
  }

  std::int64_t load(std::int64_t slot) const {
    auto it = memory_.find(slot);
    if (it == memory_.end())
      throw InterpretError(InterpretError::Kind::UnwrittenRead, "load of unwritten slot @" + std::to_string(slot));
    return it->second;
  }
  void store(std::int64_t slot, std::int64_t value) { memory_[slot] = value; }

  void clobber() {
    for (std::size_t s : clobbered_slots_) phys_[s].reset();
  }

 private:
  const MachineFunction& fn_;
  std::vector<std::optional<std::int64_t>> vregs_;
  std::vector<std::size_t> phys_slot_;
  std::vector<std::optional<std::int64_t>> phys_;
  std::vector<std::size_t> clobbered_slots_;
  std::map<std::int64_t, std::int64_t> memory_;
};

}  // namespace

Outputs interpret(const MachineFunction& fn, std::span<const std::int64_t> inputs, std::uint64_t fuel,
                  const MachineDescription* md) {
  Outputs out;
  if (fn.blocks.empty()) return out;
  Machine m(fn, md);
  for (std::size_t i = 0; i < fn.params.size(); ++i) m.write(fn.params[i], i < inputs.size() ? inputs[i] : 0);

  BlockId b = 0;
  std::size_t idx = 0;
  std::uint64_t steps = 0;
  while (true) {
    const auto& insts = fn.blocks[b].insts;
    if (idx >= insts.size()) {
      if (b + 1 >= fn.blocks.size()) return out;  // fell off the end
      ++b;
      idx = 0;
      continue;
    }
    if (++steps > fuel) throw InterpretError(InterpretError::Kind::FuelExhausted, "fuel exhausted after " + std::to_string(fuel) + " steps");
    const Instruction& inst = insts[idx++];
    auto use = [&](std::size_t i) { return m.read(inst.uses.at(i)); };
    switch (inst.op) {
      case Opcode::Mov: m.write(inst.defs.at(0), use(0)); break;
      case Opcode::Add: m.write(inst.defs.at(0), wrap_add(use(0), use(1))); break;
      case Opcode::Sub: m.write(inst.defs.at(0), wrap_sub(use(0), use(1))); break;
      case Opcode::Mul: m.write(inst.defs.at(0), wrap_mul(use(0), use(1))); break;
      case Opcode::Div: {
        std::int64_t a = use(0), d = use(1);
        if (d == 0) throw InterpretError(InterpretError::Kind::DivisionByZero, "division by zero at point " + std::to_string(inst.point));
        std::int64_t q = (a == std::numeric_limits<std::int64_t>::min() && d == -1) ? a : a / d;
        m.write(inst.defs.at(0), q);
        break;
      }
      case Opcode::Cmp: m.write(inst.defs.at(0), use(0) < use(1) ? 1 : 0); break;
      case Opcode::Br:
        b = static_cast<BlockId>(use(0) != 0 ? inst.uses.at(1).value : inst.uses.at(2).value);
        idx = 0;
        break;
      case Opcode::Jmp:
        b = static_cast<BlockId>(inst.uses.at(0).value);
        idx = 0;
        break;
      case Opcode::Load: m.write(inst.defs.at(0), m.load(inst.uses.at(0).value)); break;
      case Opcode::Store: m.store(inst.uses.at(1).value, use(0)); break;
      case Opcode::Print: out.printed.push_back(use(0)); break;
      case Opcode::Ret:
        if (!inst.uses.empty()) out.ret = use(0);
        return out;
      case Opcode::Call: m.clobber(); break;
    }
  }
}

std::string format_outputs(const Outputs& out) {
  std::string s = "[";
  for (std::size_t i = 0; i < out.printed.size(); ++i) s += (i ? ", " : "") + std::to_string(out.printed[i]);
  s += "]";
  if (out.ret) s += " ret " + std::to_string(*out.ret);
  return s;
}

}  // namespace regalloc
