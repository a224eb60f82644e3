#include "regalloc/generator.hpp"

#include <algorithm>
#include <set>

#include "regalloc/machine.hpp"

namespace regalloc {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

namespace {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next() { return splitmix64(state_++); }
  std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : next() % n; }
  std::int64_t range(std::int64_t lo, std::int64_t hi) { return lo + static_cast<std::int64_t>(below(static_cast<std::uint64_t>(hi - lo + 1))); }
  bool chance(double p) { return static_cast<double>(next() >> 11) * 0x1.0p-53 < p; }

 private:
  std::uint64_t state_;
};

class Generator {
 public:
  Generator(std::uint64_t seed, const GenParams& p, const MachineDescription* md) : rng_(splitmix64(seed)), p_(p), md_(md) {
    p_.blocks = std::clamp(p_.blocks, 1u, 64u);
    p_.instrs = std::clamp(p_.instrs, 1u, 400u);
    p_.vregs = std::min(p_.vregs, 64u);
    p_.loop_prob = std::clamp(p_.loop_prob, 0.0, 1.0);
    p_.max_loop_depth = std::min(p_.max_loop_depth, 3u);
    std::vector<std::string> types;
    for (const auto& t : p_.types)
      if (!md_ || md_->find_type(t)) types.push_back(t);
    if (types.empty()) types.push_back(md_ ? md_->type(0).id : "gr32");
    p_.types = types;
  }

  MachineFunction run(std::uint64_t seed) {
    fn_.name = "f" + std::to_string(seed);
    for (unsigned i = 0; i < p_.vregs; ++i) fn_.add_vreg("v" + std::to_string(i), p_.types[rng_.below(p_.types.size())]);
    defined_.assign(p_.vregs, false);

    unsigned nparams = p_.vregs == 0 ? 0 : static_cast<unsigned>(rng_.below(std::min(p_.max_params, p_.vregs) + 1));
    for (unsigned i = 0; i < nparams; ++i) {
      fn_.params.push_back(Operand::vreg(i));
      defined_[i] = true;
    }

    new_block();
    budget_ = p_.instrs;
    gen_seq(0);

    // Epilogue: observe a few values so the function has visible behavior.
    std::vector<VRegId> live = defined_list();
    if (live.empty()) {
      emit(Opcode::Print, {}, {Operand::imm(rng_.range(-50, 50))});
    } else {
      unsigned n = static_cast<unsigned>(std::min<std::size_t>(live.size(), 1 + rng_.below(3)));
      for (unsigned i = 0; i < n; ++i) emit(Opcode::Print, {}, {Operand::vreg(live[rng_.below(live.size())])});
    }
    if (!live.empty() && rng_.chance(0.5))
      emit(Opcode::Ret, {}, {Operand::vreg(live[rng_.below(live.size())])});
    else
      emit(Opcode::Ret, {}, {});

    fn_.analyze();
    return std::move(fn_);
  }

 private:
  void new_block() {
    fn_.blocks.push_back({"bb" + std::to_string(fn_.blocks.size()), {}});
    cur_ = fn_.blocks.size() - 1;
  }

  void emit(Opcode op, std::vector<Operand> defs, std::vector<Operand> uses) {
    Instruction inst;
    inst.op = op;
    inst.mnemonic = std::string(opcode_name(op));
    inst.defs = std::move(defs);
    inst.uses = std::move(uses);
    fn_.blocks[cur_].insts.push_back(std::move(inst));
  }

  // Emits `op` honoring the machine's fixed operands: mandated uses are
  // loaded into their register first, a mandated def is copied out after.
  void emit_fixed(Opcode op, Operand def, std::vector<Operand> uses) {
    std::vector<Operand> defs{def};
    std::optional<Operand> copy_out;
    if (md_) {
      for (const auto& fc : md_->opcode(op).fixed) {
        Operand reg = Operand::phys(fn_.intern_phys(md_->reg(fc.reg).id));
        if (fc.operand == 0) {
          copy_out = def;
          defs[0] = reg;
        } else if (fc.operand - 1 < uses.size()) {
          emit(Opcode::Mov, {reg}, {uses[fc.operand - 1]});
          uses[fc.operand - 1] = reg;
        }
      }
    }
    emit(op, defs, uses);
    if (copy_out) emit(Opcode::Mov, {*copy_out}, {defs[0]});
  }

  std::vector<VRegId> defined_list() const {
    std::vector<VRegId> out;
    for (VRegId v = 0; v < defined_.size(); ++v)
      if (defined_[v]) out.push_back(v);
    return out;
  }

  Operand value() {
    auto live = defined_list();
    if (live.empty() || rng_.chance(0.25)) return Operand::imm(rng_.range(-20, 20));
    return Operand::vreg(live[rng_.below(live.size())]);
  }

  std::optional<VRegId> dest() {
    if (p_.vregs == 0) return std::nullopt;
    std::vector<VRegId> fresh;
    for (VRegId v = 0; v < defined_.size(); ++v)
      if (!defined_[v]) fresh.push_back(v);
    if (!fresh.empty() && rng_.chance(0.7)) return fresh[rng_.below(fresh.size())];
    return static_cast<VRegId>(rng_.below(p_.vregs));
  }

  void statement() {
    auto d = dest();
    if (!d) {
      emit(Opcode::Print, {}, {Operand::imm(rng_.range(-50, 50))});
      return;
    }
    Operand def = Operand::vreg(*d);
    std::uint64_t pick = rng_.below(100);
    if (rng_.chance(p_.call_prob)) {
      emit(Opcode::Call, {}, {});
      return;
    }
    if (pick < 20 || defined_list().empty()) {
      emit(Opcode::Mov, {def}, {rng_.chance(0.7) || defined_list().empty() ? Operand::imm(rng_.range(-20, 20)) : value()});
    } else if (pick < 60) {
      static constexpr Opcode kArith[] = {Opcode::Add, Opcode::Sub, Opcode::Mul, Opcode::Cmp};
      Opcode op = kArith[rng_.below(4)];
      Operand a = value();
      Operand b = value();
      if (a.kind == OperandKind::Imm && b.kind == OperandKind::Imm) a = Operand::vreg(defined_list()[0]);
      emit_fixed(op, def, {a, b});
    } else if (pick < 70) {
      auto live = defined_list();
      emit_fixed(Opcode::Div, def, {Operand::vreg(live[rng_.below(live.size())]), Operand::imm(rng_.range(2, 9))});
    } else if (pick < 80) {
      auto live = defined_list();
      std::int64_t slot = static_cast<std::int64_t>(rng_.below(4));
      emit(Opcode::Store, {}, {Operand::vreg(live[rng_.below(live.size())]), Operand::slot(slot)});
      written_.insert(slot);
      return;
    } else if (pick < 88 && !written_.empty()) {
      auto it = written_.begin();
      std::advance(it, static_cast<long>(rng_.below(written_.size())));
      emit(Opcode::Load, {def}, {Operand::slot(*it)});
    } else {
      auto live = defined_list();
      emit(Opcode::Print, {}, {Operand::vreg(live[rng_.below(live.size())])});
      return;
    }
    defined_[*d] = true;
  }

  void gen_seq(unsigned loop_depth) {
    unsigned n = 1 + static_cast<unsigned>(rng_.below(5));
    for (unsigned i = 0; i < n && budget_ > 0; ++i) {
      bool can_branch = p_.vregs > 0 && fn_.blocks.size() + 3 <= p_.blocks && !defined_list().empty();
      if (can_branch && loop_depth < p_.max_loop_depth && rng_.chance(p_.loop_prob * 0.5)) {
        gen_loop(loop_depth);
      } else if (can_branch && rng_.chance(0.15)) {
        gen_diamond(loop_depth);
      } else {
        statement();
        --budget_;
      }
    }
  }

  void gen_diamond(unsigned loop_depth) {
    auto live = defined_list();
    VRegId c = counter("c");
    emit(Opcode::Cmp, {Operand::vreg(c)}, {Operand::vreg(live[rng_.below(live.size())]), Operand::imm(rng_.range(-10, 10))});
    std::size_t head = cur_;
    auto saved_defs = defined_;
    auto saved_slots = written_;

    new_block();
    std::size_t then_first = cur_;
    gen_seq(loop_depth);
    std::size_t then_last = cur_;
    defined_ = saved_defs;
    written_ = saved_slots;

    new_block();
    std::size_t else_first = cur_;
    gen_seq(loop_depth);
    std::size_t else_last = cur_;
    defined_ = saved_defs;
    written_ = saved_slots;

    new_block();
    std::size_t join = cur_;
    auto at = [&](std::size_t b, Opcode op, std::vector<Operand> uses) {
      std::size_t keep = cur_;
      cur_ = b;
      emit(op, {}, std::move(uses));
      cur_ = keep;
    };
    at(head, Opcode::Br, {Operand::vreg(c), Operand::block(then_first), Operand::block(else_first)});
    at(then_last, Opcode::Jmp, {Operand::block(join)});
    at(else_last, Opcode::Jmp, {Operand::block(join)});
  }

  void gen_loop(unsigned loop_depth) {
    VRegId n = counter("n");
    VRegId c = counter("c");
    emit(Opcode::Mov, {Operand::vreg(n)}, {Operand::imm(rng_.range(1, 3))});
    std::size_t pre = cur_;
    new_block();
    std::size_t header = cur_;
    {
      std::size_t keep = cur_;
      cur_ = pre;
      emit(Opcode::Jmp, {}, {Operand::block(header)});
      cur_ = keep;
    }
    gen_seq(loop_depth + 1);
    emit(Opcode::Sub, {Operand::vreg(n)}, {Operand::vreg(n), Operand::imm(1)});
    emit(Opcode::Cmp, {Operand::vreg(c)}, {Operand::imm(0), Operand::vreg(n)});
    std::size_t latch = cur_;
    new_block();
    std::size_t exit = cur_;
    cur_ = latch;
    emit(Opcode::Br, {}, {Operand::vreg(c), Operand::block(header), Operand::block(exit)});
    cur_ = exit;
  }

  VRegId counter(const char* prefix) {
    return fn_.add_vreg(std::string(prefix) + std::to_string(counters_++), p_.types[0]);
  }

  Rng rng_;
  GenParams p_;
  const MachineDescription* md_;
  MachineFunction fn_;
  std::size_t cur_ = 0;
  unsigned budget_ = 0;
  unsigned counters_ = 0;
  std::vector<bool> defined_;
  std::set<std::int64_t> written_;
};

}  // namespace

MachineFunction generate_random_function(std::uint64_t seed, const GenParams& params, const MachineDescription* md) {
  return Generator(seed, params, md).run(seed);
}

}  // namespace regalloc
