#include "regalloc/mir.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <set>
#include <sstream>

#include "regalloc/dominance.hpp"
#include "regalloc/error.hpp"
#include "regalloc/machine.hpp"

namespace regalloc {

bool Instruction::reads(const Operand& o) const { return std::find(uses.begin(), uses.end(), o) != uses.end(); }
bool Instruction::writes(const Operand& o) const { return std::find(defs.begin(), defs.end(), o) != defs.end(); }

VRegId MachineFunction::add_vreg(std::string vname, std::string type) {
  vregs.push_back({std::move(vname), std::move(type)});
  return static_cast<VRegId>(vregs.size() - 1);
}

std::optional<VRegId> MachineFunction::find_vreg(std::string_view vname) const {
  for (std::size_t i = 0; i < vregs.size(); ++i)
    if (vregs[i].name == vname) return static_cast<VRegId>(i);
  return std::nullopt;
}

std::string MachineFunction::fresh_vreg_name(std::string_view base) const {
  for (unsigned n = 1;; ++n) {
    std::string candidate = std::string(base) + "." + std::to_string(n);
    if (!find_vreg(candidate)) return candidate;
  }
}

std::uint32_t MachineFunction::intern_phys(std::string_view pname) {
  if (auto i = find_phys(pname)) return *i;
  physregs.emplace_back(pname);
  return static_cast<std::uint32_t>(physregs.size() - 1);
}

std::optional<std::uint32_t> MachineFunction::find_phys(std::string_view pname) const {
  for (std::size_t i = 0; i < physregs.size(); ++i)
    if (physregs[i] == pname) return static_cast<std::uint32_t>(i);
  return std::nullopt;
}

const Instruction& MachineFunction::at(std::uint32_t point) const {
  const InstrRef& r = points.at(point - 1);
  return blocks[r.block].insts[r.index];
}

std::uint32_t MachineFunction::first_point(BlockId b) const {
  std::uint32_t p = 1;
  for (BlockId i = 0; i < b; ++i) p += static_cast<std::uint32_t>(blocks[i].insts.size());
  return p;
}

std::vector<VRegId> MachineFunction::live_vregs() const {
  std::vector<bool> seen(vregs.size(), false);
  for (const auto& p : params)
    if (p.is_vreg()) seen[p.vreg_id()] = true;
  for (const auto& bb : blocks)
    for (const auto& inst : bb.insts) {
      for (const auto& o : inst.defs)
        if (o.is_vreg()) seen[o.vreg_id()] = true;
      for (const auto& o : inst.uses)
        if (o.is_vreg()) seen[o.vreg_id()] = true;
    }
  std::vector<VRegId> out;
  for (std::size_t i = 0; i < seen.size(); ++i)
    if (seen[i]) out.push_back(static_cast<VRegId>(i));
  return out;
}

bool MachineFunction::has_vregs() const { return !live_vregs().empty(); }

void MachineFunction::analyze() {
  if (blocks.empty()) blocks.push_back({"bb0", {}});

  points.clear();
  std::uint32_t p = 1;
  for (BlockId b = 0; b < blocks.size(); ++b)
    for (std::size_t i = 0; i < blocks[b].insts.size(); ++i) {
      blocks[b].insts[i].point = p++;
      points.push_back({b, i});
    }

  cfg.succs.assign(blocks.size(), {});
  cfg.preds.assign(blocks.size(), {});
  for (BlockId b = 0; b < blocks.size(); ++b) {
    auto& s = cfg.succs[b];
    const auto& insts = blocks[b].insts;
    if (!insts.empty() && is_terminator(insts.back().op)) {
      for (const auto& o : insts.back().uses)
        if (o.kind == OperandKind::Block) s.push_back(static_cast<BlockId>(o.value));
    } else if (b + 1 < blocks.size()) {
      s.push_back(b + 1);
    }
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
    for (BlockId t : s)
      if (t < blocks.size()) cfg.preds[t].push_back(b);
  }

  DominatorTree dom(cfg.succs, 0);
  LoopInfo loops = compute_loops(cfg.succs, dom);
  if (!loops.reducible) throw ValidationError("function '" + name + "' has irreducible control flow");
  block_depth = loops.depth;
  for (BlockId b = 0; b < blocks.size(); ++b)
    for (auto& inst : blocks[b].insts) inst.loop_depth = block_depth[b];
}

// ---------------------------------------------------------------------------
// Printing

std::string print_operand(const MachineFunction& fn, const Operand& op) {
  switch (op.kind) {
    case OperandKind::VReg: {
      const auto& v = fn.vregs.at(op.vreg_id());
      return "%" + v.name + ":" + v.type;
    }
    case OperandKind::PhysReg: return "$" + fn.physregs.at(op.phys_index());
    case OperandKind::Imm: return std::to_string(op.value);
    case OperandKind::Slot: return "@" + std::to_string(op.value);
    case OperandKind::Block: return fn.blocks.at(static_cast<BlockId>(op.value)).label;
  }
  return "?";
}

std::string print_instruction(const MachineFunction& fn, const Instruction& inst) {
  std::string out;
  for (std::size_t i = 0; i < inst.defs.size(); ++i) {
    if (i) out += ", ";
    out += print_operand(fn, inst.defs[i]);
  }
  if (!inst.defs.empty()) out += " = ";
  out += inst.mnemonic.empty() ? std::string(opcode_name(inst.op)) : inst.mnemonic;
  for (std::size_t i = 0; i < inst.uses.size(); ++i) {
    out += i ? ", " : " ";
    out += print_operand(fn, inst.uses[i]);
  }
  return out;
}

std::string print_function(const MachineFunction& fn) {
  std::ostringstream os;
  os << "func " << fn.name;
  if (!fn.params.empty()) {
    os << "(";
    for (std::size_t i = 0; i < fn.params.size(); ++i) os << (i ? ", " : "") << print_operand(fn, fn.params[i]);
    os << ")";
  }
  os << " {\n";
  for (const auto& bb : fn.blocks) {
    os << bb.label << ":\n";
    for (const auto& inst : bb.insts) os << "  " << print_instruction(fn, inst) << "\n";
  }
  os << "}\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.'; }

struct PendingLabel {
  std::size_t line;
  std::string label;
};

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  MachineFunction run() {
    std::vector<std::string> lines;
    {
      std::string cur;
      for (char c : text_) {
        if (c == '\n') {
          lines.push_back(cur);
          cur.clear();
        } else {
          cur += c;
        }
      }
      lines.push_back(cur);
    }

    bool header_seen = false;
    bool closed = false;
    for (std::size_t i = 0; i < lines.size(); ++i) {
      line_no_ = i + 1;
      std::string_view line = strip_comment(lines[i]);
      line = trim(line);
      if (line.empty()) continue;
      if (closed) fail("text after closing '}'");
      if (!header_seen) {
        parse_header(line);
        header_seen = true;
        continue;
      }
      if (line == "}") {
        closed = true;
        continue;
      }
      parse_body_line(line);
    }
    if (!header_seen) throw ParseError(1, "", "expected 'func NAME {'");
    if (!closed) throw ParseError(lines.size(), "", "missing closing '}'");

    if (fn_.blocks.empty()) fn_.blocks.push_back({"bb0", {}});
    resolve_labels();
    return std::move(fn_);
  }

 private:
  [[noreturn]] void fail(const std::string& what, std::string field = "") const {
    throw ParseError(line_no_, std::move(field), what);
  }

  static std::string_view strip_comment(std::string_view s) {
    auto pos = s.find_first_of(";#");
    return pos == std::string_view::npos ? s : s.substr(0, pos);
  }

  static std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
  }

  void parse_header(std::string_view line) {
    if (line.rfind("func", 0) != 0) fail("expected 'func NAME {'");
    line.remove_prefix(4);
    line = trim(line);
    std::size_t n = 0;
    while (n < line.size() && is_ident_char(line[n])) ++n;
    if (n == 0) fail("missing function name");
    fn_.name = std::string(line.substr(0, n));
    line = trim(line.substr(n));
    if (!line.empty() && line.front() == '(') {
      auto close = line.find(')');
      if (close == std::string_view::npos) fail("unterminated parameter list");
      std::string_view inner = trim(line.substr(1, close - 1));
      if (!inner.empty()) {
        for (auto tok : split_commas(inner)) {
          Operand op = parse_operand(tok);
          if (!op.is_vreg()) fail("parameters must be virtual registers", "params");
          fn_.params.push_back(op);
        }
      }
      line = trim(line.substr(close + 1));
    }
    if (line != "{") fail("expected '{' after function header");
  }

  std::vector<std::string_view> split_commas(std::string_view s) const {
    std::vector<std::string_view> out;
    while (true) {
      auto pos = s.find(',');
      auto tok = trim(s.substr(0, pos));
      if (tok.empty()) fail("empty operand");
      out.push_back(tok);
      if (pos == std::string_view::npos) break;
      s = s.substr(pos + 1);
    }
    return out;
  }

  void parse_body_line(std::string_view line) {
    // Optional leading "label:".
    std::size_t n = 0;
    while (n < line.size() && is_ident_char(line[n])) ++n;
    if (n > 0 && n < line.size() && line[n] == ':' && line[0] != '%' && line[0] != '$') {
      std::string label(line.substr(0, n));
      for (const auto& bb : fn_.blocks)
        if (bb.label == label) fail("duplicate block label '" + label + "'");
      fn_.blocks.push_back({label, {}});
      line = trim(line.substr(n + 1));
      if (line.empty()) return;
    }
    if (fn_.blocks.empty()) fn_.blocks.push_back({"bb0", {}});
    fn_.blocks.back().insts.push_back(parse_instruction(line));
    inst_lines_.push_back(line_no_);
  }

  Instruction parse_instruction(std::string_view line) {
    Instruction inst;
    auto eq = line.find('=');
    if (eq != std::string_view::npos) {
      for (auto tok : split_commas(trim(line.substr(0, eq)))) {
        Operand d = parse_operand(tok);
        if (!d.is_reg()) fail("instruction result must be a register");
        inst.defs.push_back(d);
      }
      line = trim(line.substr(eq + 1));
    }
    std::size_t n = 0;
    while (n < line.size() && !std::isspace(static_cast<unsigned char>(line[n]))) ++n;
    std::string_view mnemonic = line.substr(0, n);
    auto op = opcode_group(mnemonic);
    if (!op) fail("unknown opcode '" + std::string(mnemonic) + "'");
    inst.op = *op;
    inst.mnemonic = std::string(mnemonic);
    std::string_view rest = trim(line.substr(n));
    if (!rest.empty())
      for (auto tok : split_commas(rest)) inst.uses.push_back(parse_operand(tok));
    return inst;
  }

  Operand parse_operand(std::string_view tok) {
    if (tok.empty()) fail("empty operand");
    char c = tok.front();
    if (c == '%') {
      auto colon = tok.find(':');
      if (colon == std::string_view::npos) fail("virtual register '" + std::string(tok) + "' lacks a :TYPE");
      std::string vname(tok.substr(1, colon - 1));
      std::string type(tok.substr(colon + 1));
      if (vname.empty() || type.empty() || !std::all_of(vname.begin(), vname.end(), is_ident_char) ||
          !std::all_of(type.begin(), type.end(), is_ident_char))
        fail("malformed virtual register '" + std::string(tok) + "'");
      if (auto id = fn_.find_vreg(vname)) {
        if (fn_.vregs[*id].type != type)
          fail("virtual register %" + vname + " used with type " + type + " but declared " + fn_.vregs[*id].type);
        return Operand::vreg(*id);
      }
      return Operand::vreg(fn_.add_vreg(vname, type));
    }
    if (c == '$') {
      std::string_view pname = tok.substr(1);
      if (pname.empty() || !std::all_of(pname.begin(), pname.end(), is_ident_char))
        fail("malformed physical register '" + std::string(tok) + "'");
      return Operand::phys(fn_.intern_phys(pname));
    }
    if (c == '@') return Operand::slot(parse_int(tok.substr(1)));
    if (c == '-' || std::isdigit(static_cast<unsigned char>(c))) return Operand::imm(parse_int(tok));
    if (!std::all_of(tok.begin(), tok.end(), is_ident_char)) fail("malformed operand '" + std::string(tok) + "'");
    // Block label, resolved once all blocks are known.
    pending_labels_.push_back({line_no_, std::string(tok)});
    return Operand{OperandKind::Block, -static_cast<std::int64_t>(pending_labels_.size())};
  }

  std::int64_t parse_int(std::string_view s) const {
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) fail("malformed integer '" + std::string(s) + "'");
    return v;
  }

  void resolve_labels() {
    for (auto& bb : fn_.blocks)
      for (auto& inst : bb.insts)
        for (auto& o : inst.uses) {
          if (o.kind != OperandKind::Block) continue;
          const auto& pending = pending_labels_.at(static_cast<std::size_t>(-o.value - 1));
          auto it = std::find_if(fn_.blocks.begin(), fn_.blocks.end(),
                                 [&](const BasicBlock& b) { return b.label == pending.label; });
          if (it == fn_.blocks.end())
            throw ParseError(pending.line, "", "branch to unknown block '" + pending.label + "'");
          o.value = static_cast<std::int64_t>(it - fn_.blocks.begin());
        }
  }

  std::string_view text_;
  std::size_t line_no_ = 0;
  MachineFunction fn_;
  std::vector<PendingLabel> pending_labels_;
  std::vector<std::size_t> inst_lines_;
};

bool value_operand(const Operand& o) { return o.is_reg() || o.kind == OperandKind::Imm; }

void check_shape(const MachineFunction& fn, const Instruction& inst) {
  auto bad = [&](const std::string& why) {
    throw ValidationError("malformed '" + print_instruction(fn, inst) + "': " + why);
  };
  auto want = [&](std::size_t ndefs, std::size_t nuses) {
    if (inst.defs.size() != ndefs) bad("expected " + std::to_string(ndefs) + " result(s)");
    if (inst.uses.size() != nuses) bad("expected " + std::to_string(nuses) + " operand(s)");
  };
  switch (inst.op) {
    case Opcode::Mov:
      want(1, 1);
      if (!value_operand(inst.uses[0])) bad("source must be a register or immediate");
      break;
    case Opcode::Add:
    case Opcode::Sub:
    case Opcode::Mul:
    case Opcode::Div:
    case Opcode::Cmp:
      want(1, 2);
      if (!value_operand(inst.uses[0]) || !value_operand(inst.uses[1])) bad("sources must be registers or immediates");
      break;
    case Opcode::Br:
      want(0, 3);
      if (!value_operand(inst.uses[0])) bad("condition must be a register or immediate");
      if (inst.uses[1].kind != OperandKind::Block || inst.uses[2].kind != OperandKind::Block) bad("targets must be blocks");
      break;
    case Opcode::Jmp:
      want(0, 1);
      if (inst.uses[0].kind != OperandKind::Block) bad("target must be a block");
      break;
    case Opcode::Load:
      want(1, 1);
      if (inst.uses[0].kind != OperandKind::Slot) bad("address must be a stack slot");
      break;
    case Opcode::Store:
      want(0, 2);
      if (!value_operand(inst.uses[0]) || inst.uses[1].kind != OperandKind::Slot) bad("expected 'store VALUE, @SLOT'");
      break;
    case Opcode::Print:
      want(0, 1);
      if (!value_operand(inst.uses[0])) bad("operand must be a register or immediate");
      break;
    case Opcode::Ret:
      if (!inst.defs.empty() || inst.uses.size() > 1) bad("expected 'ret [VALUE]'");
      if (inst.uses.size() == 1 && !value_operand(inst.uses[0])) bad("return value must be a register or immediate");
      break;
    case Opcode::Call:
      want(0, 0);
      break;
  }
}

}  // namespace

void validate(const MachineFunction& fn, const MachineDescription* md) {
  if (fn.blocks.empty()) throw ValidationError("function has no blocks");
  if (fn.points.size() != [&] {
        std::size_t n = 0;
        for (const auto& bb : fn.blocks) n += bb.insts.size();
        return n;
      }())
    throw ValidationError("function not analyzed");

  std::set<std::string> labels;
  for (const auto& bb : fn.blocks) {
    if (!labels.insert(bb.label).second) throw ValidationError("duplicate block label '" + bb.label + "'");
    for (std::size_t i = 0; i < bb.insts.size(); ++i) {
      const auto& inst = bb.insts[i];
      check_shape(fn, inst);
      if (is_terminator(inst.op) && i + 1 != bb.insts.size())
        throw ValidationError("terminator '" + print_instruction(fn, inst) + "' is not last in block " + bb.label);
      for (const auto& o : inst.uses)
        if (o.kind == OperandKind::Block && (o.value < 0 || static_cast<std::size_t>(o.value) >= fn.blocks.size()))
          throw ValidationError("branch to a nonexistent block in " + bb.label);
    }
  }
  if (!fn.cfg.preds.empty() && !fn.cfg.preds[0].empty())
    throw ValidationError("entry block " + fn.blocks[0].label + " must not have predecessors");

  std::set<std::string> param_names;
  for (const auto& p : fn.params) {
    if (!p.is_reg()) throw ValidationError("parameters must be registers");
    if (p.is_vreg() && !param_names.insert(fn.vregs.at(p.vreg_id()).name).second)
      throw ValidationError("duplicate parameter %" + fn.vregs.at(p.vreg_id()).name);
  }

  if (md) {
    for (VRegId v : fn.live_vregs())
      if (!md->find_type(fn.vregs[v].type))
        throw ValidationError("virtual register %" + fn.vregs[v].name + " has unknown type '" + fn.vregs[v].type +
                              "' for machine " + md->name());
    for (const auto& p : fn.physregs)
      if (!md->find_register(p)) throw ValidationError("unknown physical register $" + p + " for machine " + md->name());
    for (const auto& bb : fn.blocks)
      for (const auto& inst : bb.insts)
        for (const auto& fc : md->opcode(inst.op).fixed) {
          const std::string& mandated = md->reg(fc.reg).id;
          if (fc.operand >= inst.num_operands() || !inst.operand(fc.operand).is_phys() ||
              fn.physregs[inst.operand(fc.operand).phys_index()] != mandated)
            throw ValidationError("'" + print_instruction(fn, inst) + "' must use $" + mandated + " as operand " +
                                  std::to_string(fc.operand) + " on " + md->name());
        }
  }

  // Every register use must be dominated by a definition of that register.
  DominatorTree dom(fn.cfg.succs, 0);
  // Physregs are keyed by congruence class when the machine is known.
  auto key = [&](const Operand& o) {
    if (o.is_phys() && md)
      if (auto r = md->find_register(fn.physregs[o.phys_index()]))
        return std::pair<int, std::int64_t>(2, md->reg(*r).congruence_class);
    return std::pair<int, std::int64_t>(o.is_vreg() ? 0 : 1, o.value);
  };
  std::map<std::pair<int, std::int64_t>, std::vector<InstrRef>> defs;
  for (BlockId b = 0; b < fn.blocks.size(); ++b)
    for (std::size_t i = 0; i < fn.blocks[b].insts.size(); ++i)
      for (const auto& d : fn.blocks[b].insts[i].defs) defs[key(d)].push_back({b, i});
  std::set<std::pair<int, std::int64_t>> param_keys;
  for (const auto& p : fn.params) param_keys.insert(key(p));

  for (BlockId b = 0; b < fn.blocks.size(); ++b) {
    if (!dom.reachable(b)) continue;
    for (std::size_t i = 0; i < fn.blocks[b].insts.size(); ++i) {
      const auto& inst = fn.blocks[b].insts[i];
      for (const auto& u : inst.uses) {
        if (!u.is_reg() || param_keys.count(key(u))) continue;
        bool ok = false;
        for (const auto& d : defs[key(u)]) {
          if (d.block == b ? d.index < i : dom.dominates(d.block, b)) {
            ok = true;
            break;
          }
        }
        if (!ok)
          throw ValidationError("use of " + print_operand(fn, u) + " at point " + std::to_string(inst.point) +
                                " is not dominated by a definition (use-before-def)");
      }
    }
  }
}

MachineFunction parse_function(std::string_view text, const MachineDescription* md) {
  MachineFunction fn = Parser(text).run();
  for (const auto& bb : fn.blocks)
    for (const auto& inst : bb.insts) check_shape(fn, inst);
  fn.analyze();
  validate(fn, md);
  return fn;
}

bool structurally_equal(const MachineFunction& a, const MachineFunction& b) {
  if (a.name != b.name || a.blocks.size() != b.blocks.size() || a.params.size() != b.params.size()) return false;
  auto same_operand = [&](const Operand& x, const Operand& y) {
    if (x.kind != y.kind) return false;
    switch (x.kind) {
      case OperandKind::VReg:
        return a.vregs[x.vreg_id()].name == b.vregs[y.vreg_id()].name &&
               a.vregs[x.vreg_id()].type == b.vregs[y.vreg_id()].type;
      case OperandKind::PhysReg: return a.physregs[x.phys_index()] == b.physregs[y.phys_index()];
      default: return x.value == y.value;
    }
  };
  for (std::size_t i = 0; i < a.params.size(); ++i)
    if (!same_operand(a.params[i], b.params[i])) return false;
  for (std::size_t bi = 0; bi < a.blocks.size(); ++bi) {
    const auto& x = a.blocks[bi];
    const auto& y = b.blocks[bi];
    if (x.label != y.label || x.insts.size() != y.insts.size()) return false;
    for (std::size_t i = 0; i < x.insts.size(); ++i) {
      const auto& p = x.insts[i];
      const auto& q = y.insts[i];
      if (p.op != q.op || p.mnemonic != q.mnemonic || p.defs.size() != q.defs.size() || p.uses.size() != q.uses.size())
        return false;
      for (std::size_t k = 0; k < p.defs.size(); ++k)
        if (!same_operand(p.defs[k], q.defs[k])) return false;
      for (std::size_t k = 0; k < p.uses.size(); ++k)
        if (!same_operand(p.uses[k], q.uses[k])) return false;
    }
  }
  return true;
}

}  // namespace regalloc
