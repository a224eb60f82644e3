#include "regalloc/transforms.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "regalloc/dominance.hpp"
#include "regalloc/error.hpp"
#include "regalloc/igraph.hpp"

namespace regalloc {

namespace {

Instruction make_mov(Operand dst, Operand src) {
  Instruction inst;
  inst.op = Opcode::Mov;
  inst.mnemonic = "mov";
  inst.defs = {dst};
  inst.uses = {src};
  return inst;
}

void rename(std::vector<Operand>& ops, VRegId from, VRegId to) {
  for (auto& o : ops)
    if (o.is_vreg() && o.vreg_id() == from) o = Operand::vreg(to);
}

// Blocks at whose entry `v` is live.
std::vector<bool> live_in_blocks(const MachineFunction& fn, VRegId v) {
  const Operand ov = Operand::vreg(v);
  std::size_t n = fn.blocks.size();
  std::vector<bool> upward(n, false), kills(n, false), in(n, false);
  for (BlockId b = 0; b < n; ++b)
    for (const auto& inst : fn.blocks[b].insts) {
      if (!kills[b] && inst.reads(ov)) upward[b] = true;
      if (inst.writes(ov)) kills[b] = true;
    }
  bool changed = true;
  while (changed) {
    changed = false;
    for (BlockId b = n; b-- > 0;) {
      bool out = false;
      for (BlockId s : fn.cfg.succs[b]) out = out || in[s];
      bool now = upward[b] || (out && !kills[b]);
      if (now != in[b]) {
        in[b] = now;
        changed = true;
      }
    }
  }
  return in;
}

bool is_live_vreg(const MachineFunction& fn, VRegId v) {
  auto live = fn.live_vregs();
  return std::binary_search(live.begin(), live.end(), v);
}

std::size_t insert_before_terminator(BasicBlock& bb, Instruction inst) {
  std::size_t pos = bb.insts.size();
  if (!bb.insts.empty() && is_terminator(bb.insts.back().op)) --pos;
  bb.insts.insert(bb.insts.begin() + static_cast<long>(pos), std::move(inst));
  return pos;
}

}  // namespace

SplitResult split_live_range(const MachineFunction& fn, VRegId v, std::uint32_t k) {
  if (v >= fn.vregs.size() || !is_live_vreg(fn, v)) throw PreconditionError("split: no such vreg");
  const std::string vname = fn.vregs[v].name;
  LivenessInfo info = compute_liveness(fn);
  const auto& K = info.uses.at(v);
  if (K.size() < 2) throw PreconditionError("split: %" + vname + " has a single access");
  if (!std::binary_search(K.begin(), K.end(), k))
    throw PreconditionError("split: point " + std::to_string(k) + " is not an access of %" + vname);
  if (k == K.front()) throw PreconditionError("split: point " + std::to_string(k) + " is the definition of %" + vname);

  SplitResult res;
  res.fn = fn;
  MachineFunction& out = res.fn;
  res.first = out.add_vreg(out.fresh_vreg_name(vname), fn.vregs[v].type);
  res.second = out.add_vreg(out.fresh_vreg_name(vname), fn.vregs[v].type);

  const InstrRef at = fn.points.at(k - 1);
  const BlockId B = at.block;
  const std::size_t move_pos = is_terminator(fn.at(k).op) ? at.index : at.index + 1;
  DominatorTree dom(fn.cfg.succs, 0);
  auto in_region_block = [&](BlockId b) { return b == B || dom.strictly_dominates(B, b); };

  for (BlockId b = 0; b < out.blocks.size(); ++b)
    for (std::size_t i = 0; i < out.blocks[b].insts.size(); ++i) {
      bool region = (b == B) ? i >= move_pos : dom.strictly_dominates(B, b);
      auto& inst = out.blocks[b].insts[i];
      rename(inst.defs, v, region ? res.second : res.first);
      rename(inst.uses, v, region ? res.second : res.first);
    }
  rename(out.params, v, res.first);

  // Region exits: an edge P -> X with P in the region and X in DF(B).
  std::set<BlockId> repair_blocks;
  DominanceFrontier df = compute_dominance_frontier(fn.cfg.succs, 0);
  std::vector<bool> live_in = live_in_blocks(fn, v);
  for (BlockId x : df.frontier[B]) {
    if (!live_in[x]) continue;
    for (BlockId p : fn.cfg.preds[x])
      if (dom.reachable(p) && in_region_block(p)) repair_blocks.insert(p);
  }

  auto& bb = out.blocks[B];
  bb.insts.insert(bb.insts.begin() + static_cast<long>(move_pos),
                  make_mov(Operand::vreg(res.second), Operand::vreg(res.first)));
  for (BlockId p : repair_blocks)
    insert_before_terminator(out.blocks[p], make_mov(Operand::vreg(res.first), Operand::vreg(res.second)));

  out.analyze();
  for (std::uint32_t p = 1; p <= out.num_points(); ++p) {
    const Instruction& inst = out.at(p);
    if (inst.op != Opcode::Mov || inst.defs.size() != 1 || inst.uses.size() != 1) continue;
    if (inst.defs[0] == Operand::vreg(res.second) && inst.uses[0] == Operand::vreg(res.first)) res.split_move = p;
    if (inst.defs[0] == Operand::vreg(res.first) && inst.uses[0] == Operand::vreg(res.second)) res.repair_moves.push_back(p);
  }
  validate(out);
  return res;
}

SpillResult insert_spill(const MachineFunction& fn, VRegId v) {
  if (v >= fn.vregs.size() || !is_live_vreg(fn, v)) throw PreconditionError("spill: no such vreg");
  SpillResult res;
  res.fn = fn;
  MachineFunction& out = res.fn;
  const Operand ov = Operand::vreg(v);
  const std::string base = fn.vregs[v].name + ".r";
  const std::string type = fn.vregs[v].type;

  std::int64_t slot = 0;
  for (const auto& bb : fn.blocks)
    for (const auto& inst : bb.insts)
      for (const auto& o : inst.uses)
        if (o.kind == OperandKind::Slot) slot = std::max(slot, o.value + 1);
  res.slot = slot;

  auto temp = [&] {
    VRegId t = out.add_vreg(out.fresh_vreg_name(base), type);
    res.temps.push_back(t);
    return t;
  };
  auto store = [&](VRegId t) {
    Instruction s;
    s.op = Opcode::Store;
    s.mnemonic = "store";
    s.uses = {Operand::vreg(t), Operand::slot(slot)};
    return s;
  };

  for (auto& bb : out.blocks) {
    std::vector<Instruction> rewritten;
    for (auto& inst : bb.insts) {
      bool reads = inst.reads(ov), writes = inst.writes(ov);
      if (!reads && !writes) {
        rewritten.push_back(std::move(inst));
        continue;
      }
      VRegId t = temp();
      if (reads) {
        Instruction l;
        l.op = Opcode::Load;
        l.mnemonic = "load";
        l.defs = {Operand::vreg(t)};
        l.uses = {Operand::slot(slot)};
        rewritten.push_back(std::move(l));
      }
      rename(inst.defs, v, t);
      rename(inst.uses, v, t);
      rewritten.push_back(std::move(inst));
      if (writes) rewritten.push_back(store(t));
    }
    bb.insts = std::move(rewritten);
  }
  for (auto& p : out.params) {
    if (p != ov) continue;
    VRegId t = temp();
    p = Operand::vreg(t);
    auto& entry = out.blocks.at(0).insts;
    entry.insert(entry.begin(), store(t));
  }
  out.analyze();
  return res;
}

MachineFunction apply_assignment(const MachineFunction& fn, const ColorMap& cmap, const MachineDescription& md) {
  MachineFunction out = fn;
  std::map<VRegId, Operand> phys;
  auto lookup = [&](VRegId v) -> Operand {
    if (auto it = phys.find(v); it != phys.end()) return it->second;
    const auto& info = fn.vregs.at(v);
    auto it = cmap.find(info.name);
    if (it == cmap.end()) throw PreconditionError("no register assigned to %" + info.name);
    if (it->second == kSpill) throw PreconditionError("%" + info.name + " is marked SPILL but still has accesses");
    auto r = md.find_register(it->second);
    if (!r) throw PreconditionError("%" + info.name + " assigned unknown register $" + it->second);
    auto t = md.find_type(info.type);
    if (!t || md.reg(*r).type != *t)
      throw PreconditionError("type mismatch: %" + info.name + ":" + info.type + " assigned $" + it->second + " of type " +
                              md.type(md.reg(*r).type).id);
    Operand o = Operand::phys(out.intern_phys(it->second));
    phys.emplace(v, o);
    return o;
  };
  auto rewrite = [&](std::vector<Operand>& ops) {
    for (auto& o : ops)
      if (o.is_vreg()) o = lookup(o.vreg_id());
  };
  for (auto& bb : out.blocks)
    for (auto& inst : bb.insts) {
      rewrite(inst.defs);
      rewrite(inst.uses);
    }
  rewrite(out.params);
  out.vregs.clear();
  out.analyze();
  return out;
}

std::string_view violation_kind_name(Violation::Kind k) {
  switch (k) {
    case Violation::Kind::Missing: return "missing";
    case Violation::Kind::Type: return "type";
    case Violation::Kind::Congruence: return "congruence";
    case Violation::Kind::Interference: return "interference";
  }
  return "?";
}

std::string format_violation(const Violation& v) {
  std::string s(violation_kind_name(v.kind));
  for (const auto& x : v.values) s += " " + x;
  if (!v.reg.empty()) s += " $" + v.reg;
  return s;
}

std::vector<Violation> verify_allocation(const MachineFunction& fn, const LivenessInfo& liveness, const ColorMap& cmap,
                                         const MachineDescription& md) {
  std::vector<Violation> out;
  struct Held {
    std::string label;
    RegId reg;
    LiveRange range;
  };
  std::vector<Held> held;
  for (const auto& [v, range] : liveness.ranges) {
    const auto& info = fn.vregs[v];
    std::string label = "%" + info.name;
    auto it = cmap.find(info.name);
    if (it == cmap.end() || it->second == kSpill) {
      out.push_back({Violation::Kind::Missing, {label}, ""});
      continue;
    }
    auto r = md.find_register(it->second);
    auto t = md.find_type(info.type);
    if (!r || !t || md.reg(*r).type != *t) {
      out.push_back({Violation::Kind::Type, {label}, it->second});
      if (!r) continue;
    }
    held.push_back({label, *r, range});
  }
  for (std::size_t i = 0; i < held.size(); ++i)
    for (std::size_t j = i + 1; j < held.size(); ++j) {
      if (!held[i].range.overlaps(held[j].range) || !md.aliases(held[i].reg, held[j].reg)) continue;
      bool same = held[i].reg == held[j].reg;
      out.push_back({same ? Violation::Kind::Interference : Violation::Kind::Congruence,
                     {held[i].label, held[j].label},
                     md.reg(held[j].reg).id});
    }
  for (const auto& [name, pts] : liveness.phys_live) {
    auto r = md.find_register(name);
    if (!r) continue;
    for (const auto& h : held) {
      auto it = std::lower_bound(pts.begin(), pts.end(), h.range.start);
      if (it == pts.end() || *it > h.range.end || !md.aliases(*r, h.reg)) continue;
      out.push_back({*r == h.reg ? Violation::Kind::Interference : Violation::Kind::Congruence, {h.label, "$" + name},
                     md.reg(h.reg).id});
    }
  }
  return out;
}

Materialized materialize_allocation(const MachineFunction& fn, const ColorMap& cmap, const MachineDescription& md) {
  ColorMap cur;
  for (VRegId v : fn.live_vregs()) {
    auto it = cmap.find(fn.vregs[v].name);
    if (it == cmap.end()) throw PreconditionError("finalize: %" + fn.vregs[v].name + " has no color or spill decision");
    cur[it->first] = it->second;
  }
  std::vector<std::string> evicted, recolored;

  while (true) {
    MachineFunction w = fn;
    std::set<std::string> temp_names;
    std::set<std::string> spilled;
    // Name order keeps reload placement independent of vreg numbering.
    for (const auto& [name, decision] : cur) {
      if (decision != kSpill) continue;
      spilled.insert(name);
      SpillResult s = insert_spill(w, *w.find_vreg(name));
      for (VRegId t : s.temps) temp_names.insert(s.fn.vregs[t].name);
      w = std::move(s.fn);
    }

    LivenessInfo live = compute_liveness(w, &md);
    InterferenceGraph g = build_interference_graph(w, live, &md);
    PartialAssignment a = initial_assignment(g, md);
    for (std::size_t i = 0; i < g.vertices.size(); ++i) {
      const Vertex& x = g.vertices[i];
      if (x.is_phys || temp_names.count(x.name)) continue;
      a.reg[i] = md.register_id(cur.at(x.name));
    }

    std::optional<std::string> victim;
    for (std::size_t t = 0; t < g.vertices.size() && !victim; ++t) {
      const Vertex& tv = g.vertices[t];
      if (tv.is_phys || !temp_names.count(tv.name)) continue;
      LegalSets s = legal_registers(g, md, a, t);
      if (!s.chi.empty()) {
        a.reg[t] = s.chi.front();
        continue;
      }
      // Candidates: overlapping colored non-temp vregs, live-through first, then cheapest.
      std::vector<std::size_t> cands;
      for (std::size_t n : g.adj[t])
        if (!g.vertices[n].is_phys && !temp_names.count(g.vertices[n].name) && a.reg[n]) cands.push_back(n);
      auto accessed_inside = [&](std::size_t n) {
        for (std::uint32_t p : live.uses.at(g.vertices[n].vreg))
          if (tv.range.contains(p)) return true;
        return false;
      };
      std::sort(cands.begin(), cands.end(), [&](std::size_t x, std::size_t y) {
        return std::make_tuple(accessed_inside(x), g.vertices[x].weight, g.vertices[x].name) <
               std::make_tuple(accessed_inside(y), g.vertices[y].weight, g.vertices[y].name);
      });
      bool moved = false;
      for (std::size_t c : cands) {
        std::optional<RegId> old = a.reg[c];
        a.reg[c].reset();
        LegalSets st = legal_registers(g, md, a, t);
        if (!st.chi.empty()) {
          a.reg[t] = st.chi.front();
          LegalSets sc = legal_registers(g, md, a, c);
          if (!sc.chi.empty()) {
            a.reg[c] = sc.chi.front();
            cur[g.vertices[c].name] = md.reg(*a.reg[c]).id;
            recolored.push_back(g.vertices[c].name);
            moved = true;
            break;
          }
          a.reg[t].reset();
        }
        a.reg[c] = old;
      }
      if (moved) continue;
      if (cands.empty()) throw Error("finalize: reload temp %" + tv.name + " has no legal register and no evictable neighbor");
      victim = g.vertices[cands.front()].name;
    }
    if (victim) {
      cur[*victim] = kSpill;
      evicted.push_back(*victim);
      continue;
    }

    Materialized m;
    for (std::size_t i = 0; i < g.vertices.size(); ++i)
      if (!g.vertices[i].is_phys) m.full_map[g.vertices[i].name] = md.reg(*a.reg[i]).id;
    auto violations = verify_allocation(w, live, m.full_map, md);
    if (!violations.empty()) throw Error("finalize: allocation does not verify: " + format_violation(violations.front()));
    m.physical_fn = apply_assignment(w, m.full_map, md);
    m.virtual_fn = std::move(w);
    m.spilled = std::move(spilled);
    m.evicted = std::move(evicted);
    m.recolored = std::move(recolored);
    m.reload_temps.assign(temp_names.begin(), temp_names.end());
    return m;
  }
}

double estimate_throughput(const MachineDescription& md, const MachineFunction& fn) {
  double cost = 0;
  for (const auto& bb : fn.blocks)
    for (const auto& inst : bb.insts) {
      for (std::size_t i = 0; i < inst.num_operands(); ++i)
        if (inst.operand(i).is_vreg())
          throw PreconditionError("estimate_throughput: virtual register " + print_operand(fn, inst.operand(i)) +
                                  " in '" + print_instruction(fn, inst) + "'");
      cost += md.opcode(inst.op).latency * std::pow(10.0, inst.loop_depth);
    }
  return cost;
}

std::string format_color_map(const ColorMap& cmap) {
  std::string out;
  for (const auto& [v, r] : cmap) out += "%" + v + " " + (r == kSpill ? std::string(kSpill) : "$" + r) + "\n";
  return out;
}

ColorMap parse_color_map(std::string_view text) {
  ColorMap out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (auto c = line.find(';'); c != std::string::npos) line.resize(c);
    std::istringstream ls(line);
    std::string v, r, extra;
    if (!(ls >> v)) continue;
    if (!(ls >> r) || (ls >> extra)) throw ParseError(n, "", "expected '%vreg $reg' or '%vreg SPILL'");
    if (v.size() < 2 || v[0] != '%') throw ParseError(n, "vreg", "expected %name, got '" + v + "'");
    v.erase(0, 1);
    if (auto colon = v.find(':'); colon != std::string::npos) v.resize(colon);
    if (r != kSpill) {
      if (r.size() < 2 || r[0] != '$') throw ParseError(n, "register", "expected $reg or SPILL, got '" + r + "'");
      r.erase(0, 1);
    }
    if (!out.emplace(v, r).second) throw ParseError(n, "vreg", "duplicate entry for %" + v);
  }
  return out;
}

}  // namespace regalloc
