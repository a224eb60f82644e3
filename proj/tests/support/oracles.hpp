#pragma once

// Independent reference computations used by unit and acceptance tests.

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "regalloc/dominance.hpp"
#include "regalloc/liveness.hpp"
#include "regalloc/machine.hpp"
#include "regalloc/transforms.hpp"

namespace oracle {

using regalloc::BlockId;
using regalloc::Successors;

/// a dominates b iff no simple entry path reaches b while avoiding a.
inline bool dominates_by_paths(const Successors& succs, BlockId entry, BlockId a, BlockId b) {
  std::vector<bool> on_path(succs.size(), false);
  std::function<bool(BlockId)> avoid = [&](BlockId x) -> bool {
    if (x == a) return false;
    if (x == b) return true;
    on_path[x] = true;
    for (BlockId s : succs[x])
      if (!on_path[s] && avoid(s)) {
        on_path[x] = false;
        return true;
      }
    on_path[x] = false;
    return false;
  };
  return !avoid(entry);
}

inline std::vector<bool> reachable(const Successors& succs, BlockId entry) {
  std::vector<bool> seen(succs.size(), false);
  std::vector<BlockId> work{entry};
  seen[entry] = true;
  while (!work.empty()) {
    BlockId x = work.back();
    work.pop_back();
    for (BlockId s : succs[x])
      if (!seen[s]) {
        seen[s] = true;
        work.push_back(s);
      }
  }
  return seen;
}

inline std::map<BlockId, std::set<BlockId>> frontier_by_paths(const Successors& succs, BlockId entry) {
  const std::size_t n = succs.size();
  auto reach = reachable(succs, entry);
  std::vector<std::vector<bool>> dom(n, std::vector<bool>(n, false));
  for (BlockId a = 0; a < n; ++a)
    for (BlockId b = 0; b < n; ++b)
      if (reach[a] && reach[b]) dom[a][b] = dominates_by_paths(succs, entry, a, b);
  std::map<BlockId, std::set<BlockId>> df;
  for (BlockId b = 0; b < n; ++b)
    if (reach[b]) df[b];
  for (BlockId p = 0; p < n; ++p) {
    if (!reach[p]) continue;
    for (BlockId x : succs[p])
      for (BlockId b = 0; b < n; ++b)
        if (reach[b] && dom[b][p] && !(dom[b][x] && b != x)) df[b].insert(x);
  }
  return df;
}

/// Values (vregs and physregs) holding a register at each point must not
/// alias; every vreg register must be type-legal. Physreg pairs are ignored.
inline bool point_checker_accepts(const regalloc::MachineFunction& fn, const regalloc::LivenessInfo& live,
                                  const std::map<regalloc::VRegId, regalloc::RegId>& assignment,
                                  const regalloc::MachineDescription& md) {
  for (const auto& [v, r] : assignment) {
    auto t = md.find_type(fn.vregs[v].type);
    if (!t || md.reg(r).type != *t) return false;
  }
  for (std::uint32_t p = 1; p <= fn.num_points(); ++p) {
    std::vector<regalloc::RegId> vreg_regs, phys_regs;
    for (const auto& [v, r] : assignment)
      if (live.ranges.at(v).contains(p)) vreg_regs.push_back(r);
    for (const auto& [name, pts] : live.phys_live)
      if (std::find(pts.begin(), pts.end(), p) != pts.end())
        if (auto r = md.find_register(name)) phys_regs.push_back(*r);
    for (std::size_t i = 0; i < vreg_regs.size(); ++i) {
      for (std::size_t j = i + 1; j < vreg_regs.size(); ++j)
        if (md.aliases(vreg_regs[i], vreg_regs[j])) return false;
      for (auto pr : phys_regs)
        if (md.aliases(vreg_regs[i], pr)) return false;
    }
  }
  return true;
}

/// Some total register map for all live vregs passes the point checker.
inline std::optional<std::map<regalloc::VRegId, regalloc::RegId>> find_spill_free_map(
    const regalloc::MachineFunction& fn, const regalloc::LivenessInfo& live, const regalloc::MachineDescription& md) {
  std::vector<regalloc::VRegId> vs;
  for (const auto& [v, r] : live.ranges) vs.push_back(v);
  std::map<regalloc::VRegId, regalloc::RegId> cur;
  std::function<bool(std::size_t)> rec = [&](std::size_t i) -> bool {
    if (i == vs.size()) return point_checker_accepts(fn, live, cur, md);
    auto t = md.find_type(fn.vregs[vs[i]].type);
    if (!t) return false;
    for (regalloc::RegId r : md.type(*t).members) {
      cur[vs[i]] = r;
      if (rec(i + 1)) return true;
    }
    cur.erase(vs[i]);
    return false;
  };
  if (rec(0)) return cur;
  return std::nullopt;
}

/// Per block: the number of distinct headers h with a back edge t -> h (h
/// dominates t) whose body {h} + {b : b reaches t avoiding h} contains b.
inline std::vector<std::uint32_t> loop_depths_by_paths(const Successors& succs, BlockId entry = 0) {
  const std::size_t n = succs.size();
  auto reach = reachable(succs, entry);
  std::vector<std::set<BlockId>> bodies(n);
  for (BlockId t = 0; t < n; ++t) {
    if (!reach[t]) continue;
    for (BlockId h : succs[t]) {
      if (!dominates_by_paths(succs, entry, h, t)) continue;
      bodies[h].insert(h);
      for (BlockId b = 0; b < n; ++b) {
        if (!reach[b] || b == h) continue;
        // b reaches t without passing through h.
        std::vector<bool> seen(n, false);
        std::vector<BlockId> work{b};
        seen[b] = true;
        bool hit = false;
        while (!work.empty() && !hit) {
          BlockId x = work.back();
          work.pop_back();
          if (x == t) hit = true;
          for (BlockId s : succs[x])
            if (s != h && !seen[s]) {
              seen[s] = true;
              work.push_back(s);
            }
        }
        if (hit) bodies[h].insert(b);
      }
    }
  }
  std::vector<std::uint32_t> depth(n, 0);
  for (const auto& body : bodies)
    for (BlockId b : body) ++depth[b];
  return depth;
}

/// Spill weight from its definition: sum over the access points of v (the
/// entry point counts for a parameter) of 10^loop depth.
inline double spill_weight(const regalloc::MachineFunction& fn, regalloc::VRegId v) {
  auto depth = loop_depths_by_paths(fn.cfg.succs);
  std::set<std::uint32_t> points;
  for (const auto& p : fn.params)
    if (p.is_vreg() && p.vreg_id() == v) points.insert(1);
  std::uint32_t point = 0;
  std::map<std::uint32_t, std::size_t> block_of;
  for (std::size_t b = 0; b < fn.blocks.size(); ++b)
    for (const auto& inst : fn.blocks[b].insts) {
      ++point;
      block_of[point] = b;
      for (std::size_t i = 0; i < inst.num_operands(); ++i)
        if (inst.operand(i).is_vreg() && inst.operand(i).vreg_id() == v) points.insert(point);
    }
  double m = 0;
  for (auto p : points) {
    std::size_t b = block_of.count(p) ? block_of[p] : 0;
    double w = 1;
    for (std::uint32_t d = 0; d < depth[b]; ++d) w *= 10;
    m += w;
  }
  return m;
}

}  // namespace oracle
