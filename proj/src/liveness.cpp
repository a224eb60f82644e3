#include "regalloc/liveness.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "regalloc/machine.hpp"

namespace regalloc {

double point_weight(const MachineFunction& fn, std::uint32_t p) { return std::pow(10.0, fn.at(p).loop_depth); }

namespace {

// Dense variable ids: vregs first, then physreg names.
struct VarSpace {
  std::size_t nvregs;
  std::vector<std::string> phys;
  std::map<std::string, std::size_t> phys_id;

  std::size_t size() const { return nvregs + phys.size(); }
  std::size_t of_phys(const std::string& name) {
    auto [it, inserted] = phys_id.emplace(name, phys.size());
    if (inserted) phys.push_back(name);
    return nvregs + it->second;
  }
};

struct Access {
  std::vector<std::size_t> defs;
  std::vector<std::size_t> uses;
};

}  // namespace

LivenessInfo compute_liveness(const MachineFunction& fn, const MachineDescription* md) {
  LivenessInfo info;
  const std::size_t npoints = fn.num_points();
  if (npoints == 0) return info;

  VarSpace vars{fn.vregs.size(), {}, {}};
  std::vector<Access> acc(npoints + 1);
  for (std::uint32_t p = 1; p <= npoints; ++p) {
    const Instruction& inst = fn.at(p);
    for (const auto& o : inst.defs) {
      if (o.is_vreg()) acc[p].defs.push_back(o.vreg_id());
      if (o.is_phys()) acc[p].defs.push_back(vars.of_phys(fn.physregs[o.phys_index()]));
    }
    for (const auto& o : inst.uses) {
      if (o.is_vreg()) acc[p].uses.push_back(o.vreg_id());
      if (o.is_phys()) acc[p].uses.push_back(vars.of_phys(fn.physregs[o.phys_index()]));
    }
    if (inst.op == Opcode::Call && md)
      for (RegId r : md->call_clobbers()) acc[p].defs.push_back(vars.of_phys(md->reg(r).id));
  }
  std::vector<std::size_t> param_vars;
  for (const auto& o : fn.params) {
    if (o.is_vreg()) param_vars.push_back(o.vreg_id());
    if (o.is_phys()) param_vars.push_back(vars.of_phys(fn.physregs[o.phys_index()]));
  }

  const std::size_t nvars = vars.size();
  const std::size_t nblocks = fn.blocks.size();

  // Block-level use/def and backward dataflow.
  std::vector<std::vector<bool>> gen(nblocks, std::vector<bool>(nvars)), kill(gen), live_in(gen), live_out(gen);
  for (BlockId b = 0; b < nblocks; ++b) {
    for (const auto& inst : fn.blocks[b].insts) {
      for (std::size_t u : acc[inst.point].uses)
        if (!kill[b][u]) gen[b][u] = true;
      for (std::size_t d : acc[inst.point].defs) kill[b][d] = true;
    }
  }
  bool changed = true;
  while (changed) {
    changed = false;
    for (BlockId bi = nblocks; bi-- > 0;) {
      std::vector<bool> out(nvars, false);
      for (BlockId s : fn.cfg.succs[bi])
        for (std::size_t x = 0; x < nvars; ++x)
          if (live_in[s][x]) out[x] = true;
      std::vector<bool> in(nvars);
      for (std::size_t x = 0; x < nvars; ++x) in[x] = gen[bi][x] || (out[x] && !kill[bi][x]);
      if (out != live_out[bi] || in != live_in[bi]) {
        live_out[bi] = std::move(out);
        live_in[bi] = std::move(in);
        changed = true;
      }
    }
  }

  // Per-point marks: accessed at p, or live across p (live after p).
  std::vector<std::optional<LiveRange>> hull(nvars);
  std::vector<std::set<std::uint32_t>> points(nvars), phys_live(nvars);
  auto mark = [&](std::size_t x, std::uint32_t p) {
    if (x >= vars.nvregs) phys_live[x].insert(p);
    auto& h = hull[x];
    if (!h)
      h = LiveRange{p, p};
    else {
      h->start = std::min(h->start, p);
      h->end = std::max(h->end, p);
    }
  };
  for (BlockId b = 0; b < nblocks; ++b) {
    std::vector<bool> live = live_out[b];
    const auto& insts = fn.blocks[b].insts;
    for (std::size_t i = insts.size(); i-- > 0;) {
      std::uint32_t p = insts[i].point;
      for (std::size_t x = 0; x < nvars; ++x)
        if (live[x]) mark(x, p);
      for (std::size_t d : acc[p].defs) {
        mark(d, p);
        points[d].insert(p);
        live[d] = false;
      }
      for (std::size_t u : acc[p].uses) {
        mark(u, p);
        points[u].insert(p);
        live[u] = true;
      }
    }
  }
  for (std::size_t x : param_vars) {
    mark(x, 1);
    points[x].insert(1);
  }

  for (std::size_t x = 0; x < nvars; ++x) {
    if (!hull[x]) continue;
    if (x < vars.nvregs) {
      VRegId v = static_cast<VRegId>(x);
      info.ranges[v] = *hull[x];
      auto& k = info.uses[v];
      k.assign(points[x].begin(), points[x].end());
      auto& d = info.distances[v];
      for (std::size_t i = 1; i < k.size(); ++i) d.push_back(k[i] - k[i - 1]);
      double m = 0;
      for (std::uint32_t p : k) m += point_weight(fn, p);
      info.weights[v] = m;
    } else {
      const std::string& name = vars.phys[x - vars.nvregs];
      info.phys_ranges[name] = *hull[x];
      info.phys_points[name].assign(points[x].begin(), points[x].end());
      info.phys_live[name].assign(phys_live[x].begin(), phys_live[x].end());
    }
  }
  info.pressure = register_pressure(fn, info);
  return info;
}

std::uint32_t register_pressure(const MachineFunction& fn, const LivenessInfo& info) {
  std::vector<std::int32_t> delta(fn.num_points() + 2, 0);
  for (const auto& [v, r] : info.ranges) {
    ++delta[r.start];
    --delta[r.end + 1];
  }
  std::int32_t cur = 0, best = 0;
  for (std::size_t p = 1; p < delta.size(); ++p) {
    cur += delta[p];
    best = std::max(best, cur);
  }
  return static_cast<std::uint32_t>(best);
}

std::string dump_liveness(const MachineFunction& fn, const LivenessInfo& info) {
  std::ostringstream os;
  os << "liveness " << fn.name << "\n";
  os << "points " << fn.num_points() << "\n";
  os << "pressure " << info.pressure << "\n";
  for (const auto& [v, r] : info.ranges) {
    os << "vreg %" << fn.vregs[v].name << " type " << fn.vregs[v].type << " range [" << r.start << "," << r.end
       << "] K {";
    const auto& k = info.uses.at(v);
    for (std::size_t i = 0; i < k.size(); ++i) os << (i ? "," : "") << k[i];
    os << "} D (";
    const auto& d = info.distances.at(v);
    for (std::size_t i = 0; i < d.size(); ++i) os << (i ? "," : "") << d[i];
    os << ") M " << info.weights.at(v) << "\n";
  }
  for (const auto& [name, pts] : info.phys_live) {
    os << "phys $" << name << " live {";
    for (std::size_t i = 0; i < pts.size(); ++i) os << (i ? "," : "") << pts[i];
    os << "}\n";
  }
  return os.str();
}

}  // namespace regalloc
