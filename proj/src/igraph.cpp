#include "regalloc/igraph.hpp"

#include <algorithm>
#include <sstream>
#include <tuple>

#include "regalloc/error.hpp"

namespace regalloc {

std::string_view annotation_name(Annotation a) {
  switch (a) {
    case Annotation::NotVisited: return "not_visited";
    case Annotation::Spill: return "spill";
    case Annotation::Colored: return "colored";
  }
  return "?";
}

std::optional<std::size_t> InterferenceGraph::find_vreg(VRegId v) const {
  auto it = vreg_index.find(v);
  if (it == vreg_index.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> InterferenceGraph::find_phys(std::string_view name) const {
  auto it = phys_index.find(name);
  if (it == phys_index.end()) return std::nullopt;
  return it->second;
}

bool InterferenceGraph::adjacent(std::size_t a, std::size_t b) const {
  return std::binary_search(adj[a].begin(), adj[a].end(), b);
}

std::size_t InterferenceGraph::num_edges() const {
  std::size_t n = 0;
  for (const auto& a : adj) n += a.size();
  return n / 2;
}

std::size_t InterferenceGraph::num_vregs() const {
  return static_cast<std::size_t>(std::count_if(vertices.begin(), vertices.end(), [](const Vertex& v) { return !v.is_phys; }));
}

InterferenceGraph build_interference_graph(const MachineFunction& fn, const LivenessInfo& liveness,
                                           const MachineDescription* md) {
  InterferenceGraph g;
  for (const auto& [v, r] : liveness.ranges) {
    Vertex x;
    x.vreg = v;
    x.name = fn.vregs[v].name;
    x.type = fn.vregs[v].type;
    x.weight = liveness.weights.at(v);
    x.range = r;
    g.vertices.push_back(std::move(x));
  }
  for (const auto& [name, r] : liveness.phys_ranges) {
    Vertex x;
    x.is_phys = true;
    x.name = name;
    if (md)
      if (auto id = md->find_register(name)) x.type = md->type(md->reg(*id).type).id;
    x.range = r;
    g.vertices.push_back(std::move(x));
  }
  std::sort(g.vertices.begin(), g.vertices.end(), [](const Vertex& a, const Vertex& b) {
    return std::tie(a.range.start, a.is_phys, a.name) < std::tie(b.range.start, b.is_phys, b.name);
  });
  for (std::size_t i = 0; i < g.vertices.size(); ++i) {
    if (g.vertices[i].is_phys)
      g.phys_index.emplace(g.vertices[i].name, i);
    else
      g.vreg_index.emplace(g.vertices[i].vreg, i);
  }
  g.adj.assign(g.vertices.size(), {});
  for (std::size_t i = 0; i < g.vertices.size(); ++i)
    for (std::size_t j = i + 1; j < g.vertices.size(); ++j) {
      if (g.vertices[i].is_phys && g.vertices[j].is_phys) continue;
      if (!g.vertices[i].range.overlaps(g.vertices[j].range)) continue;
      if (g.vertices[i].is_phys || g.vertices[j].is_phys) {
        const Vertex& ph = g.vertices[i].is_phys ? g.vertices[i] : g.vertices[j];
        const Vertex& vr = g.vertices[i].is_phys ? g.vertices[j] : g.vertices[i];
        const auto& pts = liveness.phys_live.at(ph.name);
        auto it = std::lower_bound(pts.begin(), pts.end(), vr.range.start);
        if (it == pts.end() || *it > vr.range.end) continue;
      }
      g.adj[i].push_back(j);
      g.adj[j].push_back(i);
    }
  for (auto& a : g.adj) std::sort(a.begin(), a.end());
  return g;
}

PartialAssignment initial_assignment(const InterferenceGraph& g, const MachineDescription& md) {
  PartialAssignment a;
  a.reg.assign(g.vertices.size(), std::nullopt);
  a.spilled.assign(g.vertices.size(), false);
  for (std::size_t i = 0; i < g.vertices.size(); ++i)
    if (g.vertices[i].is_phys) a.reg[i] = md.register_id(g.vertices[i].name);
  return a;
}

LegalSets legal_registers(const InterferenceGraph& g, const MachineDescription& md, const PartialAssignment& a,
                          std::size_t v) {
  if (v >= g.vertices.size()) throw PreconditionError("vertex " + std::to_string(v) + " is not in the graph");
  const Vertex& x = g.vertices[v];
  if (x.is_phys) throw PreconditionError("$" + x.name + " is a pre-assigned physical register");
  if (a.decided(v)) throw PreconditionError("%" + x.name + " is already colored or spilled");
  auto t = md.find_type(x.type);
  if (!t) throw PreconditionError("%" + x.name + " has type '" + x.type + "' unknown to machine " + md.name());

  LegalSets s;
  s.chi_T = md.type(*t).members;

  std::vector<RegId> held;
  for (std::size_t n : g.adj[v])
    if (a.reg[n]) held.push_back(*a.reg[n]);

  for (RegId r : s.chi_T) {
    bool congruent = std::any_of(held.begin(), held.end(), [&](RegId h) { return md.aliases(r, h); });
    bool taken = std::find(held.begin(), held.end(), r) != held.end();
    if (!congruent) s.chi_C.push_back(r);
    if (!taken) s.chi_I.push_back(r);
    if (!congruent && !taken) s.chi.push_back(r);
  }
  return s;
}

std::string dump_graph(const InterferenceGraph& g) {
  std::ostringstream os;
  os << "graph vertices " << g.vertices.size() << " edges " << g.num_edges() << "\n";
  for (std::size_t i = 0; i < g.vertices.size(); ++i) {
    const Vertex& v = g.vertices[i];
    os << "vertex " << i << " " << (v.is_phys ? "$" : "%") << v.name << " kind " << (v.is_phys ? "phys" : "virt")
       << " type " << (v.type.empty() ? "-" : v.type) << " range [" << v.range.start << "," << v.range.end << "] weight "
       << v.weight << "\n";
  }
  for (std::size_t i = 0; i < g.vertices.size(); ++i)
    for (std::size_t j : g.adj[i])
      if (i < j) os << "edge " << i << " " << j << "\n";
  return os.str();
}

}  // namespace regalloc
