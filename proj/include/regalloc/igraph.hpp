#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "regalloc/liveness.hpp"
#include "regalloc/machine.hpp"
#include "regalloc/mir.hpp"

namespace regalloc {

enum class Annotation { NotVisited, Spill, Colored };

std::string_view annotation_name(Annotation a);

struct Vertex {
  bool is_phys = false;
  VRegId vreg = 0;      // valid when !is_phys
  std::string name;     // vreg name or physreg id
  std::string type;     // vreg type; physreg type when the machine knows it
  double weight = 0;    // M(v); 0 for physregs
  LiveRange range;
};

/// Vertices are vregs and physregs occurring in the function, ordered by
/// first point then name. Edges join overlapping ranges except phys-phys.
struct InterferenceGraph {
  std::vector<Vertex> vertices;
  std::vector<std::vector<std::size_t>> adj;  // sorted

  std::optional<std::size_t> find_vreg(VRegId v) const;
  std::optional<std::size_t> find_phys(std::string_view name) const;
  bool adjacent(std::size_t a, std::size_t b) const;
  std::size_t num_edges() const;
  std::size_t num_vregs() const;

  std::map<VRegId, std::size_t> vreg_index;
  std::map<std::string, std::size_t, std::less<>> phys_index;
};

InterferenceGraph build_interference_graph(const MachineFunction& fn, const LivenessInfo& liveness,
                                           const MachineDescription* md = nullptr);

/// Per-vertex register or spill decision. Physreg vertices are colored with
/// themselves from construction on.
struct PartialAssignment {
  std::vector<std::optional<RegId>> reg;
  std::vector<bool> spilled;

  bool decided(std::size_t v) const { return reg[v].has_value() || spilled[v]; }
};

PartialAssignment initial_assignment(const InterferenceGraph& g, const MachineDescription& md);

struct LegalSets {
  std::vector<RegId> chi_T;
  std::vector<RegId> chi_C;
  std::vector<RegId> chi_I;
  std::vector<RegId> chi;
};

/// Type, congruence and interference constraint sets for uncolored vreg
/// vertex `v`; each subset of chi_T keeps R^t's order. Throws
/// PreconditionError if `v` is a physreg, already decided, or of unknown type.
LegalSets legal_registers(const InterferenceGraph& g, const MachineDescription& md, const PartialAssignment& a,
                          std::size_t v);

std::string dump_graph(const InterferenceGraph& g);

}  // namespace regalloc
