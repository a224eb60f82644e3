#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "regalloc/igraph.hpp"
#include "regalloc/mir.hpp"

namespace regalloc {

class MachineDescription;

using Vec = std::vector<double>;
using Matrix = std::vector<Vec>;

inline constexpr const char* kNextInst = "NextInst";

struct Triplet {
  std::string head;
  std::string relation;
  std::string tail;
  friend auto operator<=>(const Triplet&, const Triplet&) = default;
};

/// vreg -> VREG, immediate -> IMM, slot -> MEM, block -> LABEL, physreg ->
/// its upper-case type id (PHYSREG without a machine).
std::string abstract_operand(const MachineFunction& fn, const Operand& op, const MachineDescription* md = nullptr);

/// Per instruction: (OPC, NextInst, next OPC) inside a block and
/// (OPC, Arg_i, abstract(operand i)) over defs then uses, i from 1.
std::vector<Triplet> generate_triplets(const std::vector<MachineFunction>& corpus,
                                       const MachineDescription* md = nullptr);

struct TransEConfig {
  unsigned dim = 32;
  unsigned epochs = 300;
  double margin = 1.0;
  double lr = 0.01;
  std::uint64_t seed = 0;

  static TransEConfig paper_preset() { return {100, 1000, 1.0, 0.01, 0}; }
};

struct EmbeddingVocabulary {
  unsigned dim = 0;
  std::map<std::string, Vec> entities;
  std::map<std::string, Vec> relations;
  TransEConfig config;
  std::vector<double> loss;  // [0] before training, then one entry per epoch

  const Vec* entity(const std::string& token) const;
  const Vec* relation(const std::string& name) const;
};

/// Margin ranking loss with uniform head-or-tail corruption, L2 distance and
/// plain SGD; entity vectors are renormalized after every epoch. The recorded
/// loss is measured on a fixed corruption sample; an epoch that would raise it
/// is undone and the step size halved, so the history never increases.
EmbeddingVocabulary train_transe(const std::vector<Triplet>& triplets, const TransEConfig& config);

double transe_distance(const EmbeddingVocabulary& vocab, const std::string& head, const std::string& relation,
                       const std::string& tail);

/// W_o * [[opcode]] + W_a * sum of [[argument]]. Unknown tokens contribute a
/// zero vector and a warning.
Vec embed_instruction(const MachineFunction& fn, const Instruction& inst, const EmbeddingVocabulary& vocab,
                      double w_o = 1.0, double w_a = 0.5, const MachineDescription* md = nullptr);

/// One embedded row per instruction of the vertex's live range, in point order.
Matrix node_features(const MachineFunction& fn, const InterferenceGraph& g, std::size_t v,
                     const EmbeddingVocabulary& vocab, const MachineDescription* md = nullptr, double w_o = 1.0,
                     double w_a = 0.5);

std::string save_vocabulary(const EmbeddingVocabulary& vocab);
EmbeddingVocabulary load_vocabulary(std::string_view text);

}  // namespace regalloc
