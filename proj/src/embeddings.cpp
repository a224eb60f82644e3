#include "regalloc/embeddings.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <set>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "regalloc/error.hpp"
#include "regalloc/generator.hpp"
#include "regalloc/machine.hpp"

namespace regalloc {

const Vec* EmbeddingVocabulary::entity(const std::string& token) const {
  auto it = entities.find(token);
  return it == entities.end() ? nullptr : &it->second;
}

const Vec* EmbeddingVocabulary::relation(const std::string& name) const {
  auto it = relations.find(name);
  return it == relations.end() ? nullptr : &it->second;
}

std::string abstract_operand(const MachineFunction& fn, const Operand& op, const MachineDescription* md) {
  switch (op.kind) {
    case OperandKind::VReg: return "VREG";
    case OperandKind::Imm: return "IMM";
    case OperandKind::Slot: return "MEM";
    case OperandKind::Block: return "LABEL";
    case OperandKind::PhysReg: {
      if (md)
        if (auto r = md->find_register(fn.physregs.at(op.phys_index()))) {
          std::string t = md->type(md->reg(*r).type).id;
          std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::toupper(c); });
          return t;
        }
      return "PHYSREG";
    }
  }
  return "UNKNOWN";
}

std::vector<Triplet> generate_triplets(const std::vector<MachineFunction>& corpus, const MachineDescription* md) {
  if (corpus.empty()) throw PreconditionError("generate_triplets: empty corpus");
  std::vector<Triplet> out;
  for (const auto& fn : corpus)
    for (const auto& bb : fn.blocks)
      for (std::size_t i = 0; i < bb.insts.size(); ++i) {
        const auto& inst = bb.insts[i];
        std::string opc = opcode_token(inst.op);
        if (i + 1 < bb.insts.size()) out.push_back({opc, kNextInst, opcode_token(bb.insts[i + 1].op)});
        for (std::size_t a = 0; a < inst.num_operands(); ++a)
          out.push_back({opc, "Arg_" + std::to_string(a + 1), abstract_operand(fn, inst.operand(a), md)});
      }
  return out;
}

namespace {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(splitmix64(seed ^ 0x5bd1e995ULL)) {}
  std::uint64_t next() { return splitmix64(state_++); }
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(next() % n); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * (static_cast<double>(next() >> 11) * 0x1.0p-53); }

 private:
  std::uint64_t state_;
};

void normalize(Vec& v) {
  double n = 0;
  for (double x : v) n += x * x;
  n = std::sqrt(n);
  if (n > 0)
    for (double& x : v) x /= n;
}

struct Indexed {
  std::size_t h, r, t;
};

struct Model {
  std::vector<Vec> ent;
  std::vector<Vec> rel;

  double dist(std::size_t h, std::size_t r, std::size_t t) const {
    double s = 0;
    for (std::size_t k = 0; k < ent[h].size(); ++k) {
      double d = ent[h][k] + rel[r][k] - ent[t][k];
      s += d * d;
    }
    return std::sqrt(s);
  }
};

struct Sample {
  Indexed pos;
  Indexed neg;
};

Indexed corrupt(const Indexed& x, std::size_t nent, Rng& rng) {
  Indexed c = x;
  if (rng.next() & 1)
    c.h = rng.below(nent);
  else
    c.t = rng.below(nent);
  return c;
}

double sample_loss(const Model& m, const std::vector<Sample>& samples, double margin) {
  double total = 0;
  for (const auto& s : samples)
    total += std::max(0.0, margin + m.dist(s.pos.h, s.pos.r, s.pos.t) - m.dist(s.neg.h, s.neg.r, s.neg.t));
  return samples.empty() ? 0.0 : total / static_cast<double>(samples.size());
}

// d(h+r, t) gradient direction; zero at coincidence.
void add_grad(const Model& m, const Indexed& x, double scale, Vec& gh, Vec& gr, Vec& gt) {
  double d = m.dist(x.h, x.r, x.t);
  if (d == 0) return;
  for (std::size_t k = 0; k < gh.size(); ++k) {
    double g = scale * (m.ent[x.h][k] + m.rel[x.r][k] - m.ent[x.t][k]) / d;
    gh[k] += g;
    gr[k] += g;
    gt[k] -= g;
  }
}

}  // namespace

EmbeddingVocabulary train_transe(const std::vector<Triplet>& triplets, const TransEConfig& config) {
  if (triplets.empty()) throw PreconditionError("train_transe: empty triplet list");
  if (config.dim == 0) throw PreconditionError("train_transe: dim must be positive");

  std::map<std::string, std::size_t> ent_id, rel_id;
  for (const auto& t : triplets) {
    ent_id.emplace(t.head, 0);
    ent_id.emplace(t.tail, 0);
    rel_id.emplace(t.relation, 0);
  }
  if (ent_id.size() < 2) throw PreconditionError("train_transe: need at least two distinct entities");
  std::size_t n = 0;
  for (auto& [k, v] : ent_id) v = n++;
  n = 0;
  for (auto& [k, v] : rel_id) v = n++;

  std::vector<Indexed> data;
  data.reserve(triplets.size());
  for (const auto& t : triplets) data.push_back({ent_id[t.head], rel_id[t.relation], ent_id[t.tail]});

  Rng rng(config.seed);
  const double bound = 6.0 / std::sqrt(static_cast<double>(config.dim));
  Model m;
  m.ent.assign(ent_id.size(), Vec(config.dim));
  m.rel.assign(rel_id.size(), Vec(config.dim));
  for (auto& v : m.ent) {
    for (double& x : v) x = rng.uniform(-bound, bound);
    normalize(v);
  }
  for (auto& v : m.rel) {
    for (double& x : v) x = rng.uniform(-bound, bound);
    normalize(v);
  }

  // Fixed evaluation sample for the recorded loss.
  Rng eval_rng(config.seed + 1);
  std::vector<Sample> eval;
  const std::size_t eval_size = std::min<std::size_t>(data.size(), 20000);
  for (std::size_t i = 0; i < eval_size; ++i) {
    const Indexed& x = data[data.size() <= eval_size ? i : eval_rng.below(data.size())];
    eval.push_back({x, corrupt(x, m.ent.size(), eval_rng)});
  }

  EmbeddingVocabulary vocab;
  vocab.dim = config.dim;
  vocab.config = config;
  vocab.loss.push_back(sample_loss(m, eval, config.margin));

  double lr = config.lr;
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Vec gh(config.dim), gr(config.dim), gt(config.dim), gh2(config.dim), gr2(config.dim), gt2(config.dim);

  for (unsigned epoch = 0; epoch < config.epochs; ++epoch) {
    Model before = m;
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    for (std::size_t idx : order) {
      const Indexed& pos = data[idx];
      Indexed neg = corrupt(pos, m.ent.size(), rng);
      double l = config.margin + m.dist(pos.h, pos.r, pos.t) - m.dist(neg.h, neg.r, neg.t);
      if (l <= 0) continue;
      std::fill(gh.begin(), gh.end(), 0.0);
      std::fill(gr.begin(), gr.end(), 0.0);
      std::fill(gt.begin(), gt.end(), 0.0);
      std::fill(gh2.begin(), gh2.end(), 0.0);
      std::fill(gr2.begin(), gr2.end(), 0.0);
      std::fill(gt2.begin(), gt2.end(), 0.0);
      add_grad(m, pos, 1.0, gh, gr, gt);
      add_grad(m, neg, -1.0, gh2, gr2, gt2);
      for (std::size_t k = 0; k < config.dim; ++k) {
        m.ent[pos.h][k] -= lr * gh[k];
        m.ent[pos.t][k] -= lr * gt[k];
        m.rel[pos.r][k] -= lr * gr[k];
        m.ent[neg.h][k] -= lr * gh2[k];
        m.ent[neg.t][k] -= lr * gt2[k];
        m.rel[neg.r][k] -= lr * gr2[k];
      }
    }
    for (auto& v : m.ent) normalize(v);
    double l = sample_loss(m, eval, config.margin);
    if (l > vocab.loss.back()) {
      m = std::move(before);
      lr *= 0.5;
      vocab.loss.push_back(vocab.loss.back());
      spdlog::debug("transe: epoch {} rejected, lr now {}", epoch, lr);
    } else {
      vocab.loss.push_back(l);
    }
  }

  for (const auto& [k, i] : ent_id) vocab.entities[k] = m.ent[i];
  for (const auto& [k, i] : rel_id) vocab.relations[k] = m.rel[i];
  return vocab;
}

double transe_distance(const EmbeddingVocabulary& vocab, const std::string& head, const std::string& relation,
                       const std::string& tail) {
  const Vec* h = vocab.entity(head);
  const Vec* r = vocab.relation(relation);
  const Vec* t = vocab.entity(tail);
  if (!h || !r || !t) throw PreconditionError("transe_distance: unknown token");
  double s = 0;
  for (std::size_t k = 0; k < h->size(); ++k) {
    double d = (*h)[k] + (*r)[k] - (*t)[k];
    s += d * d;
  }
  return std::sqrt(s);
}

namespace {

void warn_unknown(const std::string& token) {
  static std::mutex mu;
  static std::set<std::string> seen;
  std::lock_guard lock(mu);
  if (seen.insert(token).second) spdlog::warn("embedding: unknown token '{}' maps to a zero vector", token);
}

}  // namespace

Vec embed_instruction(const MachineFunction& fn, const Instruction& inst, const EmbeddingVocabulary& vocab, double w_o,
                      double w_a, const MachineDescription* md) {
  if (!(w_o > 0 && w_o <= 1 && w_a > 0 && w_a <= 1 && w_o > w_a))
    throw PreconditionError("embed_instruction: need 0 < W_a < W_o <= 1");
  Vec out(vocab.dim, 0.0);
  auto add = [&](const std::string& token, double w) {
    const Vec* v = vocab.entity(token);
    if (!v) {
      warn_unknown(token);
      return;
    }
    if (v->size() != vocab.dim) throw PreconditionError("embed_instruction: dimension mismatch for '" + token + "'");
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += w * (*v)[k];
  };
  add(opcode_token(inst.op), w_o);
  for (std::size_t a = 0; a < inst.num_operands(); ++a) add(abstract_operand(fn, inst.operand(a), md), w_a);
  return out;
}

Matrix node_features(const MachineFunction& fn, const InterferenceGraph& g, std::size_t v,
                     const EmbeddingVocabulary& vocab, const MachineDescription* md, double w_o, double w_a) {
  Matrix rows;
  const LiveRange& r = g.vertices.at(v).range;
  for (std::uint32_t p = r.start; p <= r.end; ++p) rows.push_back(embed_instruction(fn, fn.at(p), vocab, w_o, w_a, md));
  return rows;
}

std::string save_vocabulary(const EmbeddingVocabulary& vocab) {
  nlohmann::json j;
  j["dim"] = vocab.dim;
  j["entities"] = vocab.entities;
  j["relations"] = vocab.relations;
  j["metadata"] = {{"epochs", vocab.config.epochs},
                   {"margin", vocab.config.margin},
                   {"lr", vocab.config.lr},
                   {"seed", vocab.config.seed},
                   {"loss", vocab.loss}};
  return j.dump(1);
}

EmbeddingVocabulary load_vocabulary(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    std::size_t line = 1;
    for (std::size_t i = 0; i < std::min(e.byte, text.size()); ++i) line += text[i] == '\n';
    throw ParseError(line, "", e.what());
  }
  EmbeddingVocabulary v;
  try {
    v.dim = j.at("dim").get<unsigned>();
    v.entities = j.at("entities").get<std::map<std::string, Vec>>();
    v.relations = j.at("relations").get<std::map<std::string, Vec>>();
    if (j.contains("metadata")) {
      const auto& m = j["metadata"];
      v.config.dim = v.dim;
      v.config.epochs = m.value("epochs", 0u);
      v.config.margin = m.value("margin", 1.0);
      v.config.lr = m.value("lr", 0.01);
      v.config.seed = m.value("seed", std::uint64_t{0});
      v.loss = m.value("loss", std::vector<double>{});
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(0, "vocabulary", e.what());
  }
  for (const auto* table : {&v.entities, &v.relations})
    for (const auto& [k, vec] : *table)
      if (vec.size() != v.dim) throw ValidationError("vocabulary vector '" + k + "' has dimension " + std::to_string(vec.size()) + ", expected " + std::to_string(v.dim));
  return v;
}

}  // namespace regalloc
