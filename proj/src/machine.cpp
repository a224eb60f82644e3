#include "regalloc/machine.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "regalloc/error.hpp"

#ifndef REGALLOC_RL_DATA_DIR
#define REGALLOC_RL_DATA_DIR "data"
#endif

namespace regalloc {

using nlohmann::json;

std::optional<RegId> MachineDescription::find_register(std::string_view id) const {
  auto it = reg_index_.find(id);
  if (it == reg_index_.end()) return std::nullopt;
  return it->second;
}

std::optional<TypeId> MachineDescription::find_type(std::string_view id) const {
  auto it = type_index_.find(id);
  if (it == type_index_.end()) return std::nullopt;
  return it->second;
}

RegId MachineDescription::register_id(std::string_view id) const {
  if (auto r = find_register(id)) return *r;
  throw PreconditionError("unknown register '" + std::string(id) + "' in machine " + name_);
}

TypeId MachineDescription::type_id(std::string_view id) const {
  if (auto t = find_type(id)) return *t;
  throw PreconditionError("unknown register type '" + std::string(id) + "' in machine " + name_);
}

bool MachineDescription::is_call_clobbered(RegId r) const {
  return std::any_of(call_clobbers_.begin(), call_clobbers_.end(), [&](RegId c) { return aliases(c, r); });
}

OpcodeInfo default_opcode_info(Opcode op) {
  switch (op) {
    case Opcode::Load:
    case Opcode::Store: return {4, true, {}};
    case Opcode::Mul: return {3, false, {}};
    case Opcode::Div: return {10, false, {}};
    default: return {1, false, {}};
  }
}

MachineBuilder::MachineBuilder(std::string name) : name_(std::move(name)) {
  for (Opcode op : kAllOpcodes) opcodes_.push_back(default_opcode_info(op));
}

MachineBuilder& MachineBuilder::type(std::string id, unsigned width, std::string kind) {
  types_.push_back({std::move(id), width, std::move(kind), {}});
  return *this;
}

MachineBuilder& MachineBuilder::reg(std::string id, std::string_view type) {
  regs_.push_back({std::move(id), std::string(type), std::nullopt});
  return *this;
}

MachineBuilder& MachineBuilder::congruence(std::string id, std::vector<std::string> members) {
  classes_.push_back({std::move(id), std::move(members)});
  return *this;
}

MachineBuilder& MachineBuilder::latency(Opcode op, unsigned cycles, bool is_mem) {
  auto& info = opcodes_[static_cast<std::size_t>(op)];
  info.latency = cycles;
  info.is_mem = is_mem;
  return *this;
}

MachineBuilder& MachineBuilder::fixed(Opcode op, std::size_t operand, std::string reg) {
  fixed_.push_back({op, operand, std::move(reg)});
  return *this;
}

MachineBuilder& MachineBuilder::clobber(std::string reg) {
  clobbers_.push_back(std::move(reg));
  return *this;
}

MachineDescription MachineBuilder::build() && {
  MachineDescription md;
  if (name_.empty()) throw ValidationError("machine name must be non-empty");
  md.name_ = name_;

  for (auto& t : types_) {
    if (t.width == 0) throw ValidationError("type '" + t.id + "' has zero width");
    if (!md.type_index_.emplace(t.id, static_cast<TypeId>(md.types_.size())).second)
      throw ValidationError("duplicate type id '" + t.id + "'");
    md.types_.push_back(t);
  }

  for (auto& r : regs_) {
    auto t = md.find_type(r.type);
    if (!t) throw ValidationError("register '" + r.id + "' has unknown type '" + r.type + "'");
    unsigned width = md.types_[*t].width;
    if (r.width && *r.width != width)
      throw ValidationError("register '" + r.id + "' width " + std::to_string(*r.width) +
                            " differs from its type width " + std::to_string(width));
    auto id = static_cast<RegId>(md.registers_.size());
    if (!md.reg_index_.emplace(r.id, id).second) throw ValidationError("duplicate register id '" + r.id + "'");
    md.registers_.push_back({r.id, *t, width, 0});
    md.types_[*t].members.push_back(id);
  }

  for (const auto& t : md.types_)
    if (t.members.empty()) throw ValidationError("type '" + t.id + "' has an empty register list");

  std::vector<int> owner(md.registers_.size(), -1);
  for (auto& c : classes_) {
    CongruenceClass cls{c.id, {}};
    auto class_index = static_cast<std::uint32_t>(md.classes_.size());
    for (auto& m : c.members) {
      auto r = md.find_register(m);
      if (!r) throw ValidationError("congruence class '" + c.id + "' names unknown register '" + m + "'");
      if (owner[*r] != -1) {
        std::string first = static_cast<std::size_t>(owner[*r]) < md.classes_.size()
                                ? md.classes_[static_cast<std::size_t>(owner[*r])].id
                                : c.id;
        throw ValidationError("register '" + m + "' is assigned to two congruence classes ('" + first + "' and '" +
                              c.id + "')");
      }
      owner[*r] = static_cast<int>(class_index);
      md.registers_[*r].congruence_class = class_index;
      cls.chain.push_back(*r);
    }
    std::sort(cls.chain.begin(), cls.chain.end(),
              [&](RegId a, RegId b) { return md.registers_[a].width < md.registers_[b].width; });
    for (std::size_t i = 1; i < cls.chain.size(); ++i)
      if (md.registers_[cls.chain[i]].width == md.registers_[cls.chain[i - 1]].width)
        throw ValidationError("congruence class '" + c.id + "' is not totally ordered: '" +
                              md.registers_[cls.chain[i - 1]].id + "' and '" + md.registers_[cls.chain[i]].id +
                              "' have equal width");
    md.classes_.push_back(std::move(cls));
  }
  for (std::size_t r = 0; r < owner.size(); ++r)
    if (owner[r] == -1)
      throw ValidationError("register '" + md.registers_[r].id + "' belongs to no congruence class");

  md.opcodes_ = opcodes_;
  for (auto& f : fixed_) {
    auto r = md.find_register(f.reg);
    if (!r) throw ValidationError("fixed constraint on '" + std::string(opcode_name(f.op)) +
                                  "' names unknown register '" + f.reg + "'");
    md.opcodes_[static_cast<std::size_t>(f.op)].fixed.push_back({f.operand, *r});
  }
  for (const auto& info : md.opcodes_)
    if (info.latency == 0) throw ValidationError("opcode latency must be a positive integer");

  for (auto& c : clobbers_) {
    auto r = md.find_register(c);
    if (!r) throw ValidationError("call clobber names unknown register '" + c + "'");
    md.call_clobbers_.push_back(*r);
  }
  return md;
}

namespace {

std::size_t line_of(std::string_view text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte), '\n'));
}

const json& require(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) throw ParseError(0, where + "." + key, "missing required field");
  return obj.at(key);
}

std::string require_string(const json& obj, const char* key, const std::string& where) {
  const json& v = require(obj, key, where);
  if (!v.is_string()) throw ParseError(0, where + "." + key, "expected a string");
  return v.get<std::string>();
}

unsigned require_positive(const json& v, const std::string& field) {
  if (!v.is_number_integer() || v.get<long long>() <= 0) throw ParseError(0, field, "expected a positive integer");
  return static_cast<unsigned>(v.get<long long>());
}

std::optional<Opcode> opcode_by_name(std::string_view name) {
  for (Opcode op : kAllOpcodes)
    if (opcode_name(op) == name) return op;
  return std::nullopt;
}

}  // namespace

MachineDescription load_machine_description(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ParseError(line_of(text, e.byte == 0 ? 0 : e.byte - 1), "", e.what());
  }
  if (!doc.is_object()) throw ParseError(1, "", "top level must be an object");

  MachineBuilder b(require_string(doc, "name", "machine"));

  const json& types = require(doc, "types", "machine");
  if (!types.is_array()) throw ParseError(0, "types", "expected an array");
  for (std::size_t i = 0; i < types.size(); ++i) {
    std::string where = "types[" + std::to_string(i) + "]";
    const json& t = types[i];
    unsigned width = require_positive(require(t, "width", where), where + ".width");
    std::string kind = t.contains("kind") && t["kind"].is_string() ? t["kind"].get<std::string>() : "gpr";
    b.type(require_string(t, "id", where), width, kind);
  }

  const json& regs = require(doc, "registers", "machine");
  if (!regs.is_array()) throw ParseError(0, "registers", "expected an array");
  for (std::size_t i = 0; i < regs.size(); ++i) {
    std::string where = "registers[" + std::to_string(i) + "]";
    const json& r = regs[i];
    b.reg(require_string(r, "id", where), require_string(r, "type", where));
    if (r.contains("width")) b.regs_.back().width = require_positive(r["width"], where + ".width");
  }

  const json& classes = require(doc, "congruence_classes", "machine");
  if (!classes.is_array()) throw ParseError(0, "congruence_classes", "expected an array");
  for (std::size_t i = 0; i < classes.size(); ++i) {
    std::string where = "congruence_classes[" + std::to_string(i) + "]";
    const json& members = require(classes[i], "members", where);
    if (!members.is_array()) throw ParseError(0, where + ".members", "expected an array");
    std::vector<std::string> names;
    for (const auto& m : members) {
      if (!m.is_string()) throw ParseError(0, where + ".members", "expected register ids");
      names.push_back(m.get<std::string>());
    }
    b.congruence(require_string(classes[i], "id", where), std::move(names));
  }

  if (doc.contains("opcodes")) {
    const json& ops = doc["opcodes"];
    if (!ops.is_object()) throw ParseError(0, "opcodes", "expected an object");
    for (auto it = ops.begin(); it != ops.end(); ++it) {
      std::string where = "opcodes." + it.key();
      auto op = opcode_by_name(it.key());
      if (!op) throw ParseError(0, where, "unknown opcode");
      const json& info = it.value();
      OpcodeInfo def = default_opcode_info(*op);
      unsigned latency = info.contains("latency") ? require_positive(info["latency"], where + ".latency") : def.latency;
      bool is_mem = info.contains("is_mem") ? info["is_mem"].get<bool>() : def.is_mem;
      b.latency(*op, latency, is_mem);
      if (info.contains("fixed")) {
        for (const auto& f : info["fixed"]) {
          if (!f.contains("operand") || !f["operand"].is_number_unsigned())
            throw ParseError(0, where + ".fixed.operand", "expected a non-negative integer");
          b.fixed(*op, f["operand"].get<std::size_t>(), require_string(f, "reg", where + ".fixed"));
        }
      }
    }
  }

  if (doc.contains("call_clobbers")) {
    for (const auto& c : doc["call_clobbers"]) {
      if (!c.is_string()) throw ParseError(0, "call_clobbers", "expected register ids");
      b.clobber(c.get<std::string>());
    }
  }

  return std::move(b).build();
}

MachineDescription load_machine_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open machine description " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return load_machine_description(ss.str());
}

MachineDescription uniform_machine(unsigned nregs, std::string type_id) {
  if (nregs == 0) throw ValidationError("uniform machine needs at least one register");
  MachineBuilder b("uniform" + std::to_string(nregs));
  b.type(type_id, 32);
  for (unsigned i = 0; i < nregs; ++i) {
    std::string r = "r" + std::to_string(i);
    b.reg(r, type_id);
    b.congruence("R" + std::to_string(i), {r});
  }
  return std::move(b).build();
}

std::filesystem::path data_dir() {
  if (const char* env = std::getenv("REGALLOC_RL_DATA"); env && *env) return env;
  return REGALLOC_RL_DATA_DIR;
}

MachineDescription resolve_machine(std::string_view name_or_path) {
  std::string s(name_or_path);
  if (s.rfind("uniform", 0) == 0 && s.size() > 7 &&
      std::all_of(s.begin() + 7, s.end(), [](unsigned char c) { return std::isdigit(c); }))
    return uniform_machine(static_cast<unsigned>(std::stoul(s.substr(7))));
  std::filesystem::path p(s);
  if (std::filesystem::exists(p) && std::filesystem::is_regular_file(p)) return load_machine_file(p);
  auto shipped = data_dir() / "machines" / (s + ".json");
  if (std::filesystem::exists(shipped)) return load_machine_file(shipped);
  throw Error("unknown machine '" + s + "' (expected x86like, arm64like, uniformN or a file path)");
}

}  // namespace regalloc
