#include "doctest.h"
#include "fixtures.hpp"
#include "oracles.hpp"
#include "regalloc/error.hpp"
#include "regalloc/generator.hpp"
#include "regalloc/interpreter.hpp"
#include "regalloc/transforms.hpp"

using namespace regalloc;

namespace {

std::vector<std::vector<std::int64_t>> battery() {
  return {{}, {1}, {-3, 7}, {100, 2}, {5, 5}};
}

void check_same_behavior(const MachineFunction& a, const MachineFunction& b) {
  for (const auto& in : battery()) {
    std::optional<Outputs> oa, ob;
    try {
      oa = interpret(a, in);
    } catch (const InterpretError&) {
    }
    try {
      ob = interpret(b, in);
    } catch (const InterpretError&) {
    }
    CHECK(oa == ob);
  }
}

int count_op(const MachineFunction& fn, Opcode op) {
  int n = 0;
  for (const auto& bb : fn.blocks)
    for (const auto& inst : bb.insts) n += inst.op == op;
  return n;
}

const char* kLoop = R"(func f(%a:gr32) {
bb0:
  %v:gr32 = mov 1
  %n:gr32 = mov 3
  jmp bb1
bb1:
  %v:gr32 = add %v:gr32, %a:gr32
  print %v:gr32
  %n:gr32 = sub %n:gr32, 1
  br %n:gr32, bb1, bb2
bb2:
  print %v:gr32
}
)";

}  // namespace

TEST_CASE("split at the last use of straight-line code") {
  auto fn = fixtures::running_example();
  VRegId i = *fn.find_vreg("i");
  auto r = split_live_range(fn, i, 11);
  CHECK(r.repair_moves.empty());
  CHECK(r.split_move == 12);
  auto live = compute_liveness(r.fn);
  CHECK(live.uses[r.second] == std::vector<std::uint32_t>{12});
  CHECK(live.uses[r.first] == std::vector<std::uint32_t>{1, 6, 8, 11, 12});
  check_same_behavior(fn, r.fn);
}

TEST_CASE("split moves accesses and adds the move to both halves") {
  auto fn = fixtures::running_example();
  VRegId i = *fn.find_vreg("i");
  auto r = split_live_range(fn, i, 6);
  auto live = compute_liveness(r.fn);
  CHECK(live.uses[r.first] == std::vector<std::uint32_t>{1, 6, 7});
  CHECK(live.uses[r.second] == std::vector<std::uint32_t>{7, 9, 12});
  CHECK(live.weights[r.first] + live.weights[r.second] == compute_liveness(fn).weights[i] + 2);
  CHECK(r.fn.vregs[r.first].name == "i.1");
  CHECK(r.fn.vregs[r.second].name == "i.2");
  check_same_behavior(fn, r.fn);
}

TEST_CASE("split preconditions") {
  auto fn = fixtures::running_example();
  VRegId i = *fn.find_vreg("i");
  CHECK_THROWS_AS(split_live_range(fn, i, 5), PreconditionError);
  CHECK_THROWS_AS(split_live_range(fn, i, 1), PreconditionError);
  auto dead = parse_function("func f {\n  %d:gr32 = mov 1\n}\n");
  CHECK_THROWS_AS(split_live_range(dead, 0, 1), PreconditionError);
}

TEST_CASE("split inside a loop header repairs the back edge") {
  auto fn = parse_function(kLoop);
  VRegId v = *fn.find_vreg("v");
  // point 4 is v = add v, a at the top of the loop block bb1, DF(bb1) = {bb1}
  auto r = split_live_range(fn, v, 4);
  CHECK(r.repair_moves.size() == 1);
  CHECK(r.fn.block_of(r.repair_moves[0]) == 1);
  check_same_behavior(fn, r.fn);
}

TEST_CASE("split of a terminator use goes before the branch") {
  auto fn = parse_function(kLoop);
  VRegId n = *fn.find_vreg("n");
  auto r = split_live_range(fn, n, 7);
  // split move, then the back-edge repair, then the branch
  REQUIRE(r.repair_moves.size() == 1);
  CHECK(r.repair_moves[0] == r.split_move + 1);
  CHECK(r.fn.at(r.split_move + 2).op == Opcode::Br);
  check_same_behavior(fn, r.fn);
}

TEST_CASE("random splits preserve behavior and validate") {
  std::uint64_t rng = 5;
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    auto fn = generate_random_function(seed);
    auto original = fn;
    for (int round = 0; round < 3; ++round) {
      auto live = compute_liveness(fn);
      std::vector<std::pair<VRegId, std::uint32_t>> options;
      for (const auto& [v, k] : live.uses)
        for (std::size_t j = 1; j < k.size(); ++j) options.emplace_back(v, k[j]);
      if (options.empty()) break;
      auto [v, k] = options[splitmix64(rng++) % options.size()];
      auto r = split_live_range(fn, v, k);
      CHECK_NOTHROW(validate(r.fn));
      auto after = compute_liveness(r.fn);
      // Original access weights are preserved; the new moves add their own.
      double moves = point_weight(r.fn, r.split_move) * 2;
      for (auto p : r.repair_moves) moves += point_weight(r.fn, p) * 2;
      double before_w = live.weights[v];
      double after_w = after.weights[r.first] + after.weights[r.second];
      // Two accesses at one point (k itself and a repair in the same block) never merge.
      CHECK(after_w == doctest::Approx(before_w + moves));
      fn = std::move(r.fn);
    }
    check_same_behavior(original, fn);
  }
}

TEST_CASE("spill inserts one store per def and one load per use") {
  auto fn = parse_function("func f {\n  %v:gr32 = mov 4\n  print %v:gr32\n  print %v:gr32\n}\n");
  auto s = insert_spill(fn, 0);
  CHECK(count_op(s.fn, Opcode::Store) == 1);
  CHECK(count_op(s.fn, Opcode::Load) == 2);
  CHECK(s.temps.size() == 3);
  auto live = compute_liveness(s.fn);
  for (VRegId t : s.temps) CHECK(live.ranges[t].length() <= 2);
  check_same_behavior(fn, s.fn);

  auto dead = parse_function("func f {\n  %d:gr32 = mov 1\n  print 3\n}\n");
  auto sd = insert_spill(dead, 0);
  CHECK(count_op(sd.fn, Opcode::Store) == 1);
  CHECK(count_op(sd.fn, Opcode::Load) == 0);
  CHECK_THROWS_AS(insert_spill(dead, 7), PreconditionError);
}

TEST_CASE("spill shares a temp for read-modify-write and handles params") {
  auto fn = parse_function(kLoop);
  for (VRegId v : fn.live_vregs()) {
    auto s = insert_spill(fn, v);
    CHECK_NOTHROW(validate(s.fn));
    check_same_behavior(fn, s.fn);
  }
  auto s = insert_spill(fn, *fn.find_vreg("v"));
  // v: def, rmw, use, use
  CHECK(s.temps.size() == 4);
}

TEST_CASE("random spills preserve behavior") {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    auto fn = generate_random_function(seed);
    auto original = fn;
    for (VRegId v : original.live_vregs())
      if ((v + seed) % 3 == 0) fn = insert_spill(fn, *fn.find_vreg(original.vregs[v].name)).fn;
    CHECK_NOTHROW(validate(fn));
    check_same_behavior(original, fn);
  }
}

TEST_CASE("apply_assignment") {
  auto md = uniform_machine(4);
  auto fn = fixtures::running_example();
  ColorMap cmap{{"i", "r0"}, {"x", "r1"}, {"y", "r2"}, {"z", "r3"}};
  CHECK(verify_allocation(fn, compute_liveness(fn), cmap, md).empty());
  auto phys = apply_assignment(fn, cmap, md);
  CHECK_FALSE(phys.has_vregs());
  CHECK(interpret(phys, {}, kDefaultFuel, &md).printed == std::vector<std::int64_t>{10, 20, 12, 2});

  auto none = parse_function("func f {\n  print 1\n}\n");
  CHECK(structurally_equal(apply_assignment(none, {}, md), none));

  const auto& x86 = fixtures::x86like();
  auto small = parse_function("func f {\n  %a:gr32 = mov 1\n  print %a:gr32\n}\n", &x86);
  CHECK_THROWS_AS(apply_assignment(small, {{"a", "rax"}}, x86), PreconditionError);
  CHECK_THROWS_AS(apply_assignment(small, {}, x86), PreconditionError);
}

TEST_CASE("verify_allocation reports congruence and interference") {
  const auto& md = fixtures::x86like();
  auto fn = parse_function("func f {\n  %a:gr64 = mov 1\n  %b:gr32 = mov 2\n  print %a:gr64\n  print %b:gr32\n}\n", &md);
  auto live = compute_liveness(fn, &md);
  auto v = verify_allocation(fn, live, {{"a", "rax"}, {"b", "eax"}}, md);
  REQUIRE(v.size() == 1);
  CHECK(v[0].kind == Violation::Kind::Congruence);
  auto w = verify_allocation(fn, live, {{"a", "rax"}, {"b", "rbx"}}, md);
  REQUIRE(w.size() == 1);
  CHECK(w[0].kind == Violation::Kind::Type);
  CHECK(verify_allocation(fn, live, {{"a", "rax"}}, md)[0].kind == Violation::Kind::Missing);
  auto empty = parse_function("func f {\n}\n");
  CHECK(verify_allocation(empty, compute_liveness(empty), {}, md).empty());
}

TEST_CASE("verify_allocation agrees with the point checker") {
  const auto& md = fixtures::x86like();
  GenParams p;
  p.instrs = 12;
  p.vregs = 5;
  p.types = {"gr32", "gr64"};
  p.call_prob = 0.1;
  std::uint64_t rng = 1;
  int clean = 0;
  for (std::uint64_t seed = 0; seed < 400; ++seed) {
    auto fn = generate_random_function(seed, p, &md);
    if (fn.num_points() > 40) continue;
    auto live = compute_liveness(fn, &md);
    std::map<VRegId, RegId> assignment;
    ColorMap cmap;
    for (const auto& [v, r] : live.ranges) {
      const auto& members = md.type(md.type_id(fn.vregs[v].type)).members;
      RegId reg = members[splitmix64(rng++) % members.size()];
      assignment[v] = reg;
      cmap[fn.vregs[v].name] = md.reg(reg).id;
    }
    bool ok = verify_allocation(fn, live, cmap, md).empty();
    CHECK(ok == oracle::point_checker_accepts(fn, live, assignment, md));
    clean += ok;
  }
  CHECK(clean > 0);
}

TEST_CASE("estimate_throughput") {
  const auto& md = fixtures::x86like();
  CHECK(estimate_throughput(md, parse_function("func f {\n}\n")) == 0);
  auto straight = parse_function("func f {\n  $eax = mov 1\n  $ebx = mov 2\n  $ecx = mul $eax, $ebx\n}\n", &md);
  CHECK(estimate_throughput(md, straight) == 5);
  CHECK_THROWS_AS(estimate_throughput(md, fixtures::running_example()), PreconditionError);

  // Spilling a vreg with two accesses in a depth-1 loop costs 2 x 4 x 10 more.
  auto uni = uniform_machine(4);
  const char* src = R"(func f {
bb0:
  %n:gr32 = mov 2
  jmp bb1
bb1:
  %v:gr32 = mov 5
  print %v:gr32
  %n:gr32 = sub %n:gr32, 1
  br %n:gr32, bb1, bb2
bb2:
  ret
}
)";
  auto fn = parse_function(src);
  auto base = apply_assignment(fn, {{"n", "r0"}, {"v", "r1"}}, uni);
  auto spilled = insert_spill(fn, *fn.find_vreg("v"));
  ColorMap m{{"n", "r0"}};
  for (VRegId t : spilled.temps) m[spilled.fn.vregs[t].name] = "r1";
  auto after = apply_assignment(spilled.fn, m, uni);
  CHECK(estimate_throughput(uni, after) - estimate_throughput(uni, base) == 80);
}

TEST_CASE("appending instructions never lowers cost") {
  const auto& md = fixtures::x86like();
  MachineFunction fn = parse_function("func f {\n  $eax = mov 1\n}\n", &md);
  double prev = estimate_throughput(md, fn);
  for (Opcode op : {Opcode::Mov, Opcode::Add, Opcode::Mul, Opcode::Div, Opcode::Print}) {
    Instruction inst;
    inst.op = op;
    inst.mnemonic = std::string(opcode_name(op));
    if (op == Opcode::Print) {
      inst.uses = {Operand::phys(0)};
    } else {
      inst.defs = {Operand::phys(0)};
      inst.uses = op == Opcode::Mov ? std::vector<Operand>{Operand::imm(3)}
                                    : std::vector<Operand>{Operand::phys(0), Operand::imm(2)};
    }
    fn.blocks[0].insts.push_back(inst);
    fn.analyze();
    double now = estimate_throughput(md, fn);
    CHECK(now >= prev);
    prev = now;
  }
}

TEST_CASE("color map text round-trips") {
  ColorMap m{{"a", "eax"}, {"b", kSpill}, {"c.1", "r3"}};
  CHECK(parse_color_map(format_color_map(m)) == m);
  CHECK_THROWS_AS(parse_color_map("%a\n"), ParseError);
  CHECK_THROWS_AS(parse_color_map("a $eax\n"), ParseError);
  CHECK_THROWS_AS(parse_color_map("%a $eax\n%a $ebx\n"), ParseError);
}
