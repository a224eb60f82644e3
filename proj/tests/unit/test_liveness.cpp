#include "doctest.h"
#include "fixtures.hpp"
#include "regalloc/generator.hpp"
#include "regalloc/liveness.hpp"

using namespace regalloc;

TEST_CASE("running example liveness") {
  auto fn = fixtures::running_example();
  auto info = compute_liveness(fn);
  VRegId i = *fn.find_vreg("i"), x = *fn.find_vreg("x"), y = *fn.find_vreg("y"), z = *fn.find_vreg("z");
  CHECK(info.uses[i] == std::vector<std::uint32_t>{1, 6, 8, 11});
  CHECK(info.distances[i] == std::vector<std::uint32_t>{5, 2, 3});
  CHECK(info.weights[i] == 4.0);
  CHECK(info.ranges[i] == LiveRange{1, 11});
  CHECK(info.ranges[x] == LiveRange{2, 5});
  CHECK(info.ranges[y] == LiveRange{3, 9});
  CHECK(info.ranges[z] == LiveRange{5, 10});
  CHECK(info.pressure == 4);
  CHECK(register_pressure(fn, info) == 4);
}

TEST_CASE("dead vreg and single vreg") {
  auto fn = parse_function("func f {\n  print 1\n  %d:gr32 = mov 3\n  print 2\n}\n");
  auto info = compute_liveness(fn);
  VRegId d = *fn.find_vreg("d");
  CHECK(info.ranges[d] == LiveRange{2, 2});
  CHECK(info.weights[d] == 1.0);
  CHECK(info.distances[d].empty());
  CHECK(info.pressure == 1);
}

TEST_CASE("disjoint ranges have pressure one") {
  auto fn = parse_function("func f {\n  %a:gr32 = mov 1\n  print %a:gr32\n  %b:gr32 = mov 2\n  print %b:gr32\n}\n");
  CHECK(compute_liveness(fn).pressure == 1);
}

TEST_CASE("accesses in a depth-2 loop weigh 100 each") {
  const char* src = R"(func f {
bb0:
  %n:gr32 = mov 2
  jmp bb1
bb1:
  %m:gr32 = mov 2
  jmp bb2
bb2:
  %a:gr32 = mov 7
  print %a:gr32
  %m:gr32 = sub %m:gr32, 1
  br %m:gr32, bb2, bb3
bb3:
  %n:gr32 = sub %n:gr32, 1
  br %n:gr32, bb1, bb4
bb4:
  ret
}
)";
  auto fn = parse_function(src);
  auto info = compute_liveness(fn);
  CHECK(info.weights[*fn.find_vreg("a")] == 200.0);
  // m: def in depth 1, two accesses in depth 2
  CHECK(info.weights[*fn.find_vreg("m")] == 10.0 + 100.0 + 100.0);
  // n is live around the outer loop
  CHECK(info.ranges[*fn.find_vreg("n")] == LiveRange{1, 10});
}

TEST_CASE("loop-carried value is live across the back edge") {
  const char* src = R"(func f {
bb0:
  %s:gr32 = mov 0
  %n:gr32 = mov 3
  jmp bb1
bb1:
  %t:gr32 = mov 1
  print %t:gr32
  %n:gr32 = sub %n:gr32, 1
  br %n:gr32, bb1, bb2
bb2:
  print %s:gr32
}
)";
  auto fn = parse_function(src);
  auto info = compute_liveness(fn);
  CHECK(info.ranges[*fn.find_vreg("s")] == LiveRange{1, 8});
  CHECK(info.ranges[*fn.find_vreg("t")] == LiveRange{4, 5});
}

TEST_CASE("params are defined at point one") {
  auto fn = parse_function("func f(%p:gr32, %q:gr32) {\n  print 1\n  print %p:gr32\n}\n");
  auto info = compute_liveness(fn);
  CHECK(info.ranges[*fn.find_vreg("p")] == LiveRange{1, 2});
  CHECK(info.ranges[*fn.find_vreg("q")] == LiveRange{1, 1});
}

TEST_CASE("call clobbers become physreg accesses") {
  const auto& md = fixtures::x86like();
  auto fn = parse_function("func f {\n  %a:gr32 = mov 1\n  call\n  print %a:gr32\n}\n", &md);
  auto info = compute_liveness(fn, &md);
  CHECK(info.phys_live.at("rax") == std::vector<std::uint32_t>{2});
  CHECK(info.phys_live.count("rbx") == 0);
}

TEST_CASE("liveness invariants on generated functions") {
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    auto fn = generate_random_function(seed);
    auto info = compute_liveness(fn);
    for (const auto& [v, k] : info.uses) {
      REQUIRE_FALSE(k.empty());
      CHECK(info.ranges[v].start == k.front());
      for (auto p : k) CHECK(info.ranges[v].contains(p));
      CHECK(info.distances[v].size() == k.size() - 1);
      CHECK(info.weights[v] >= static_cast<double>(k.size()));
    }
    // Pressure by brute force per point.
    std::uint32_t best = 0;
    for (std::uint32_t p = 1; p <= fn.num_points(); ++p) {
      std::uint32_t n = 0;
      for (const auto& [v, r] : info.ranges) n += r.contains(p);
      best = std::max(best, n);
    }
    CHECK(info.pressure == best);
    if (fn.has_vregs()) CHECK(info.pressure >= 1);
  }
}
