#include <catch2/catch_amalgamated.hpp>

#include "fabrics/compiled_plan.hpp"
#include "support/test_util.hpp"

using namespace fabrics;

TEST_CASE("common subexpressions share one tape slot") {
  SymbolTable table;
  VectorExpr q = table.input_group("q", 1);

  SECTION("literally shared node") {
    PlanBuilder builder;
    builder.add_output("y", q[0] + q[0]);
    CompiledPlan plan = builder.compile(table.groups());
    // One input load + one add.
    REQUIRE(plan.tape().size() == 2);
    const auto& add = plan.tape().back();
    CHECK(add.op == OpCode::Add);
    CHECK(add.a == add.b);
  }
  SECTION("structurally equal subtrees built twice") {
    Expr a = sin(q[0]) * sin(q[0]);        // sin node shared
    Expr b = sin(q[0]);                    // fresh, structurally equal node
    PlanBuilder builder;
    builder.add_output("y", a + b * b);
    CompiledPlan plan = builder.compile(table.groups());
    // input, sin, mul, add: the duplicate sin and mul collapse.
    CHECK(plan.tape().size() == 4);
  }
}

TEST_CASE("compiled evaluation matches recursive evaluation bit for bit") {
  SymbolTable table;
  VectorExpr vars = table.input_group("v", 3);
  Rng rng(0x5eed0004);
  for (int trial = 0; trial < 25; ++trial) {
    Expr e = testutil::random_smooth_expr(rng, vars, 7);
    PlanBuilder builder;
    builder.add_output("y", e);
    CompiledPlan plan = builder.compile(table.groups());
    std::vector<double> scratch(plan.scratch_size());
    for (int pt = 0; pt < 40; ++pt) {
      Bindings at{{"v", {rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0)}}};
      plan.eval(pack_inputs(plan, at), scratch);
      const double tape_value = plan.output_scalar("y", scratch);
      REQUIRE(tape_value == evaluate(e, at));
    }
  }
}

TEST_CASE("compile validates the input list") {
  SymbolTable table;
  VectorExpr q = table.input_group("q", 2);
  VectorExpr g = table.input_group("goal", 2);

  PlanBuilder builder;
  builder.add_output("y", q[0] + g[1]);

  SECTION("missing group is named in the error") {
    CHECK_THROWS_WITH(builder.compile({{"q", 2}}), Catch::Matchers::ContainsSubstring("goal"));
  }
  SECTION("full layout compiles and packs in declared order") {
    CompiledPlan plan = builder.compile(table.groups());
    CHECK(plan.input_size() == 4);
    CHECK(plan.input_offset("q") == 0);
    CHECK(plan.input_offset("goal") == 2);
    std::vector<double> scratch(plan.scratch_size());
    plan.eval(std::vector<double>{1.0, 2.0, 3.0, 4.0}, scratch);
    CHECK(plan.output_scalar("y", scratch) == 5.0);
  }
  SECTION("undeclared index is rejected") {
    PlanBuilder bad;
    bad.add_output("y", Expr::input("q", 5));
    CHECK_THROWS_AS(bad.compile({{"q", 2}}), ConstructionError);
  }
}

TEST_CASE("vector and matrix outputs round-trip through the tape") {
  SymbolTable table;
  VectorExpr q = table.input_group("q", 2);
  MatrixExpr m(2, 2);
  m(0, 0) = q[0];
  m(0, 1) = q[0] * q[1];
  m(1, 0) = m(0, 1);
  m(1, 1) = q[1];

  PlanBuilder builder;
  builder.add_output("M", m);
  builder.add_output("v", q);
  CompiledPlan plan = builder.compile(table.groups());
  std::vector<double> scratch(plan.scratch_size());
  plan.eval(std::vector<double>{2.0, 3.0}, scratch);

  std::vector<double> out(4);
  plan.read_output("M", scratch, out);
  CHECK(out == std::vector<double>{2.0, 6.0, 6.0, 3.0});
  CHECK(plan.output("M").rows == 2);
  CHECK(plan.output("v").slots.size() == 2);
}

TEST_CASE("tape evaluation reports domain errors with node identity") {
  SymbolTable table;
  VectorExpr q = table.input_group("q", 1);
  PlanBuilder builder;
  builder.add_output("y", log(q[0]));
  CompiledPlan plan = builder.compile(table.groups());
  std::vector<double> scratch(plan.scratch_size());
  CHECK_THROWS_WITH(plan.eval(std::vector<double>{-1.0}, scratch),
                    Catch::Matchers::ContainsSubstring("log"));
}
