#include <catch2/catch_amalgamated.hpp>

#include "fabrics/leaves.hpp"
#include "fabrics/search_space.hpp"
#include "support/test_util.hpp"

using namespace fabrics;

namespace {

struct LeafFixture {
  SymbolTable table;
  VectorExpr q, qdot;
  AvoidanceGains gains;

  explicit LeafFixture(int dof = 2) {
    q = table.input_group("q", dof);
    qdot = table.input_group("qdot", dof);
    gains = AvoidanceGains{table.input_scalar("k_geo"), table.input_scalar("beta_geo"),
                           table.input_scalar("k_fin"), table.input_scalar("beta_fin"),
                           {"k_geo", "beta_geo", "k_fin", "beta_fin"}};
  }
};

RobotModel two_link_robot() {
  RobotModel robot;
  robot.name = "planar2";
  robot.link_lengths = {1.0, 1.0};
  robot.joint_limits = {{-3.0, 3.0}, {-3.0, 3.0}};
  robot.sphere_radii = {0.1, 0.1};
  robot.velocity_limit = 4.0;
  return robot;
}

}  // namespace

TEST_CASE("collision leaf closed forms") {
  LeafFixture fx;
  VectorExpr obst = fx.table.input_group("obst0", 2);
  Expr obst_r = fx.table.input_scalar("obst0_r");
  RobotModel robot = two_link_robot();
  VectorExpr fk = fk_expression(robot, fx.q, 2);
  LeafSpec leaf = collision_leaf(fx.table, "col", fk, 0.1, obst, obst_r, fx.q, fx.qdot, fx.gains,
                                 {"obst0", "obst0_r"});

  Bindings at{{"col:x", {1.0}},  {"col:xdot", {2.0}}, {"k_geo", {0.03}},
              {"beta_geo", {3}}, {"k_fin", {0.03}},   {"beta_fin", {3}}};

  SECTION("geometry term") {
    CHECK(evaluate(leaf.h[0], at) == Catch::Approx(-0.12));
  }
  SECTION("rest state vanishes") {
    at["col:xdot"] = {0.0};
    CHECK(evaluate(leaf.h[0], at) == 0.0);
    CHECK(evaluate(leaf.energy.value, at) == 0.0);
  }
  SECTION("velocity gate opens only while approaching") {
    at["col:xdot"] = {1.0};
    CHECK(evaluate(leaf.energy.value, at) == 0.0);
    at["col:xdot"] = {-1.0};
    CHECK(evaluate(leaf.energy.value, at) == Catch::Approx(0.03));  // k/x^3 * 1 * 1
  }
  SECTION("task map normalizes by the radii sum") {
    // Straight arm: ee at (2, 0); obstacle 0.6 away with radii sum 0.3.
    Bindings map_at{{"q", {0.0, 0.0}}, {"qdot", {0.0, 0.0}}, {"obst0", {2.0, 0.6}},
                    {"obst0_r", {0.2}}};
    CHECK(evaluate(leaf.map.phi[0], map_at) == Catch::Approx(1.0).epsilon(1e-6));
    map_at["obst0"] = {2.0, 0.0};
    CHECK(evaluate(leaf.map.phi[0], map_at) == Catch::Approx(-1.0).epsilon(1e-5));
  }
}

TEST_CASE("self-collision leaf mirrors the collision construction") {
  SymbolTable table;
  VectorExpr q = table.input_group("q", 3);
  VectorExpr qdot = table.input_group("qdot", 3);
  AvoidanceGains gains{table.input_scalar("k_geo_self"), table.input_scalar("beta_geo_self"),
                       table.input_scalar("k_fin_self"), table.input_scalar("beta_fin_self"),
                       {}};
  RobotModel robot;
  robot.name = "planar3";
  robot.link_lengths = {0.5, 0.5, 0.5};
  robot.joint_limits = {{-3.0, 3.0}, {-3.0, 3.0}, {-3.0, 3.0}};
  robot.sphere_radii = {0.1, 0.1, 0.1};
  robot.self_collision_pairs = {{1, 3}};
  robot.velocity_limit = 4.0;

  SECTION("undeclared pair is rejected") {
    RobotModel none = robot;
    none.self_collision_pairs = {};
    CHECK_THROWS_AS(self_collision_leaf(table, none, 1, 3, q, qdot, gains),
                    ConstructionError);
  }
  SECTION("map is symmetric in the pair and h matches the collision form") {
    LeafSpec leaf = self_collision_leaf(table, robot, 1, 3, q, qdot, gains);
    // Folded flat: link1 at (0.5, 0), link3 at (1.5, 0), distance 1, radii 0.2.
    Bindings at{{"q", {0.0, 0.0, 0.0}}, {"qdot", {0.0, 0.0, 0.0}}};
    CHECK(evaluate(leaf.map.phi[0], at) == Catch::Approx(1.0 / 0.2 - 1.0).epsilon(1e-6));

    Bindings leaf_at{{"self_1_3:x", {1.0}},
                     {"self_1_3:xdot", {2.0}},
                     {"k_geo_self", {0.03}},
                     {"beta_geo_self", {3}},
                     {"k_fin_self", {0.03}},
                     {"beta_fin_self", {3}}};
    CHECK(evaluate(leaf.h[0], leaf_at) == Catch::Approx(-0.12));
    leaf_at["self_1_3:xdot"] = {1.0};
    CHECK(evaluate(leaf.energy.value, leaf_at) == 0.0);
  }
}

TEST_CASE("joint limit leaves") {
  LeafFixture fx;
  RobotModel robot = two_link_robot();
  robot.joint_limits = {{-1.0, 1.0}, {-1.0, 1.0}};
  auto leaves = limit_leaves(fx.table, robot, fx.q, fx.qdot, fx.gains);
  REQUIRE(leaves.size() == 4);

  SECTION("mid-range distance is one on both sides") {
    Bindings at{{"q", {0.0, 0.0}}, {"qdot", {0.0, 0.0}}};
    CHECK(evaluate(leaves[0].map.phi[0], at) == 1.0);  // lower, joint 0
    CHECK(evaluate(leaves[1].map.phi[0], at) == 1.0);  // upper, joint 0
  }
  SECTION("upper limit map has a sign-flipped Jacobian row") {
    Bindings at{{"q", {0.3, -0.2}}, {"qdot", {0.0, 0.0}}};
    CHECK(evaluate(leaves[1].map.J(0, 0), at) == -1.0);
    CHECK(evaluate(leaves[1].map.J(0, 1), at) == 0.0);
    CHECK(evaluate(leaves[0].map.J(0, 0), at) == 1.0);
  }
  SECTION("geometry closed form") {
    Bindings at{{"limit_lo_0:x", {0.5}}, {"limit_lo_0:xdot", {-1.0}}, {"k_geo", {0.3}},
                {"beta_geo", {2}},       {"k_fin", {0.05}},           {"beta_fin", {3}}};
    CHECK(evaluate(leaves[0].h[0], at) == Catch::Approx(-1.2));
  }
  SECTION("inverted limits are rejected") {
    RobotModel bad = robot;
    bad.joint_limits[0] = {1.0, -1.0};
    SymbolTable t;
    LeafFixture fx2;
    CHECK_THROWS_AS(limit_leaves(fx2.table, bad, fx2.q, fx2.qdot, fx2.gains),
                    ConstructionError);
  }
}

TEST_CASE("every avoidance leaf is homogeneous of degree 2 in the velocity") {
  LeafFixture fx;
  VectorExpr obst = fx.table.input_group("obst0", 2);
  Expr obst_r = fx.table.input_scalar("obst0_r");
  RobotModel robot = two_link_robot();
  robot.joint_limits = {{-2.0, 2.0}, {-2.0, 2.0}};

  std::vector<LeafSpec> leaves;
  leaves.push_back(collision_leaf(fx.table, "col", fk_expression(robot, fx.q, 2), 0.1, obst,
                                  obst_r, fx.q, fx.qdot, fx.gains, {}));
  for (auto& l : limit_leaves(fx.table, robot, fx.q, fx.qdot, fx.gains))
    leaves.push_back(std::move(l));

  Rng rng(0x5eed0020);
  for (const auto& leaf : leaves) {
    const std::string gx = leaf.name + ":x", gv = leaf.name + ":xdot";
    for (int i = 0; i < 50; ++i) {
      Bindings at{{gx, {rng.uniform(0.05, 3.0)}},
                  {gv, {rng.uniform(-2.0, 2.0)}},
                  {"k_geo", {rng.uniform(0.01, 1.0)}},
                  {"beta_geo", {static_cast<double>(rng.uniform_int(1, 5))}},
                  {"k_fin", {rng.uniform(0.01, 1.0)}},
                  {"beta_fin", {static_cast<double>(rng.uniform_int(1, 5))}}};
      const double base = evaluate(leaf.h[0], at);
      for (double alpha : {0.5, 2.0, 7.0}) {
        Bindings scaled = at;
        scaled[gv][0] *= alpha;
        const double h_scaled = evaluate(leaf.h[0], scaled);
        REQUIRE(std::abs(h_scaled - alpha * alpha * base) <=
                1e-9 * std::abs(alpha * alpha * base));
        const double le_base = evaluate(leaf.energy.value, at);
        const double le_scaled = evaluate(leaf.energy.value, scaled);
        REQUIRE(std::abs(le_scaled - alpha * alpha * le_base) <=
                1e-9 * std::max(1e-300, std::abs(alpha * alpha * le_base)));
      }
    }
  }
}

TEST_CASE("Finsler energies are nonnegative and vanish only with the gate or velocity") {
  LeafFixture fx;
  VectorExpr obst = fx.table.input_group("obst0", 2);
  Expr obst_r = fx.table.input_scalar("obst0_r");
  RobotModel robot = two_link_robot();
  LeafSpec leaf = collision_leaf(fx.table, "col", fk_expression(robot, fx.q, 2), 0.1, obst,
                                 obst_r, fx.q, fx.qdot, fx.gains, {});

  Rng rng(0x5eed0021);
  for (int i = 0; i < 200; ++i) {
    const double xdot = rng.uniform(-2.0, 2.0);
    Bindings at{{"col:x", {rng.uniform(0.05, 3.0)}},
                {"col:xdot", {xdot}},
                {"k_geo", {0.1}},
                {"beta_geo", {3}},
                {"k_fin", {rng.uniform(0.01, 1.0)}},
                {"beta_fin", {static_cast<double>(rng.uniform_int(1, 5))}}};
    const double le = evaluate(leaf.energy.value, at);
    REQUIRE(le >= 0.0);
    REQUIRE((le == 0.0) == (xdot >= 0.0));
    // Metric of the energy: nonnegative for a 1-D leaf.
    const double m = evaluate(leaf.energy.M(0, 0), at);
    REQUIRE(m >= 0.0);
  }
}

TEST_CASE("attractor potential") {
  SymbolTable table;
  VectorExpr q = table.input_group("q", 2);
  VectorExpr qdot = table.input_group("qdot", 2);
  VectorExpr goal = table.input_group("goal", 2);
  Expr k_attr = table.input_scalar("k_attractor");
  RobotModel robot = two_link_robot();
  AttractorLeaf leaf =
      attractor_leaf(table, fk_expression(robot, q, 2), goal, q, qdot, k_attr);

  const double k = 5.0;
  auto grad_at = [&](double x, double y) {
    Bindings at{{"goal:x", {x, y}}, {"k_attractor", {k}}};
    return Eigen::Vector2d(evaluate(leaf.grad[0], at), evaluate(leaf.grad[1], at));
  };

  SECTION("gradient vanishes at the goal") {
    CHECK(grad_at(0.0, 0.0).norm() == 0.0);
  }
  SECTION("far-field slope saturates at the gain") {
    CHECK(grad_at(3.0, 0.0).norm() == Catch::Approx(k).epsilon(1e-6));
    CHECK(grad_at(0.0, -2.5).norm() == Catch::Approx(k).epsilon(1e-6));
  }
  SECTION("potential is monotone in the distance") {
    double prev = -1.0;
    for (int i = 0; i <= 60; ++i) {
      const double r = 0.02 * static_cast<double>(i);
      Bindings at{{"goal:x", {r, 0.0}}, {"k_attractor", {k}}};
      const double psi = evaluate(leaf.psi, at);
      CHECK(psi > prev);
      prev = psi;
    }
  }
}

TEST_CASE("base inertia energy") {
  SymbolTable table;
  VectorExpr q = table.input_group("q", 2);
  VectorExpr qdot = table.input_group("qdot", 2);
  Expr m_base = table.input_scalar("m_base");
  Lagrangian L = base_inertia_energy(q, qdot, m_base);
  Spec s = euler_lagrange(L);

  Bindings at{{"q", {0.4, -0.8}}, {"qdot", {1.0, 2.0}}, {"m_base", {0.2}}};
  CHECK(evaluate(s.M(0, 0), at) == Catch::Approx(0.2));
  CHECK(evaluate(s.M(1, 1), at) == Catch::Approx(0.2));
  CHECK(evaluate(s.M(0, 1), at) == 0.0);
  CHECK(evaluate(s.f[0], at) == 0.0);
  CHECK(evaluate(s.f[1], at) == 0.0);
  at["m_base"] = {1.0};
  CHECK(evaluate(s.M(0, 0), at) == 1.0);
}
