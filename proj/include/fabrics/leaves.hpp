#pragma once

#include <string>
#include <vector>

#include "fabrics/robot.hpp"
#include "fabrics/spec_algebra.hpp"

namespace fabrics {

// Distances are clamped to this floor inside the 1/x^beta terms so that a
// penetrating state still evaluates to a finite (huge) repulsion instead of
// non-finite numbers; the simulator records the failure.
inline constexpr double kLeafDistanceFloor = 1e-4;

// Fixed sharpness of the attractor's soft-norm potential.
inline constexpr double kAttractorSharpness = 10.0;

// One avoidance component: a task map, a geometry forcing term h and a
// velocity-gated Finsler energy, all parameterized by runtime inputs.
struct LeafSpec {
  std::string name;
  DifferentialMap map;             // q -> x, 1-D task space
  VectorExpr h;                    // geometry over (x, xdot)
  Lagrangian energy;               // Finsler energy over (x, xdot)
  VectorExpr x;                    // leaf task coordinates
  VectorExpr xdot;
  std::vector<std::string> param_names;
  std::vector<std::string> scene_inputs;
};

// Geometry/energy gains for one avoidance family (collision, self-collision
// or joint limits), as runtime parameter inputs.
struct AvoidanceGains {
  Expr k_geo;
  Expr beta_geo;
  Expr k_fin;
  Expr beta_fin;
  std::vector<std::string> names;  // parameter identifiers, geo then fin
};

namespace detail {

// Shared construction for all avoidance leaves:
//   h(x, xdot)  = -k_geo / x^beta_geo * xdot^2
//   Le(x, xdot) =  k_fin / x^beta_fin * (-0.5 (sign(xdot) - 1)) * xdot^2
// with x floored inside the reciprocal terms.
inline LeafSpec make_avoidance_leaf(SymbolTable& table, const std::string& name,
                                    const VectorExpr& phi, const VectorExpr& q,
                                    const VectorExpr& qdot, const AvoidanceGains& gains,
                                    std::vector<std::string> scene_inputs) {
  if (phi.dim() != 1)
    throw ShapeError("avoidance leaf '" + name + "': task space must be 1-D");
  VectorExpr x = table.input_group(name + ":x", 1);
  VectorExpr xdot = table.input_group(name + ":xdot", 1);

  const Expr floored = max(x[0], kLeafDistanceFloor);
  const Expr vel_sq = xdot[0] * xdot[0];
  VectorExpr h(std::vector<Expr>{-gains.k_geo / pow(floored, gains.beta_geo) * vel_sq});

  const Expr gate = -0.5 * (sign(xdot[0]) - 1.0);
  const Expr le = gains.k_fin / pow(floored, gains.beta_fin) * gate * vel_sq;

  LeafSpec leaf;
  leaf.name = name;
  leaf.map = make_map(phi, q, qdot);
  leaf.h = std::move(h);
  leaf.energy = make_lagrangian(le, x, xdot);
  leaf.x = x;
  leaf.xdot = xdot;
  leaf.param_names = gains.names;
  leaf.scene_inputs = std::move(scene_inputs);
  return leaf;
}

}  // namespace detail

// Obstacle avoidance for one (robot link, obstacle slot) pair. The map is
// the sphere-to-sphere distance normalized by the radii sum:
//   phi = |fk(q) - x_obst| / (r_obst + r_link) - 1.
inline LeafSpec collision_leaf(SymbolTable& table, const std::string& name,
                               const VectorExpr& link_fk, double link_radius,
                               const VectorExpr& obstacle_pos, const Expr& obstacle_radius,
                               const VectorExpr& q, const VectorExpr& qdot,
                               const AvoidanceGains& gains,
                               std::vector<std::string> scene_inputs) {
  VectorExpr diff = link_fk - obstacle_pos;
  Expr phi = norm(diff) / (obstacle_radius + link_radius) - 1.0;
  return detail::make_avoidance_leaf(table, name, VectorExpr(std::vector<Expr>{phi}), q, qdot,
                                     gains, std::move(scene_inputs));
}

// Self-collision avoidance for a declared pair of links:
//   phi = |fk_i(q) - fk_j(q)| / (r_i + r_j) - 1.
inline LeafSpec self_collision_leaf(SymbolTable& table, const RobotModel& robot, int link_i,
                                    int link_j, const VectorExpr& q, const VectorExpr& qdot,
                                    const AvoidanceGains& gains) {
  bool declared = false;
  for (auto [a, b] : robot.self_collision_pairs)
    if ((a == link_i && b == link_j) || (a == link_j && b == link_i)) declared = true;
  if (!declared)
    throw ConstructionError("self_collision_leaf: pair (" + std::to_string(link_i) + ", " +
                            std::to_string(link_j) + ") not declared by robot '" + robot.name +
                            "'");
  VectorExpr diff = fk_expression(robot, q, link_i) - fk_expression(robot, q, link_j);
  const double radii = robot.sphere_radii[static_cast<std::size_t>(link_i - 1)] +
                       robot.sphere_radii[static_cast<std::size_t>(link_j - 1)];
  Expr phi = norm(diff) / radii - 1.0;
  const std::string name = "self_" + std::to_string(link_i) + "_" + std::to_string(link_j);
  return detail::make_avoidance_leaf(table, name, VectorExpr(std::vector<Expr>{phi}), q, qdot,
                                     gains, {});
}

// Two leaves per joint, one per limit:
//   phi_lower = q_i - q_min_i,   phi_upper = q_max_i - q_i.
inline std::vector<LeafSpec> limit_leaves(SymbolTable& table, const RobotModel& robot,
                                          const VectorExpr& q, const VectorExpr& qdot,
                                          const AvoidanceGains& gains) {
  robot.validate();
  std::vector<LeafSpec> leaves;
  for (int i = 0; i < robot.dof(); ++i) {
    const auto& jl = robot.joint_limits[static_cast<std::size_t>(i)];
    VectorExpr lower(std::vector<Expr>{q[i] - jl.lower});
    VectorExpr upper(std::vector<Expr>{jl.upper - q[i]});
    leaves.push_back(detail::make_avoidance_leaf(table, "limit_lo_" + std::to_string(i), lower,
                                                 q, qdot, gains, {}));
    leaves.push_back(detail::make_avoidance_leaf(table, "limit_hi_" + std::to_string(i), upper,
                                                 q, qdot, gains, {}));
  }
  return leaves;
}

// Goal attraction. The potential is a soft norm over the goal residual,
//   psi = k (|x| + (1/a) log(1 + exp(-2 a |x|))),  a = kAttractorSharpness,
// smooth at the goal with gradient magnitude saturating at k far away. Its
// metric contribution is folded into the base inertia, so the leaf carries
// only the potential and its task-space gradient.
struct AttractorLeaf {
  std::string name;
  DifferentialMap map;   // residual map x = fk(q) - goal
  Expr psi;              // over the task coords
  VectorExpr grad;       // d psi / d x over the task coords
  VectorExpr x;
  VectorExpr xdot;
  std::vector<std::string> param_names;
  std::vector<std::string> scene_inputs;
};

inline AttractorLeaf attractor_leaf(SymbolTable& table, const VectorExpr& ee_fk,
                                    const VectorExpr& goal, const VectorExpr& q,
                                    const VectorExpr& qdot, const Expr& k_attractor) {
  AttractorLeaf leaf;
  leaf.name = "goal";
  leaf.x = table.input_group("goal:x", 2);
  leaf.xdot = table.input_group("goal:xdot", 2);
  const Expr r = norm(leaf.x);
  leaf.psi = k_attractor *
             (r + (1.0 / kAttractorSharpness) * log(1.0 + exp(-2.0 * kAttractorSharpness * r)));
  Differentiator diff;
  leaf.grad = gradient(leaf.psi, leaf.x, diff);
  leaf.map = make_map(ee_fk - goal, q, qdot);
  leaf.param_names = {"k_attractor"};
  leaf.scene_inputs = {"goal"};
  return leaf;
}

// Root kinetic energy L = 0.5 m_base qdot . qdot; its Euler-Lagrange spec is
// (m_base I, 0).
inline Lagrangian base_inertia_energy(const VectorExpr& q, const VectorExpr& qdot,
                                      const Expr& m_base) {
  return make_lagrangian(0.5 * m_base * dot(qdot, qdot), q, qdot);
}

}  // namespace fabrics
