#pragma once

#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fabrics/compiled_plan.hpp"
#include "fabrics/leaves.hpp"
#include "fabrics/scenario.hpp"
#include "fabrics/search_space.hpp"

namespace fabrics {

// Distance at which unused obstacle slots are parked.
inline constexpr double kDummyObstacleDistance = 1e3;

// ---------------------------------------------------------------------------
// Speed control pieces

// Goal-proximity switch: ~0 far from the goal, ~1 inside radius_shift.
inline double switch_beta(double goal_dist, double alpha_beta, double radius_shift) {
  return 0.5 * (std::tanh(-alpha_beta * (goal_dist - radius_shift)) + 1.0);
}

// Execution-energy switch blending the free and forced energization
// coefficients; v_ex sets the desired speed of motion.
inline double switch_eta(double ex_energy, double v_ex) {
  return 0.5 * (std::tanh(-0.5 * ex_energy * (1.0 - v_ex) - 0.5) + 1.0);
}

// Coefficient alpha such that qdd = a_raw + alpha qd keeps the energy of the
// Lagrangian (M, f) constant: alpha = -qd.(M a + f) / (qd.M qd + eps).
inline double energization_coefficient(const Eigen::VectorXd& a_raw, const Eigen::MatrixXd& M,
                                       const Eigen::VectorXd& f, const Eigen::VectorXd& qd) {
  return -qd.dot(M * a_raw + f) / (qd.dot(M * qd) + kEnergizeEpsilon);
}

// Convenience overload evaluating a symbolic Lagrangian at (q, qd).
inline double energization_coefficient(const Eigen::VectorXd& a_raw, const Lagrangian& L,
                                       const Bindings& at, const Eigen::VectorXd& qd) {
  const int m = L.xdot.dim();
  Eigen::MatrixXd M(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) M(i, j) = evaluate(L.M(i, j), at);
  Eigen::VectorXd f(m);
  for (int i = 0; i < m; ++i) f(i) = evaluate(L.f[i], at);
  return energization_coefficient(a_raw, M, f, qd);
}

// ---------------------------------------------------------------------------
// Assembly

inline const std::vector<std::string>& planner_parameter_names() {
  static const std::vector<std::string> names = {
      "m_base",        "k_geo_col",    "k_geo_limit",  "k_geo_self",  "k_fin_col",
      "k_fin_limit",   "k_fin_self",   "beta_geo_col", "beta_geo_limit", "beta_geo_self",
      "beta_fin_col",  "beta_fin_limit", "beta_fin_self", "alpha_beta", "b_min",
      "b_max",         "radius_shift", "v_ex",         "k_attractor"};
  return names;
}

// The symbolic tree of fabrics for one robot and obstacle budget: every
// (link, obstacle) collision leaf, declared self-collision leaves, 2n joint
// limit leaves, each energized by its Finsler energy and pulled into
// configuration space, summed with the base inertia; plus the pulled goal
// forcing term and the task-space goal residual used by speed control.
struct PlannerBlueprint {
  RobotModel robot;
  int obstacle_count = 0;
  SymbolTable table;
  VectorExpr q, qdot, goal;
  std::map<std::string, Expr> params;
  std::vector<LeafSpec> leaves;
  AttractorLeaf attractor;
  Spec root;
  VectorExpr forcing;     // d psi / d q
  VectorExpr ee;          // end-effector position over q
  Expr goal_distance;     // | fk_ee(q) - goal |
};

inline PlannerBlueprint assemble(const RobotModel& robot, int obstacle_count) {
  robot.validate();
  if (obstacle_count < 0) throw ConstructionError("assemble: obstacle_count must be >= 0");

  PlannerBlueprint bp;
  bp.robot = robot;
  bp.obstacle_count = obstacle_count;
  const int n = robot.dof();

  bp.q = bp.table.input_group("q", n);
  bp.qdot = bp.table.input_group("qdot", n);
  std::vector<VectorExpr> obstacle_pos;
  std::vector<Expr> obstacle_radius;
  for (int k = 0; k < obstacle_count; ++k)
    obstacle_pos.push_back(bp.table.input_group("obst" + std::to_string(k), 2));
  for (int k = 0; k < obstacle_count; ++k)
    obstacle_radius.push_back(bp.table.input_scalar("obst" + std::to_string(k) + "_r"));
  bp.goal = bp.table.input_group("goal", 2);
  for (const auto& name : planner_parameter_names())
    bp.params.emplace(name, bp.table.input_scalar(name));

  auto p = [&](const char* name) { return bp.params.at(name); };
  const AvoidanceGains col{p("k_geo_col"), p("beta_geo_col"), p("k_fin_col"), p("beta_fin_col"),
                           {"k_geo_col", "beta_geo_col", "k_fin_col", "beta_fin_col"}};
  const AvoidanceGains self{p("k_geo_self"), p("beta_geo_self"), p("k_fin_self"),
                            p("beta_fin_self"),
                            {"k_geo_self", "beta_geo_self", "k_fin_self", "beta_fin_self"}};
  const AvoidanceGains limit{p("k_geo_limit"), p("beta_geo_limit"), p("k_fin_limit"),
                             p("beta_fin_limit"),
                             {"k_geo_limit", "beta_geo_limit", "k_fin_limit", "beta_fin_limit"}};

  for (int link = 1; link <= n; ++link) {
    const VectorExpr fk = fk_expression(robot, bp.q, link);
    for (int k = 0; k < obstacle_count; ++k) {
      const std::string name = "col_l" + std::to_string(link) + "_o" + std::to_string(k);
      bp.leaves.push_back(collision_leaf(
          bp.table, name, fk, robot.sphere_radii[static_cast<std::size_t>(link - 1)],
          obstacle_pos[static_cast<std::size_t>(k)], obstacle_radius[static_cast<std::size_t>(k)],
          bp.q, bp.qdot, col,
          {"obst" + std::to_string(k), "obst" + std::to_string(k) + "_r"}));
    }
  }
  for (auto [i, j] : robot.self_collision_pairs)
    bp.leaves.push_back(self_collision_leaf(bp.table, robot, i, j, bp.q, bp.qdot, self));
  for (auto& leaf : limit_leaves(bp.table, robot, bp.q, bp.qdot, limit))
    bp.leaves.push_back(std::move(leaf));

  bp.root = euler_lagrange(base_inertia_energy(bp.q, bp.qdot, p("m_base")));
  for (const auto& leaf : bp.leaves)
    bp.root = sum(bp.root, pull(leaf.map, energize(leaf.h, leaf.energy)));

  bp.ee = fk_expression(robot, bp.q, n);
  bp.attractor = attractor_leaf(bp.table, bp.ee, bp.goal, bp.q, bp.qdot, p("k_attractor"));
  Substitution sub;
  for (int i = 0; i < 2; ++i) sub.map(bp.attractor.x[i], bp.attractor.map.phi[i]);
  const VectorExpr grad_q = substitute(sub, bp.attractor.grad);
  bp.forcing = VectorExpr(n);
  for (int i = 0; i < n; ++i) {
    Expr acc = Expr::constant(0.0);
    for (int k = 0; k < 2; ++k) acc = acc + bp.attractor.map.J(k, i) * grad_q[k];
    bp.forcing[i] = acc;
  }
  bp.goal_distance = norm(bp.attractor.map.phi);
  return bp;
}

// ---------------------------------------------------------------------------
// Compiled planner

struct PlannerMetadata {
  std::string robot_name;
  int dof = 0;
  int obstacle_count = 0;
  std::vector<std::string> parameter_order;
  std::vector<InputGroupSpec> input_layout;
  std::vector<std::string> leaf_names;
};

struct SceneInputs {
  std::vector<Obstacle> obstacles;
  Eigen::Vector2d goal = Eigen::Vector2d::Zero();

  static SceneInputs from(const Scenario& s) { return {s.obstacles, s.goal}; }
};

// Intermediate speed-control quantities, exposed for inspection.
struct SpeedControlTerms {
  double ex_energy = 0.0;
  double alpha_ex0 = 0.0;
  double alpha_ex_psi = 0.0;
  double alpha_ex = 0.0;
  double alpha_le = 0.0;
  double s_eta = 0.0;
  double s_beta = 0.0;
  double damping = 0.0;
  double goal_distance = 0.0;
};

class CompiledPlanner {
 public:
  CompiledPlanner() = default;
  CompiledPlanner(const PlannerBlueprint& bp, SearchSpace space)
      : robot_(bp.robot), space_(std::move(space)) {
    for (const auto& name : planner_parameter_names())
      if (!space_.find(name))
        throw ConstructionError("search space is missing parameter '" + name + "'");

    PlanBuilder builder;
    builder.add_output("M", bp.root.M);
    builder.add_output("f", bp.root.f);
    builder.add_output("grad_psi", bp.forcing);
    builder.add_output("ee", bp.ee);
    builder.add_output("goal_dist", bp.goal_distance);
    plan_ = builder.compile(bp.table.groups());

    meta_.robot_name = bp.robot.name;
    meta_.dof = bp.robot.dof();
    meta_.obstacle_count = bp.obstacle_count;
    meta_.parameter_order = planner_parameter_names();
    meta_.input_layout = plan_.input_layout();
    for (const auto& leaf : bp.leaves) meta_.leaf_names.push_back(leaf.name);
    meta_.leaf_names.push_back(bp.attractor.name);
  }

  const CompiledPlan& plan() const { return plan_; }
  const PlannerMetadata& metadata() const { return meta_; }
  const RobotModel& robot() const { return robot_; }
  const SearchSpace& space() const { return space_; }

 private:
  CompiledPlan plan_;
  PlannerMetadata meta_;
  RobotModel robot_;
  SearchSpace space_;
};

inline CompiledPlanner compile_planner(const PlannerBlueprint& bp, const SearchSpace& space) {
  return CompiledPlanner(bp, space);
}

// Owns the scratch state for one rollout stream: scene and parameters are
// validated and packed once, then every acceleration query only rewrites the
// configuration slots. Each concurrent rollout owns its evaluator.
class PlannerEvaluator {
 public:
  PlannerEvaluator(const CompiledPlanner& planner, const SceneInputs& scene,
                   const ParamValues& params)
      : planner_(&planner),
        inputs_(planner.plan().input_size(), 0.0),
        scratch_(planner.plan().scratch_size(), 0.0) {
    const auto& meta = planner.metadata();
    if (static_cast<int>(scene.obstacles.size()) > meta.obstacle_count)
      throw ConstructionError("scene has " + std::to_string(scene.obstacles.size()) +
                              " obstacles, planner was compiled for " +
                              std::to_string(meta.obstacle_count));
    planner.space().validate(params);

    const CompiledPlan& plan = planner.plan();
    for (int k = 0; k < meta.obstacle_count; ++k) {
      const bool live = k < static_cast<int>(scene.obstacles.size());
      const Obstacle dummy{{kDummyObstacleDistance, kDummyObstacleDistance}, 0.1};
      const Obstacle& o = live ? scene.obstacles[static_cast<std::size_t>(k)] : dummy;
      const int pos_off = plan.input_offset("obst" + std::to_string(k));
      inputs_[static_cast<std::size_t>(pos_off)] = o.center.x();
      inputs_[static_cast<std::size_t>(pos_off) + 1] = o.center.y();
      inputs_[static_cast<std::size_t>(plan.input_offset("obst" + std::to_string(k) + "_r"))] =
          o.radius;
    }
    const int goal_off = plan.input_offset("goal");
    inputs_[static_cast<std::size_t>(goal_off)] = scene.goal.x();
    inputs_[static_cast<std::size_t>(goal_off) + 1] = scene.goal.y();
    for (const auto& [name, value] : params)
      inputs_[static_cast<std::size_t>(plan.input_offset(name))] = value;

    m_base_ = params.at("m_base");
    alpha_beta_ = params.at("alpha_beta");
    b_min_ = params.at("b_min");
    b_max_ = params.at("b_max");
    radius_shift_ = params.at("radius_shift");
    v_ex_ = params.at("v_ex");

    const int n = meta.dof;
    q_off_ = plan.input_offset("q");
    qd_off_ = plan.input_offset("qdot");
    M_.resize(n, n);
    f_.resize(n);
    grad_.resize(n);
  }

  // qdd = -h2 - M^-1 dpsi/dq + alpha_ex qd - beta qd, with
  //   h2       = M^-1 (sum of pulled forcing terms),
  //   alpha_ex = s_eta alpha_ex0 + (1 - s_eta) alpha_ex_psi,
  //   beta     = s_beta B_max + B_min + max(0, alpha_ex - alpha_Le).
  Eigen::VectorXd acceleration(const Eigen::VectorXd& q, const Eigen::VectorXd& qd) {
    const int n = planner_->metadata().dof;
    if (q.size() != n || qd.size() != n)
      throw EvalError("acceleration: state dimension mismatch");
    for (int i = 0; i < n; ++i) {
      inputs_[static_cast<std::size_t>(q_off_ + i)] = q(i);
      inputs_[static_cast<std::size_t>(qd_off_ + i)] = qd(i);
    }
    const CompiledPlan& plan = planner_->plan();
    plan.eval(inputs_, scratch_);
    plan.read_output("M", scratch_, {M_.data(), static_cast<std::size_t>(n * n)});
    plan.read_output("f", scratch_, {f_.data(), static_cast<std::size_t>(n)});
    plan.read_output("grad_psi", scratch_, {grad_.data(), static_cast<std::size_t>(n)});
    terms_.goal_distance = plan.output_scalar("goal_dist", scratch_);

    // M is stored row-major by the tape but symmetric, so mapping into the
    // column-major matrix is safe.
    const auto ldlt = M_.ldlt();
    const Eigen::VectorXd h2 = ldlt.solve(f_);
    const Eigen::VectorXd u = ldlt.solve(grad_);

    const double qd_sq = qd.dot(qd);
    terms_.ex_energy = 0.5 * qd_sq;
    terms_.alpha_ex0 = qd.dot(h2) / (qd_sq + kEnergizeEpsilon);
    terms_.alpha_ex_psi = qd.dot(h2 + u) / (qd_sq + kEnergizeEpsilon);
    terms_.s_eta = switch_eta(terms_.ex_energy, v_ex_);
    terms_.alpha_ex = terms_.s_eta * terms_.alpha_ex0 + (1.0 - terms_.s_eta) * terms_.alpha_ex_psi;
    terms_.alpha_le = m_base_ * qd.dot(h2) / (m_base_ * qd_sq + kEnergizeEpsilon);
    terms_.s_beta = switch_beta(terms_.goal_distance, alpha_beta_, radius_shift_);
    terms_.damping = terms_.s_beta * b_max_ + b_min_ +
                     std::max(0.0, terms_.alpha_ex - terms_.alpha_le);

    Eigen::VectorXd qdd = -h2 - u + (terms_.alpha_ex - terms_.damping) * qd;
    if (!qdd.allFinite()) {
      std::string snapshot = "q = [";
      for (int i = 0; i < n; ++i) snapshot += (i ? ", " : "") + std::to_string(q(i));
      snapshot += "], qd = [";
      for (int i = 0; i < n; ++i) snapshot += (i ? ", " : "") + std::to_string(qd(i));
      snapshot += "]";
      throw EvalError("planner produced a non-finite acceleration at " + snapshot);
    }
    return qdd;
  }

  Eigen::Vector2d end_effector() const {
    Eigen::Vector2d ee;
    planner_->plan().read_output("ee", scratch_, {ee.data(), 2});
    return ee;
  }

  const SpeedControlTerms& terms() const { return terms_; }

 private:
  const CompiledPlanner* planner_;
  std::vector<double> inputs_;
  std::vector<double> scratch_;
  Eigen::MatrixXd M_;
  Eigen::VectorXd f_, grad_;
  SpeedControlTerms terms_;
  double m_base_ = 0.0, alpha_beta_ = 0.0, b_min_ = 0.0, b_max_ = 0.0, radius_shift_ = 0.0,
         v_ex_ = 0.0;
  int q_off_ = 0, qd_off_ = 0;
};

// One-shot convenience wrapper; validates the parameter set on every call.
inline Eigen::VectorXd compute_acceleration(const CompiledPlanner& planner,
                                            const Eigen::VectorXd& q, const Eigen::VectorXd& qd,
                                            const SceneInputs& scene, const ParamValues& params) {
  PlannerEvaluator eval(planner, scene, params);
  return eval.acceleration(q, qd);
}

}  // namespace fabrics
