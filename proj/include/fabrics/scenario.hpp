#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fabrics/rng.hpp"
#include "fabrics/robot.hpp"

namespace fabrics {

struct Obstacle {
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  double radius = 0.0;
};

struct Scenario {
  std::string robot;
  Eigen::VectorXd q0;
  Eigen::VectorXd qdot0;
  std::vector<Obstacle> obstacles;
  Eigen::Vector2d goal = Eigen::Vector2d::Zero();
  int steps = 0;
  double dt = 0.01;
  std::uint64_t seed = 0;

  void validate(const RobotModel& model) const {
    if (q0.size() != model.dof()) throw ConstructionError("scenario: q0 size != robot dof");
    if (qdot0.size() != model.dof())
      throw ConstructionError("scenario: qdot0 size != robot dof");
    for (int i = 0; i < model.dof(); ++i) {
      const auto& jl = model.joint_limits[static_cast<std::size_t>(i)];
      if (q0(i) < jl.lower || q0(i) > jl.upper)
        throw ConstructionError("scenario: q0[" + std::to_string(i) + "] outside joint limits");
    }
    for (const auto& o : obstacles) {
      if (o.radius <= 0.0) throw ConstructionError("scenario: obstacle radius must be > 0");
      if ((o.center - goal).norm() <= o.radius)
        throw ConstructionError("scenario: goal has no clearance from an obstacle");
    }
    if (!(dt > 0.0 && dt <= 0.05)) throw ConstructionError("scenario: dt must be in (0, 0.05]");
    if (steps < 1) throw ConstructionError("scenario: steps must be >= 1");
  }
};

struct TestScenarioOptions {
  double obstacle_jitter = 0.1;  // uniform per-axis jitter, meters
  double goal_jitter = 0.1;
  double goal_margin = 0.05;     // required clearance between goal and obstacle surfaces
  int max_attempts = 200;
};

// Seeded randomized variation of a base scenario: obstacles and goal are
// jittered, rejection-sampled so the goal stays reachable and collision-free
// and the start pose does not begin in contact.
inline Scenario make_test_scenario(const Scenario& base, const RobotModel& robot,
                                   std::uint64_t seed, const TestScenarioOptions& opt = {}) {
  Rng rng(seed);
  const double reach = robot.total_reach();
  for (int attempt = 0; attempt < opt.max_attempts; ++attempt) {
    Scenario out = base;
    out.seed = seed;
    for (auto& o : out.obstacles) {
      o.center.x() += rng.uniform(-opt.obstacle_jitter, opt.obstacle_jitter);
      o.center.y() += rng.uniform(-opt.obstacle_jitter, opt.obstacle_jitter);
    }
    out.goal.x() += rng.uniform(-opt.goal_jitter, opt.goal_jitter);
    out.goal.y() += rng.uniform(-opt.goal_jitter, opt.goal_jitter);

    const double goal_dist = out.goal.norm();
    if (goal_dist > 0.95 * reach || goal_dist < 0.1) continue;
    bool ok = true;
    for (const auto& o : out.obstacles)
      if ((o.center - out.goal).norm() <= o.radius + opt.goal_margin) ok = false;
    for (int link = 1; link <= robot.dof() && ok; ++link) {
      const Eigen::Vector2d p = fk_position(robot, out.q0, link);
      for (const auto& o : out.obstacles)
        if ((o.center - p).norm() <=
            o.radius + robot.sphere_radii[static_cast<std::size_t>(link - 1)])
          ok = false;
    }
    if (ok) return out;
  }
  throw Error("make_test_scenario: no feasible variation found for seed " +
              std::to_string(seed));
}

}  // namespace fabrics
