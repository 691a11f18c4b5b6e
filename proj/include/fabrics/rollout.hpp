#pragma once

#include <charconv>
#include <functional>
#include <limits>
#include <ostream>
#include <vector>

#include "fabrics/planner.hpp"

namespace fabrics {

enum class Termination { Completed, Collided, NonFinite };

inline const char* name_of(Termination t) {
  switch (t) {
    case Termination::Completed: return "completed";
    case Termination::Collided: return "collided";
    case Termination::NonFinite: return "nonfinite";
  }
  return "?";
}

struct TrajectoryStep {
  Eigen::VectorXd q;
  Eigen::VectorXd qd;
  Eigen::VectorXd qdd;
  Eigen::Vector2d ee;
  double min_obstacle_distance = std::numeric_limits<double>::infinity();
};

struct TrajectoryLog {
  std::vector<TrajectoryStep> steps;
  Termination termination = Termination::Completed;
  int termination_step = 0;
};

using AccelerationPolicy =
    std::function<Eigen::VectorXd(const Eigen::VectorXd& q, const Eigen::VectorXd& qd)>;

// Smallest surface distance between any link sphere and any obstacle; +inf
// when the scene has no obstacles.
inline double min_clearance(const RobotModel& robot, const Eigen::VectorXd& q,
                            const std::vector<Obstacle>& obstacles) {
  double best = std::numeric_limits<double>::infinity();
  for (int link = 1; link <= robot.dof(); ++link) {
    const Eigen::Vector2d p = fk_position(robot, q, link);
    for (const auto& o : obstacles) {
      const double d =
          (p - o.center).norm() - o.radius - robot.sphere_radii[static_cast<std::size_t>(link - 1)];
      best = std::min(best, d);
    }
  }
  return best;
}

// Kinematic rollout with semi-implicit Euler (qd then q), an infinity-norm
// velocity clamp, and early termination on penetration or non-finite state.
// Failures are recorded terminations, never exceptions.
inline TrajectoryLog rollout(const AccelerationPolicy& policy, const RobotModel& robot,
                             const Scenario& scenario) {
  scenario.validate(robot);
  TrajectoryLog log;
  Eigen::VectorXd q = scenario.q0;
  Eigen::VectorXd qd = scenario.qdot0;
  const double vmax = robot.velocity_limit;

  for (int step = 0; step <= scenario.steps; ++step) {
    TrajectoryStep entry;
    entry.q = q;
    entry.qd = qd;
    entry.qdd = Eigen::VectorXd::Zero(robot.dof());
    entry.ee = fk_position(robot, q, robot.dof());
    entry.min_obstacle_distance = min_clearance(robot, q, scenario.obstacles);

    if (entry.min_obstacle_distance <= 0.0) {
      log.steps.push_back(std::move(entry));
      log.termination = Termination::Collided;
      log.termination_step = step;
      return log;
    }

    bool ok = true;
    Eigen::VectorXd qdd;
    try {
      qdd = policy(q, qd);
      ok = qdd.size() == robot.dof() && qdd.allFinite();
    } catch (const EvalError&) {
      ok = false;
    }
    if (!ok) {
      log.steps.push_back(std::move(entry));
      log.termination = Termination::NonFinite;
      log.termination_step = step;
      return log;
    }
    entry.qdd = qdd;
    log.steps.push_back(std::move(entry));
    if (step == scenario.steps) break;

    qd += scenario.dt * qdd;
    for (int i = 0; i < qd.size(); ++i) qd(i) = std::clamp(qd(i), -vmax, vmax);
    q += scenario.dt * qd;
    if (!q.allFinite() || !qd.allFinite()) {
      log.termination = Termination::NonFinite;
      log.termination_step = step + 1;
      return log;
    }
  }
  log.termination = Termination::Completed;
  log.termination_step = scenario.steps;
  return log;
}

inline TrajectoryLog rollout(const CompiledPlanner& planner, const Scenario& scenario,
                             const ParamValues& params) {
  PlannerEvaluator eval(planner, SceneInputs::from(scenario), params);
  return rollout([&eval](const Eigen::VectorXd& q,
                         const Eigen::VectorXd& qd) { return eval.acceleration(q, qd); },
                 planner.robot(), scenario);
}

// ---------------------------------------------------------------------------
// CSV export

namespace detail {

inline void append_double(std::string& out, double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, ptr);
}

}  // namespace detail

// Columns: step, q*, qd*, ee_x, ee_y, min_dist.
inline void write_csv(const TrajectoryLog& log, int dof, std::ostream& os) {
  std::string header = "step";
  for (int i = 0; i < dof; ++i) header += ",q" + std::to_string(i);
  for (int i = 0; i < dof; ++i) header += ",qd" + std::to_string(i);
  header += ",ee_x,ee_y,min_dist\n";
  os << header;
  for (std::size_t idx = 0; idx < log.steps.size(); ++idx) {
    const auto& s = log.steps[idx];
    std::string line = std::to_string(idx);
    for (int i = 0; i < dof; ++i) {
      line += ',';
      detail::append_double(line, s.q(i));
    }
    for (int i = 0; i < dof; ++i) {
      line += ',';
      detail::append_double(line, s.qd(i));
    }
    line += ',';
    detail::append_double(line, s.ee.x());
    line += ',';
    detail::append_double(line, s.ee.y());
    line += ',';
    detail::append_double(line, s.min_obstacle_distance);
    line += '\n';
    os << line;
  }
}

}  // namespace fabrics
