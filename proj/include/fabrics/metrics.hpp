#pragma once

#include <cmath>

#include "fabrics/rollout.hpp"

namespace fabrics {

inline constexpr double kReachedTolerance = 0.05;

struct Metrics {
  double cost_distance = 0.0;
  double cost_path = 0.0;
  double cost_clearance = 0.0;
  bool reached = false;
};

struct Weights {
  double distance = 0.7;
  double path = 0.1;
  double clearance = 0.2;
};

// Trajectory costs over the end-effector path x_i, normalized by the initial
// goal distance:
//   cost_distance  = sum_{i=0..T} |x_i - goal| / |x_0 - goal|
//   cost_path      = sum_{i=1..T} |x_i - x_{i-1}| / |x_0 - goal|
//   cost_clearance = (1/T) sum_{i=1..T} min_j |x_i - o_j|   (obstacle centers)
// Trajectories that terminated early at step t* contribute their terminal
// summand values for the remaining steps, which keeps the objective finite
// and penalizes failures in proportion to how early they happened.
inline Metrics compute_metrics(const TrajectoryLog& log, const Scenario& scenario) {
  if (log.steps.empty()) throw Error("compute_metrics: empty trajectory log");
  const int T = scenario.steps;
  const Eigen::Vector2d goal = scenario.goal;
  const double initial_distance = (log.steps.front().ee - goal).norm();
  if (initial_distance == 0.0)
    throw Error("compute_metrics: start coincides with the goal (degenerate scenario)");

  auto center_clearance = [&](const Eigen::Vector2d& x) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& o : scenario.obstacles) best = std::min(best, (x - o.center).norm());
    return scenario.obstacles.empty() ? 0.0 : best;
  };

  const int last = static_cast<int>(log.steps.size()) - 1;
  double sum_distance = 0.0, sum_path = 0.0, sum_clearance = 0.0;
  for (int i = 0; i <= T; ++i) {
    const int idx = std::min(i, last);
    sum_distance += (log.steps[static_cast<std::size_t>(idx)].ee - goal).norm();
  }
  double frozen_path = 0.0, frozen_clear = 0.0;
  for (int i = 1; i <= T; ++i) {
    if (i <= last) {
      const Eigen::Vector2d& a = log.steps[static_cast<std::size_t>(i)].ee;
      const Eigen::Vector2d& b = log.steps[static_cast<std::size_t>(i - 1)].ee;
      frozen_path = (a - b).norm();
      frozen_clear = center_clearance(a);
    } else if (i == last + 1 && last == 0) {
      // Terminated before the first move: the path summand is zero and the
      // clearance freezes at the initial pose.
      frozen_path = 0.0;
      frozen_clear = center_clearance(log.steps.front().ee);
    }
    sum_path += frozen_path;
    sum_clearance += frozen_clear;
  }

  Metrics m;
  m.cost_distance = sum_distance / initial_distance;
  m.cost_path = sum_path / initial_distance;
  m.cost_clearance = sum_clearance / static_cast<double>(T);
  m.reached = (log.steps.back().ee - goal).norm() <= kReachedTolerance;
  return m;
}

inline double objective(const Metrics& m, const Weights& w) {
  return w.distance * m.cost_distance + w.path * m.cost_path + w.clearance * m.cost_clearance;
}

}  // namespace fabrics
