#pragma once

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "fabrics/matrix_expression.hpp"

namespace fabrics {

struct JointLimit {
  double lower = 0.0;
  double upper = 0.0;
};

// Planar serial chain. Each link carries one collision sphere centered at
// its distal joint; link indices are 1-based throughout.
struct RobotModel {
  std::string name;
  std::vector<double> link_lengths;
  std::vector<JointLimit> joint_limits;
  std::vector<double> sphere_radii;
  std::vector<std::pair<int, int>> self_collision_pairs;
  double velocity_limit = 1.0;

  int dof() const { return static_cast<int>(link_lengths.size()); }

  void validate() const {
    const int n = dof();
    if (n < 1) throw ConstructionError("robot '" + name + "': needs at least one link");
    if (static_cast<int>(joint_limits.size()) != n)
      throw ConstructionError("robot '" + name + "': joint_limits size != dof");
    if (static_cast<int>(sphere_radii.size()) != n)
      throw ConstructionError("robot '" + name + "': sphere_radii size != dof");
    for (double l : link_lengths)
      if (l <= 0.0) throw ConstructionError("robot '" + name + "': link lengths must be > 0");
    for (const auto& jl : joint_limits)
      if (!(jl.lower < jl.upper))
        throw ConstructionError("robot '" + name + "': joint limits must satisfy lower < upper");
    for (double r : sphere_radii)
      if (r <= 0.0) throw ConstructionError("robot '" + name + "': sphere radii must be > 0");
    for (auto [i, j] : self_collision_pairs) {
      if (i < 1 || j < 1 || i > n || j > n)
        throw ConstructionError("robot '" + name + "': self-collision link index out of range");
      if (std::abs(i - j) < 2)
        throw ConstructionError("robot '" + name + "': self-collision pair must have |i-j| >= 2");
    }
  }

  double total_reach() const {
    double sum = 0.0;
    for (double l : link_lengths) sum += l;
    return sum;
  }
};

// Position of the distal joint of `link` (1..n); link 0 is the base origin.
inline Eigen::Vector2d fk_position(const RobotModel& robot, const Eigen::VectorXd& q, int link) {
  if (link < 0 || link > robot.dof())
    throw ConstructionError("fk_position: link index out of range");
  Eigen::Vector2d p = Eigen::Vector2d::Zero();
  double angle = 0.0;
  for (int k = 0; k < link; ++k) {
    angle += q(k);
    p.x() += robot.link_lengths[static_cast<std::size_t>(k)] * std::cos(angle);
    p.y() += robot.link_lengths[static_cast<std::size_t>(k)] * std::sin(angle);
  }
  return p;
}

// Symbolic counterpart of fk_position over configuration inputs.
inline VectorExpr fk_expression(const RobotModel& robot, const VectorExpr& q, int link) {
  if (link < 1 || link > robot.dof())
    throw ConstructionError("fk_expression: link index out of range");
  Expr x = Expr::constant(0.0);
  Expr y = Expr::constant(0.0);
  Expr angle = Expr::constant(0.0);
  for (int k = 0; k < link; ++k) {
    angle = angle + q[k];
    x = x + robot.link_lengths[static_cast<std::size_t>(k)] * cos(angle);
    y = y + robot.link_lengths[static_cast<std::size_t>(k)] * sin(angle);
  }
  return VectorExpr(std::vector<Expr>{x, y});
}

}  // namespace fabrics
