#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "fabrics/matrix_expression.hpp"
#include "fabrics/rng.hpp"

namespace testutil {

inline Eigen::MatrixXd eval_matrix(const fabrics::MatrixExpr& m, const fabrics::Bindings& at) {
  Eigen::MatrixXd out(m.rows(), m.cols());
  for (int r = 0; r < m.rows(); ++r)
    for (int c = 0; c < m.cols(); ++c) out(r, c) = fabrics::evaluate(m(r, c), at);
  return out;
}

inline Eigen::VectorXd eval_vector(const fabrics::VectorExpr& v, const fabrics::Bindings& at) {
  Eigen::VectorXd out(v.dim());
  for (int i = 0; i < v.dim(); ++i) out(i) = fabrics::evaluate(v[i], at);
  return out;
}

inline bool close_rel(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)});
}

// Structural equality of expression graphs (constants compare by value).
inline bool graph_equal(const fabrics::Expr& a, const fabrics::Expr& b) {
  using fabrics::ExprNode;
  const ExprNode &na = a.node(), &nb = b.node();
  if (&na == &nb) return true;
  if (na.kind != nb.kind) return false;
  switch (na.kind) {
    case ExprNode::Kind::Constant:
      return na.value == nb.value;
    case ExprNode::Kind::Input:
      return na.group == nb.group && na.index == nb.index;
    case ExprNode::Kind::Unary:
      return na.uop == nb.uop && graph_equal(fabrics::Expr(na.a), fabrics::Expr(nb.a));
    case ExprNode::Kind::Binary:
      return na.bop == nb.bop && graph_equal(fabrics::Expr(na.a), fabrics::Expr(nb.a)) &&
             graph_equal(fabrics::Expr(na.b), fabrics::Expr(nb.b));
  }
  return false;
}

// Central finite difference of e with respect to one entry of one bound group.
inline double finite_difference(const fabrics::Expr& e, const fabrics::Bindings& at,
                                const std::string& group, int index, double h = 1e-6) {
  fabrics::Bindings hi = at, lo = at;
  hi[group][static_cast<std::size_t>(index)] += h;
  lo[group][static_cast<std::size_t>(index)] -= h;
  return (fabrics::evaluate(e, hi) - fabrics::evaluate(e, lo)) / (2.0 * h);
}

// Random expressions over smooth operations only (no sign/abs). Arguments of
// log/sqrt/div/exp/pow are guarded or bounded so every point in [-2, 2]^n is
// in-domain AND higher derivatives stay moderate; a stiff composition would
// invalidate the central-difference oracle at h = 1e-6.
inline fabrics::Expr random_smooth_expr(fabrics::Rng& rng, const fabrics::VectorExpr& vars,
                                        int depth) {
  using fabrics::Expr;
  if (depth <= 0 || rng.uniform01() < 0.2) {
    if (rng.uniform01() < 0.3) return Expr::constant(rng.uniform(-1.5, 1.5));
    return vars[static_cast<int>(rng.uniform_int(0, vars.dim() - 1))];
  }
  const auto pick = rng.uniform_int(0, 10);
  Expr a = random_smooth_expr(rng, vars, depth - 1);
  switch (pick) {
    case 0: return a + random_smooth_expr(rng, vars, depth - 1);
    case 1: return a - random_smooth_expr(rng, vars, depth - 1);
    case 2: return a * sin(random_smooth_expr(rng, vars, depth - 1));
    case 3: {
      Expr b = random_smooth_expr(rng, vars, depth - 1);
      return a / (2.0 + b * b);
    }
    case 4: return tanh(a);
    case 5: return sin(a);
    case 6: return cos(a);
    case 7: return exp(0.8 * tanh(a));
    case 8: return log(1.0 + a * a);
    case 9: return sqrt(a * a + 0.5);
    default:
      return pow(0.5 + tanh(a) * tanh(a), static_cast<double>(rng.uniform_int(2, 3)));
  }
}

// Classic fixed-step RK4 over a flat state vector; used as the independent
// integration oracle for conservation checks.
inline void rk4_step(const std::function<std::vector<double>(const std::vector<double>&)>& deriv,
                     std::vector<double>& state, double dt) {
  const std::size_t n = state.size();
  std::vector<double> k1 = deriv(state);
  std::vector<double> tmp(n);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = state[i] + 0.5 * dt * k1[i];
  std::vector<double> k2 = deriv(tmp);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = state[i] + 0.5 * dt * k2[i];
  std::vector<double> k3 = deriv(tmp);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = state[i] + dt * k3[i];
  std::vector<double> k4 = deriv(tmp);
  for (std::size_t i = 0; i < n; ++i)
    state[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
}

}  // namespace testutil
