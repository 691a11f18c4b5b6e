#pragma once

#include <unordered_set>

#include "fabrics/matrix_expression.hpp"

namespace fabrics {

// Regularizer for the energization projector denominator; keeps the
// compiled tape branch-free at xdot = 0.
inline constexpr double kEnergizeEpsilon = 1e-9;

// Second-order system M(x, xdot) xddot + f(x, xdot) = 0 written as the pair
// (M, f) over its coordinate input groups. M is symmetric by construction:
// entries (i,j) and (j,i) are the same node.
struct Spec {
  MatrixExpr M;
  VectorExpr f;
  VectorExpr x;
  VectorExpr xdot;

  int dim() const { return f.dim(); }
};

// Map phi from configuration coordinates into a task space, with its
// Jacobian and the Jacobian's time derivative.
struct DifferentialMap {
  VectorExpr phi;       // m entries over q
  MatrixExpr J;         // m x n
  MatrixExpr Jdot;      // m x n over (q, qdot)
  VectorExpr q;
  VectorExpr qdot;

  int codomain_dim() const { return phi.dim(); }
  VectorExpr phi_dot() const { return J * qdot; }
};

// Energy Lagrangian with its derived equations of motion M xddot + f = 0.
struct Lagrangian {
  Expr value;
  MatrixExpr M;         // d^2 L / dxdot dxdot, mirrored-shared
  VectorExpr f;         // (d^2 L / dx dxdot)^T xdot - dL/dx
  VectorExpr x;
  VectorExpr xdot;
};

namespace detail {

inline void collect_inputs(const NodePtr& n, std::unordered_set<const ExprNode*>& visited,
                           std::unordered_set<const ExprNode*>& inputs) {
  if (!n || visited.contains(n.get())) return;
  visited.insert(n.get());
  if (n->kind == ExprNode::Kind::Input) inputs.insert(n.get());
  if (n->a) collect_inputs(n->a, visited, inputs);
  if (n->b) collect_inputs(n->b, visited, inputs);
}

}  // namespace detail

inline bool references_any(const VectorExpr& exprs, const VectorExpr& vars) {
  std::unordered_set<const ExprNode*> visited, inputs;
  for (const auto& e : exprs.entries()) detail::collect_inputs(e.ptr(), visited, inputs);
  for (const auto& v : vars.entries())
    if (inputs.contains(v.ptr().get())) return true;
  return false;
}

inline DifferentialMap make_map(const VectorExpr& phi, const VectorExpr& q,
                                const VectorExpr& qdot) {
  require_same_dim(q, qdot, "make_map coords");
  if (references_any(phi, qdot))
    throw ConstructionError("make_map: phi must not reference velocity inputs");
  Differentiator diff;
  MatrixExpr J = jacobian(phi, q, diff);
  MatrixExpr Jdot(J.rows(), J.cols());
  for (int i = 0; i < J.rows(); ++i)
    for (int j = 0; j < J.cols(); ++j) {
      Expr acc = Expr::constant(0.0);
      for (int k = 0; k < q.dim(); ++k) acc = acc + diff.d(J(i, j), q[k]) * qdot[k];
      Jdot(i, j) = acc;
    }
  return {phi, std::move(J), std::move(Jdot), q, qdot};
}

// Pullback of a spec through a differential map:
//   (M, f)_X -> (J^T M J, J^T (f + M Jdot qdot))_Q
// with M and f re-expressed in configuration coordinates first.
inline Spec pull(const DifferentialMap& map, const Spec& s) {
  if (map.codomain_dim() != s.dim())
    throw ShapeError("pull: map codomain dim " + std::to_string(map.codomain_dim()) +
                     " != spec dim " + std::to_string(s.dim()));
  Substitution sub;
  const VectorExpr task_vel = map.phi_dot();
  for (int i = 0; i < s.dim(); ++i) {
    sub.map(s.x[i], map.phi[i]);
    sub.map(s.xdot[i], task_vel[i]);
  }
  MatrixExpr M_q = substitute(sub, s.M);
  VectorExpr f_q = substitute(sub, s.f);

  MatrixExpr pulled_M = pullback_quadratic(map.J, M_q);
  const VectorExpr jdot_qdot = map.Jdot * map.qdot;
  const VectorExpr inner = f_q + M_q * jdot_qdot;
  VectorExpr pulled_f(map.q.dim());
  for (int i = 0; i < map.q.dim(); ++i) {
    Expr acc = Expr::constant(0.0);
    for (int k = 0; k < s.dim(); ++k) acc = acc + map.J(k, i) * inner[k];
    pulled_f[i] = acc;
  }
  return {std::move(pulled_M), std::move(pulled_f), map.q, map.qdot};
}

inline void require_same_coords(const Spec& a, const Spec& b) {
  if (a.dim() != b.dim()) throw ShapeError("spec sum: dimension mismatch");
  for (int i = 0; i < a.dim(); ++i)
    if (!a.x[i].same_node(b.x[i]) || !a.xdot[i].same_node(b.xdot[i]))
      throw ConstructionError("spec sum: operands use different coordinates");
}

inline Spec sum(const Spec& a, const Spec& b) {
  require_same_coords(a, b);
  return {add_symmetric(a.M, b.M), a.f + b.f, a.x, a.xdot};
}

inline Lagrangian make_lagrangian(const Expr& value, const VectorExpr& x,
                                  const VectorExpr& xdot) {
  require_same_dim(x, xdot, "lagrangian coords");
  const int m = x.dim();
  Differentiator diff;
  std::vector<Expr> dL_dxdot(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) dL_dxdot[static_cast<std::size_t>(i)] = diff.d(value, xdot[i]);

  MatrixExpr M(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = i; j < m; ++j) {
      Expr entry = diff.d(dL_dxdot[static_cast<std::size_t>(i)], xdot[j]);
      M(i, j) = entry;
      M(j, i) = entry;
    }

  VectorExpr f(m);
  for (int i = 0; i < m; ++i) {
    Expr acc = Expr::constant(0.0);
    for (int j = 0; j < m; ++j)
      acc = acc + diff.d(dL_dxdot[static_cast<std::size_t>(i)], x[j]) * xdot[j];
    f[i] = acc - diff.d(value, x[i]);
  }
  return {value, std::move(M), std::move(f), x, xdot};
}

inline Spec euler_lagrange(const Lagrangian& L) { return {L.M, L.f, L.x, L.xdot}; }

// Energy conserved by the Lagrangian's equations of motion,
// H = dL/dxdot . xdot - L.
inline Expr hamiltonian(const Lagrangian& L) {
  Differentiator diff;
  Expr acc = Expr::constant(0.0);
  for (int i = 0; i < L.xdot.dim(); ++i) acc = acc + diff.d(L.value, L.xdot[i]) * L.xdot[i];
  return acc - L.value;
}

enum class EnergizePath {
  Auto,       // Expanded everywhere; Projected is kept for cross-checking
  Expanded,   // P v written as v - M xdot (xdot . v) / (xdot^T M xdot + eps)
  Projected,  // P materialized via the adjugate inverse, m <= 3 only
};

namespace detail {

inline MatrixExpr symbolic_inverse(const MatrixExpr& M) {
  const int m = M.rows();
  if (m != M.cols() || m < 1 || m > 3)
    throw ShapeError("symbolic_inverse: only square matrices up to 3x3");
  MatrixExpr inv(m, m);
  if (m == 1) {
    inv(0, 0) = 1.0 / M(0, 0);
    return inv;
  }
  if (m == 2) {
    Expr det = M(0, 0) * M(1, 1) - M(0, 1) * M(1, 0);
    inv(0, 0) = M(1, 1) / det;
    inv(0, 1) = -M(0, 1) / det;
    inv(1, 0) = -M(1, 0) / det;
    inv(1, 1) = M(0, 0) / det;
    return inv;
  }
  auto cof = [&](int r, int c) {
    const int r0 = (r + 1) % 3, r1 = (r + 2) % 3;
    const int c0 = (c + 1) % 3, c1 = (c + 2) % 3;
    return M(r0, c0) * M(r1, c1) - M(r0, c1) * M(r1, c0);
  };
  Expr det = M(0, 0) * cof(0, 0) + M(0, 1) * cof(0, 1) + M(0, 2) * cof(0, 2);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) inv(r, c) = cof(c, r) / det;  // adjugate transpose
  return inv;
}

}  // namespace detail

// Energization of the geometry spec (I, h) by the energy Lagrangian Le:
// returns (M_Le, f_Le + P_Le [M_Le h - f_Le]).
//
// The default realization expands the projector application algebraically,
//   P v = v - M xdot (xdot . v) / (xdot^T M xdot + eps),
// which removes the matrix inverse and stays finite when a velocity gate
// closes M down to zero. The Projected path materializes
// P = M (M^-1 - xdot xdot^T / (xdot^T M xdot + eps)) with a closed-form
// inverse; it requires M nonsingular at the evaluation point.
inline Spec energize(const VectorExpr& h, const Lagrangian& Le,
                     EnergizePath path = EnergizePath::Auto) {
  if (h.dim() != Le.xdot.dim())
    throw ShapeError("energize: geometry and Lagrangian dimension mismatch");
  const VectorExpr v = Le.M * h - Le.f;
  const VectorExpr M_xdot = Le.M * Le.xdot;
  const Expr denom = dot(Le.xdot, M_xdot) + kEnergizeEpsilon;

  VectorExpr f_en(h.dim());
  if (path == EnergizePath::Projected) {
    MatrixExpr inv = detail::symbolic_inverse(Le.M);
    // P = M inv - (M xdot) xdot^T / denom
    MatrixExpr P(h.dim(), h.dim());
    const MatrixExpr Minv = Le.M * inv;
    for (int i = 0; i < h.dim(); ++i)
      for (int j = 0; j < h.dim(); ++j)
        P(i, j) = Minv(i, j) - M_xdot[i] * Le.xdot[j] / denom;
    const VectorExpr Pv = P * v;
    f_en = Le.f + Pv;
  } else {
    const Expr coef = dot(Le.xdot, v) / denom;
    for (int i = 0; i < h.dim(); ++i) f_en[i] = Le.f[i] + (v[i] - M_xdot[i] * coef);
  }
  return {Le.M, std::move(f_en), Le.x, Le.xdot};
}

}  // namespace fabrics
