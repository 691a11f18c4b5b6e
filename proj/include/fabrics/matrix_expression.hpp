#pragma once

#include <string>
#include <vector>

#include "fabrics/expression.hpp"

namespace fabrics {

class VectorExpr {
 public:
  VectorExpr() = default;
  explicit VectorExpr(int dim) : e_(static_cast<std::size_t>(dim)) {}
  explicit VectorExpr(std::vector<Expr> entries) : e_(std::move(entries)) {}

  static VectorExpr zeros(int dim) {
    VectorExpr v(dim);
    for (auto& e : v.e_) e = Expr::constant(0.0);
    return v;
  }

  int dim() const { return static_cast<int>(e_.size()); }
  Expr& operator[](int i) { return e_[static_cast<std::size_t>(i)]; }
  const Expr& operator[](int i) const { return e_[static_cast<std::size_t>(i)]; }
  const std::vector<Expr>& entries() const { return e_; }

 private:
  std::vector<Expr> e_;
};

class MatrixExpr {
 public:
  MatrixExpr() = default;
  MatrixExpr(int rows, int cols)
      : rows_(rows), cols_(cols), e_(static_cast<std::size_t>(rows * cols)) {}

  static MatrixExpr zeros(int rows, int cols) {
    MatrixExpr m(rows, cols);
    for (auto& e : m.e_) e = Expr::constant(0.0);
    return m;
  }

  static MatrixExpr identity(int n) {
    MatrixExpr m = zeros(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = Expr::constant(1.0);
    return m;
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }

  Expr& operator()(int r, int c) { return e_[static_cast<std::size_t>(r * cols_ + c)]; }
  const Expr& operator()(int r, int c) const {
    return e_[static_cast<std::size_t>(r * cols_ + c)];
  }
  const std::vector<Expr>& entries() const { return e_; }

 private:
  int rows_ = 0, cols_ = 0;
  std::vector<Expr> e_;
};

inline void require_same_dim(const VectorExpr& a, const VectorExpr& b, const char* what) {
  if (a.dim() != b.dim())
    throw ShapeError(std::string(what) + ": dimension mismatch " + std::to_string(a.dim()) +
                     " vs " + std::to_string(b.dim()));
}

inline VectorExpr operator+(const VectorExpr& a, const VectorExpr& b) {
  require_same_dim(a, b, "vector add");
  VectorExpr out(a.dim());
  for (int i = 0; i < a.dim(); ++i) out[i] = a[i] + b[i];
  return out;
}

inline VectorExpr operator-(const VectorExpr& a, const VectorExpr& b) {
  require_same_dim(a, b, "vector sub");
  VectorExpr out(a.dim());
  for (int i = 0; i < a.dim(); ++i) out[i] = a[i] - b[i];
  return out;
}

inline VectorExpr operator*(const Expr& s, const VectorExpr& v) {
  VectorExpr out(v.dim());
  for (int i = 0; i < v.dim(); ++i) out[i] = s * v[i];
  return out;
}

inline VectorExpr operator-(const VectorExpr& v) {
  VectorExpr out(v.dim());
  for (int i = 0; i < v.dim(); ++i) out[i] = -v[i];
  return out;
}

inline Expr dot(const VectorExpr& a, const VectorExpr& b) {
  require_same_dim(a, b, "dot");
  Expr acc = Expr::constant(0.0);
  for (int i = 0; i < a.dim(); ++i) acc = acc + a[i] * b[i];
  return acc;
}

// Euclidean norm kept differentiable at the origin by a small bias.
inline constexpr double kNormEpsilon = 1e-12;

inline Expr norm(const VectorExpr& v) { return sqrt(dot(v, v) + kNormEpsilon); }

inline MatrixExpr operator+(const MatrixExpr& a, const MatrixExpr& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeError("matrix add: shape mismatch");
  MatrixExpr out(a.rows(), a.cols());
  for (int r = 0; r < a.rows(); ++r)
    for (int c = 0; c < a.cols(); ++c) out(r, c) = a(r, c) + b(r, c);
  return out;
}

inline MatrixExpr operator*(const Expr& s, const MatrixExpr& m) {
  MatrixExpr out(m.rows(), m.cols());
  for (int r = 0; r < m.rows(); ++r)
    for (int c = 0; c < m.cols(); ++c) out(r, c) = s * m(r, c);
  return out;
}

inline VectorExpr operator*(const MatrixExpr& m, const VectorExpr& v) {
  if (m.cols() != v.dim()) throw ShapeError("matvec: shape mismatch");
  VectorExpr out(m.rows());
  for (int r = 0; r < m.rows(); ++r) {
    Expr acc = Expr::constant(0.0);
    for (int c = 0; c < m.cols(); ++c) acc = acc + m(r, c) * v[c];
    out[r] = acc;
  }
  return out;
}

inline MatrixExpr operator*(const MatrixExpr& a, const MatrixExpr& b) {
  if (a.cols() != b.rows()) throw ShapeError("matmul: shape mismatch");
  MatrixExpr out(a.rows(), b.cols());
  for (int r = 0; r < a.rows(); ++r)
    for (int c = 0; c < b.cols(); ++c) {
      Expr acc = Expr::constant(0.0);
      for (int k = 0; k < a.cols(); ++k) acc = acc + a(r, k) * b(k, c);
      out(r, c) = acc;
    }
  return out;
}

inline MatrixExpr transpose(const MatrixExpr& m) {
  MatrixExpr out(m.cols(), m.rows());
  for (int r = 0; r < m.rows(); ++r)
    for (int c = 0; c < m.cols(); ++c) out(c, r) = m(r, c);
  return out;
}

// J^T M J with M symmetric, built so that the (i,j) and (j,i) result
// entries are the same node.
inline MatrixExpr pullback_quadratic(const MatrixExpr& J, const MatrixExpr& M) {
  if (M.rows() != M.cols() || M.rows() != J.rows())
    throw ShapeError("pullback_quadratic: shape mismatch");
  const int n = J.cols();
  MatrixExpr out(n, n);
  MatrixExpr MJ = M * J;  // m x n
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      Expr acc = Expr::constant(0.0);
      for (int k = 0; k < M.rows(); ++k) acc = acc + J(k, i) * MJ(k, j);
      out(i, j) = acc;
      out(j, i) = acc;
    }
  return out;
}

// Entrywise sum that preserves the shared-node symmetry of its operands.
inline MatrixExpr add_symmetric(const MatrixExpr& a, const MatrixExpr& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols() || a.rows() != a.cols())
    throw ShapeError("add_symmetric: shape mismatch");
  MatrixExpr out(a.rows(), a.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = i; j < a.cols(); ++j) {
      Expr s = a(i, j) + b(i, j);
      out(i, j) = s;
      out(j, i) = s;
    }
  return out;
}

inline VectorExpr substitute(Substitution& sub, const VectorExpr& v) {
  VectorExpr out(v.dim());
  for (int i = 0; i < v.dim(); ++i) out[i] = sub.apply(v[i]);
  return out;
}

inline MatrixExpr substitute(Substitution& sub, const MatrixExpr& m) {
  MatrixExpr out(m.rows(), m.cols());
  for (int r = 0; r < m.rows(); ++r)
    for (int c = 0; c < m.cols(); ++c) out(r, c) = sub.apply(m(r, c));
  return out;
}

// ---------------------------------------------------------------------------
// Input-group declarations

// Declares named input groups for one expression-building context and hands
// out their entry nodes. Group names are unique within a table.
class SymbolTable {
 public:
  VectorExpr input_group(const std::string& name, int dim) {
    if (dim < 1) throw ConstructionError("input group '" + name + "': dim must be >= 1");
    for (const auto& g : groups_)
      if (g.name == name)
        throw ConstructionError("input group '" + name + "' already declared");
    groups_.push_back({name, dim});
    VectorExpr v(dim);
    for (int i = 0; i < dim; ++i) v[i] = Expr::input(name, i);
    return v;
  }

  Expr input_scalar(const std::string& name) { return input_group(name, 1)[0]; }

  const std::vector<InputGroupSpec>& groups() const { return groups_; }

  const InputGroupSpec* find(std::string_view name) const {
    for (const auto& g : groups_)
      if (g.name == name) return &g;
    return nullptr;
  }

 private:
  std::vector<InputGroupSpec> groups_;
};

// Jacobian of a vector expression with respect to a vector of input nodes.
inline MatrixExpr jacobian(const VectorExpr& v, const VectorExpr& q, Differentiator& diff) {
  MatrixExpr out(v.dim(), q.dim());
  for (int i = 0; i < v.dim(); ++i)
    for (int j = 0; j < q.dim(); ++j) out(i, j) = diff.d(v[i], q[j]);
  return out;
}

inline MatrixExpr jacobian(const VectorExpr& v, const VectorExpr& q) {
  Differentiator diff;
  return jacobian(v, q, diff);
}

inline VectorExpr gradient(const Expr& e, const VectorExpr& q, Differentiator& diff) {
  VectorExpr out(q.dim());
  for (int j = 0; j < q.dim(); ++j) out[j] = diff.d(e, q[j]);
  return out;
}

}  // namespace fabrics
