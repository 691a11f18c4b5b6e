#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "fabrics/errors.hpp"

namespace fabrics {

enum class UnaryOp { Neg, Tanh, Exp, Log, Sqrt, Sign, Abs, Sin, Cos };
enum class BinaryOp { Add, Sub, Mul, Div, Pow };

class ExprNode;
using NodePtr = std::shared_ptr<const ExprNode>;

// One node of the symbolic DAG. Nodes are immutable; sharing is by
// shared_ptr and structural duplicates are merged at compile time.
class ExprNode {
 public:
  enum class Kind { Constant, Input, Unary, Binary };

  Kind kind;
  double value = 0.0;       // Constant
  std::string group;        // Input: owning input-group name
  int index = 0;            // Input: slot within the group
  UnaryOp uop{};
  BinaryOp bop{};
  NodePtr a, b;
  std::uint64_t id;         // creation serial, used in diagnostics

  static std::uint64_t next_id() {
    static std::atomic<std::uint64_t> counter{0};
    return counter.fetch_add(1, std::memory_order_relaxed);
  }
};

inline const char* name_of(UnaryOp op) {
  switch (op) {
    case UnaryOp::Neg: return "neg";
    case UnaryOp::Tanh: return "tanh";
    case UnaryOp::Exp: return "exp";
    case UnaryOp::Log: return "log";
    case UnaryOp::Sqrt: return "sqrt";
    case UnaryOp::Sign: return "sign";
    case UnaryOp::Abs: return "abs";
    case UnaryOp::Sin: return "sin";
    case UnaryOp::Cos: return "cos";
  }
  return "?";
}

inline const char* name_of(BinaryOp op) {
  switch (op) {
    case BinaryOp::Add: return "add";
    case BinaryOp::Sub: return "sub";
    case BinaryOp::Mul: return "mul";
    case BinaryOp::Div: return "div";
    case BinaryOp::Pow: return "pow";
  }
  return "?";
}

inline double apply_unary(UnaryOp op, double x) {
  switch (op) {
    case UnaryOp::Neg: return -x;
    case UnaryOp::Tanh: return std::tanh(x);
    case UnaryOp::Exp: return std::exp(x);
    case UnaryOp::Log: return std::log(x);
    case UnaryOp::Sqrt: return std::sqrt(x);
    case UnaryOp::Sign: return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
    case UnaryOp::Abs: return std::abs(x);
    case UnaryOp::Sin: return std::sin(x);
    case UnaryOp::Cos: return std::cos(x);
  }
  return 0.0;
}

inline double apply_binary(BinaryOp op, double x, double y) {
  switch (op) {
    case BinaryOp::Add: return x + y;
    case BinaryOp::Sub: return x - y;
    case BinaryOp::Mul: return x * y;
    case BinaryOp::Div: return x / y;
    case BinaryOp::Pow: return std::pow(x, y);
  }
  return 0.0;
}

// Value handle over a shared immutable node. Building an Expr applies
// constant folding and the 0/1 identities; nothing else is rewritten.
class Expr {
 public:
  Expr() = default;
  explicit Expr(NodePtr node) : node_(std::move(node)) {}

  static Expr constant(double v) {
    auto n = std::make_shared<ExprNode>();
    n->kind = ExprNode::Kind::Constant;
    n->value = v;
    n->id = ExprNode::next_id();
    return Expr(std::move(n));
  }

  static Expr input(std::string group, int index) {
    auto n = std::make_shared<ExprNode>();
    n->kind = ExprNode::Kind::Input;
    n->group = std::move(group);
    n->index = index;
    n->id = ExprNode::next_id();
    return Expr(std::move(n));
  }

  const ExprNode& node() const {
    if (!node_) throw ConstructionError("use of empty expression");
    return *node_;
  }
  const NodePtr& ptr() const { return node_; }
  bool valid() const { return node_ != nullptr; }

  bool is_constant() const { return node_ && node_->kind == ExprNode::Kind::Constant; }
  bool is_constant(double v) const { return is_constant() && node_->value == v; }
  bool is_input() const { return node_ && node_->kind == ExprNode::Kind::Input; }
  double constant_value() const { return node().value; }

  bool same_node(const Expr& other) const { return node_.get() == other.node_.get(); }

 private:
  NodePtr node_;
};

inline Expr make_unary(UnaryOp op, const Expr& a) {
  // Fold constants, except where folding would swallow a runtime domain
  // error (log/sqrt of a bad constant still errors at evaluation time).
  if (a.is_constant()) {
    const double x = a.constant_value();
    const bool foldable = !((op == UnaryOp::Log && x <= 0.0) || (op == UnaryOp::Sqrt && x < 0.0));
    if (foldable) return Expr::constant(apply_unary(op, x));
  }
  auto n = std::make_shared<ExprNode>();
  n->kind = ExprNode::Kind::Unary;
  n->uop = op;
  n->a = a.ptr();
  n->id = ExprNode::next_id();
  return Expr(std::move(n));
}

inline Expr make_binary(BinaryOp op, const Expr& a, const Expr& b) {
  if (a.is_constant() && b.is_constant())
    return Expr::constant(apply_binary(op, a.constant_value(), b.constant_value()));
  switch (op) {
    case BinaryOp::Add:
      if (a.is_constant(0.0)) return b;
      if (b.is_constant(0.0)) return a;
      break;
    case BinaryOp::Sub:
      if (b.is_constant(0.0)) return a;
      if (a.is_constant(0.0)) return make_unary(UnaryOp::Neg, b);
      break;
    case BinaryOp::Mul:
      if (a.is_constant(0.0) || b.is_constant(0.0)) return Expr::constant(0.0);
      if (a.is_constant(1.0)) return b;
      if (b.is_constant(1.0)) return a;
      break;
    case BinaryOp::Div:
      if (b.is_constant(1.0)) return a;
      break;
    case BinaryOp::Pow:
      if (b.is_constant(1.0)) return a;
      if (b.is_constant(0.0)) return Expr::constant(1.0);
      break;
  }
  auto n = std::make_shared<ExprNode>();
  n->kind = ExprNode::Kind::Binary;
  n->bop = op;
  n->a = a.ptr();
  n->b = b.ptr();
  n->id = ExprNode::next_id();
  return Expr(std::move(n));
}

inline Expr operator+(const Expr& a, const Expr& b) { return make_binary(BinaryOp::Add, a, b); }
inline Expr operator-(const Expr& a, const Expr& b) { return make_binary(BinaryOp::Sub, a, b); }
inline Expr operator*(const Expr& a, const Expr& b) { return make_binary(BinaryOp::Mul, a, b); }
inline Expr operator/(const Expr& a, const Expr& b) { return make_binary(BinaryOp::Div, a, b); }
inline Expr operator-(const Expr& a) { return make_unary(UnaryOp::Neg, a); }

inline Expr operator+(const Expr& a, double b) { return a + Expr::constant(b); }
inline Expr operator+(double a, const Expr& b) { return Expr::constant(a) + b; }
inline Expr operator-(const Expr& a, double b) { return a - Expr::constant(b); }
inline Expr operator-(double a, const Expr& b) { return Expr::constant(a) - b; }
inline Expr operator*(const Expr& a, double b) { return a * Expr::constant(b); }
inline Expr operator*(double a, const Expr& b) { return Expr::constant(a) * b; }
inline Expr operator/(const Expr& a, double b) { return a / Expr::constant(b); }
inline Expr operator/(double a, const Expr& b) { return Expr::constant(a) / b; }

inline Expr tanh(const Expr& a) { return make_unary(UnaryOp::Tanh, a); }
inline Expr exp(const Expr& a) { return make_unary(UnaryOp::Exp, a); }
inline Expr log(const Expr& a) { return make_unary(UnaryOp::Log, a); }
inline Expr sqrt(const Expr& a) { return make_unary(UnaryOp::Sqrt, a); }
inline Expr sign(const Expr& a) { return make_unary(UnaryOp::Sign, a); }
inline Expr abs(const Expr& a) { return make_unary(UnaryOp::Abs, a); }
inline Expr sin(const Expr& a) { return make_unary(UnaryOp::Sin, a); }
inline Expr cos(const Expr& a) { return make_unary(UnaryOp::Cos, a); }
inline Expr pow(const Expr& a, const Expr& b) { return make_binary(BinaryOp::Pow, a, b); }
inline Expr pow(const Expr& a, double b) { return pow(a, Expr::constant(b)); }

// max(a, b) written with smooth-ish primitives; derivative follows the
// abs subgradient convention (sign with sign(0) = 0).
inline Expr max(const Expr& a, const Expr& b) { return 0.5 * (a + b + abs(a - b)); }
inline Expr max(const Expr& a, double b) { return max(a, Expr::constant(b)); }

inline std::string describe(const ExprNode& n) {
  switch (n.kind) {
    case ExprNode::Kind::Constant:
      return "constant(" + std::to_string(n.value) + ")";
    case ExprNode::Kind::Input:
      return n.group + "[" + std::to_string(n.index) + "]";
    case ExprNode::Kind::Unary:
      return std::string(name_of(n.uop)) + "#" + std::to_string(n.id);
    case ExprNode::Kind::Binary:
      return std::string(name_of(n.bop)) + "#" + std::to_string(n.id);
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Input groups

struct InputGroupSpec {
  std::string name;
  int dim = 0;
};

// ---------------------------------------------------------------------------
// Evaluation over named bindings

using Bindings = std::map<std::string, std::vector<double>, std::less<>>;

namespace detail {

inline double eval_node(const ExprNode* n, const Bindings& bindings,
                        std::unordered_map<const ExprNode*, double>& memo) {
  if (auto it = memo.find(n); it != memo.end()) return it->second;
  double out = 0.0;
  switch (n->kind) {
    case ExprNode::Kind::Constant:
      out = n->value;
      break;
    case ExprNode::Kind::Input: {
      auto it = bindings.find(n->group);
      if (it == bindings.end())
        throw EvalError("unbound input group '" + n->group + "'");
      if (n->index < 0 || static_cast<std::size_t>(n->index) >= it->second.size())
        throw EvalError("binding for group '" + n->group + "' has length " +
                        std::to_string(it->second.size()) + ", need index " +
                        std::to_string(n->index));
      out = it->second[static_cast<std::size_t>(n->index)];
      break;
    }
    case ExprNode::Kind::Unary: {
      const double x = eval_node(n->a.get(), bindings, memo);
      if (n->uop == UnaryOp::Log && x <= 0.0)
        throw EvalError("log of non-positive value at node " + describe(*n));
      if (n->uop == UnaryOp::Sqrt && x < 0.0)
        throw EvalError("sqrt of negative value at node " + describe(*n));
      out = apply_unary(n->uop, x);
      break;
    }
    case ExprNode::Kind::Binary: {
      const double x = eval_node(n->a.get(), bindings, memo);
      const double y = eval_node(n->b.get(), bindings, memo);
      out = apply_binary(n->bop, x, y);
      break;
    }
  }
  memo.emplace(n, out);
  return out;
}

}  // namespace detail

inline double evaluate(const Expr& e, const Bindings& bindings) {
  std::unordered_map<const ExprNode*, double> memo;
  return detail::eval_node(&e.node(), bindings, memo);
}

// ---------------------------------------------------------------------------
// Differentiation

// Derivative builder with a cache shared across calls, so Jacobians and
// repeated leaf derivatives reuse subgraphs instead of duplicating them.
class Differentiator {
 public:
  Expr d(const Expr& e, const Expr& v) {
    if (!v.is_input())
      throw ConstructionError("differentiate: variable must be an input node");
    return derive(e.ptr(), v.ptr().get());
  }

 private:
  struct Key {
    const ExprNode* node;
    const ExprNode* var;
    bool operator==(const Key&) const = default;
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const {
      auto h1 = std::hash<const void*>()(k.node);
      auto h2 = std::hash<const void*>()(k.var);
      return h1 ^ (h2 + 0x9e3779b97f4a7c15ull + (h1 << 6) + (h1 >> 2));
    }
  };

  Expr derive(const NodePtr& n, const ExprNode* v) {
    Key key{n.get(), v};
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    Expr out = derive_uncached(n, v);
    cache_.emplace(key, out);
    return out;
  }

  Expr derive_uncached(const NodePtr& n, const ExprNode* v) {
    switch (n->kind) {
      case ExprNode::Kind::Constant:
        return Expr::constant(0.0);
      case ExprNode::Kind::Input:
        return Expr::constant(n.get() == v ? 1.0 : 0.0);
      case ExprNode::Kind::Unary: {
        const Expr a(n->a);
        const Expr da = derive(n->a, v);
        switch (n->uop) {
          case UnaryOp::Neg: return -da;
          case UnaryOp::Tanh: {
            Expr t = tanh(a);
            return (1.0 - t * t) * da;
          }
          case UnaryOp::Exp: return exp(a) * da;
          case UnaryOp::Log: return da / a;
          case UnaryOp::Sqrt: return da / (2.0 * sqrt(a));
          case UnaryOp::Sign: return Expr::constant(0.0);
          case UnaryOp::Abs: return sign(a) * da;
          case UnaryOp::Sin: return cos(a) * da;
          case UnaryOp::Cos: return -sin(a) * da;
        }
        return Expr::constant(0.0);
      }
      case ExprNode::Kind::Binary: {
        const Expr a(n->a);
        const Expr b(n->b);
        const Expr da = derive(n->a, v);
        const Expr db = derive(n->b, v);
        switch (n->bop) {
          case BinaryOp::Add: return da + db;
          case BinaryOp::Sub: return da - db;
          case BinaryOp::Mul: return da * b + a * db;
          case BinaryOp::Div: return (da * b - a * db) / (b * b);
          case BinaryOp::Pow:
            if (db.is_constant(0.0)) {
              // Exponent independent of v: plain power rule, valid for
              // non-positive bases too.
              return b * pow(a, b - 1.0) * da;
            }
            return pow(a, b) * (db * log(a) + b * da / a);
        }
        return Expr::constant(0.0);
      }
    }
    return Expr::constant(0.0);
  }

  std::unordered_map<Key, Expr, KeyHash> cache_;
};

inline Expr differentiate(const Expr& e, const Expr& v) {
  Differentiator diff;
  return diff.d(e, v);
}

// ---------------------------------------------------------------------------
// Substitution

// Rewrites a DAG replacing selected nodes (typically inputs) by expressions.
// Subtrees that are untouched are returned as the original nodes, so a
// no-op substitution is the identity on the graph.
class Substitution {
 public:
  void map(const Expr& from, const Expr& to) { repl_[from.ptr().get()] = to; }

  Expr apply(const Expr& e) { return rewrite(e.ptr()); }

 private:
  Expr rewrite(const NodePtr& n) {
    if (auto it = repl_.find(n.get()); it != repl_.end()) return it->second;
    if (auto it = memo_.find(n.get()); it != memo_.end()) return it->second;
    Expr out;
    switch (n->kind) {
      case ExprNode::Kind::Constant:
      case ExprNode::Kind::Input:
        out = Expr(n);
        break;
      case ExprNode::Kind::Unary: {
        Expr a = rewrite(n->a);
        out = a.ptr() == n->a ? Expr(n) : make_unary(n->uop, a);
        break;
      }
      case ExprNode::Kind::Binary: {
        Expr a = rewrite(n->a);
        Expr b = rewrite(n->b);
        out = (a.ptr() == n->a && b.ptr() == n->b) ? Expr(n) : make_binary(n->bop, a, b);
        break;
      }
    }
    memo_.emplace(n.get(), out);
    return out;
  }

  std::unordered_map<const ExprNode*, Expr> repl_;
  std::unordered_map<const ExprNode*, Expr> memo_;
};

}  // namespace fabrics
