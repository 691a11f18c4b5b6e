#pragma once

#include <bit>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "fabrics/matrix_expression.hpp"

namespace fabrics {

enum class OpCode : std::uint8_t {
  Const,
  Input,
  Neg,
  Tanh,
  Exp,
  Log,
  Sqrt,
  Sign,
  Abs,
  Sin,
  Cos,
  Add,
  Sub,
  Mul,
  Div,
  Pow,
};

inline OpCode opcode_of(UnaryOp op) {
  switch (op) {
    case UnaryOp::Neg: return OpCode::Neg;
    case UnaryOp::Tanh: return OpCode::Tanh;
    case UnaryOp::Exp: return OpCode::Exp;
    case UnaryOp::Log: return OpCode::Log;
    case UnaryOp::Sqrt: return OpCode::Sqrt;
    case UnaryOp::Sign: return OpCode::Sign;
    case UnaryOp::Abs: return OpCode::Abs;
    case UnaryOp::Sin: return OpCode::Sin;
    case UnaryOp::Cos: return OpCode::Cos;
  }
  return OpCode::Neg;
}

inline OpCode opcode_of(BinaryOp op) {
  switch (op) {
    case BinaryOp::Add: return OpCode::Add;
    case BinaryOp::Sub: return OpCode::Sub;
    case BinaryOp::Mul: return OpCode::Mul;
    case BinaryOp::Div: return OpCode::Div;
    case BinaryOp::Pow: return OpCode::Pow;
  }
  return OpCode::Add;
}

// Flat, topologically ordered instruction tape. Structural duplicates in the
// source DAG share one slot. Immutable after compile; evaluation writes only
// into a caller-owned scratch buffer, so concurrent use is safe.
class CompiledPlan {
 public:
  struct Instr {
    OpCode op;
    std::uint32_t dst = 0;
    std::uint32_t a = 0;       // operand slot, or flat input offset for Input
    std::uint32_t b = 0;
    double imm = 0.0;          // Const payload
    std::int32_t diag = -1;    // index into diagnostics_ for log/sqrt
  };

  struct Output {
    std::string name;
    int rows = 0, cols = 0;    // cols == 0 for scalars/vectors
    std::vector<std::uint32_t> slots;
  };

  std::size_t scratch_size() const { return n_slots_; }
  std::size_t input_size() const { return input_size_; }
  const std::vector<InputGroupSpec>& input_layout() const { return inputs_; }
  const std::vector<Instr>& tape() const { return tape_; }

  int input_offset(std::string_view group) const {
    int off = 0;
    for (const auto& g : inputs_) {
      if (g.name == group) return off;
      off += g.dim;
    }
    throw EvalError("plan has no input group '" + std::string(group) + "'");
  }

  const Output& output(std::string_view name) const {
    for (const auto& o : outputs_)
      if (o.name == name) return o;
    throw EvalError("plan has no output '" + std::string(name) + "'");
  }

  const std::vector<Output>& outputs() const { return outputs_; }

  void eval(std::span<const double> inputs, std::span<double> scratch) const {
    if (inputs.size() != input_size_)
      throw EvalError("plan input has length " + std::to_string(inputs.size()) + ", expected " +
                      std::to_string(input_size_));
    if (scratch.size() < n_slots_) throw EvalError("plan scratch buffer too small");
    double* s = scratch.data();
    const double* in = inputs.data();
    for (const Instr& t : tape_) {
      switch (t.op) {
        case OpCode::Const: s[t.dst] = t.imm; break;
        case OpCode::Input: s[t.dst] = in[t.a]; break;
        case OpCode::Neg: s[t.dst] = -s[t.a]; break;
        case OpCode::Tanh: s[t.dst] = std::tanh(s[t.a]); break;
        case OpCode::Exp: s[t.dst] = std::exp(s[t.a]); break;
        case OpCode::Log:
          if (s[t.a] <= 0.0)
            throw EvalError("log of non-positive value at node " + diagnostics_[t.diag]);
          s[t.dst] = std::log(s[t.a]);
          break;
        case OpCode::Sqrt:
          if (s[t.a] < 0.0)
            throw EvalError("sqrt of negative value at node " + diagnostics_[t.diag]);
          s[t.dst] = std::sqrt(s[t.a]);
          break;
        case OpCode::Sign: s[t.dst] = s[t.a] > 0.0 ? 1.0 : (s[t.a] < 0.0 ? -1.0 : 0.0); break;
        case OpCode::Abs: s[t.dst] = std::abs(s[t.a]); break;
        case OpCode::Sin: s[t.dst] = std::sin(s[t.a]); break;
        case OpCode::Cos: s[t.dst] = std::cos(s[t.a]); break;
        case OpCode::Add: s[t.dst] = s[t.a] + s[t.b]; break;
        case OpCode::Sub: s[t.dst] = s[t.a] - s[t.b]; break;
        case OpCode::Mul: s[t.dst] = s[t.a] * s[t.b]; break;
        case OpCode::Div: s[t.dst] = s[t.a] / s[t.b]; break;
        case OpCode::Pow: s[t.dst] = std::pow(s[t.a], s[t.b]); break;
      }
    }
  }

  void read_output(std::string_view name, std::span<const double> scratch,
                   std::span<double> out) const {
    const Output& o = output(name);
    if (out.size() != o.slots.size())
      throw EvalError("output '" + std::string(name) + "' has size " +
                      std::to_string(o.slots.size()));
    for (std::size_t i = 0; i < o.slots.size(); ++i) out[i] = scratch[o.slots[i]];
  }

  double output_scalar(std::string_view name, std::span<const double> scratch) const {
    const Output& o = output(name);
    if (o.slots.size() != 1)
      throw EvalError("output '" + std::string(name) + "' is not a scalar");
    return scratch[o.slots[0]];
  }

 private:
  friend class PlanBuilder;

  std::vector<Instr> tape_;
  std::vector<Output> outputs_;
  std::vector<InputGroupSpec> inputs_;
  std::vector<std::string> diagnostics_;
  std::size_t n_slots_ = 0;
  std::size_t input_size_ = 0;
};

// Collects named outputs and compiles them into one CompiledPlan against an
// ordered input-group layout.
class PlanBuilder {
 public:
  void add_output(const std::string& name, const Expr& e) { add(name, 0, 0, {e}); }

  void add_output(const std::string& name, const VectorExpr& v) {
    add(name, v.dim(), 0, v.entries());
  }

  void add_output(const std::string& name, const MatrixExpr& m) {
    add(name, m.rows(), m.cols(), m.entries());
  }

  CompiledPlan compile(const std::vector<InputGroupSpec>& inputs) const {
    CompiledPlan plan;
    plan.inputs_ = inputs;
    std::unordered_map<std::string, std::pair<int, int>> group_offsets;  // name -> (offset, dim)
    int off = 0;
    for (const auto& g : inputs) {
      if (!group_offsets.emplace(g.name, std::make_pair(off, g.dim)).second)
        throw ConstructionError("compile: duplicate input group '" + g.name + "'");
      off += g.dim;
    }
    plan.input_size_ = static_cast<std::size_t>(off);

    std::unordered_map<CseKey, std::uint32_t, CseKeyHash> cse;
    std::unordered_map<const ExprNode*, std::uint32_t> slot_of;
    std::uint32_t next_slot = 0;

    for (const auto& [name, rows, cols, exprs] : pending_) {
      CompiledPlan::Output out;
      out.name = name;
      out.rows = rows;
      out.cols = cols;
      for (const Expr& e : exprs)
        out.slots.push_back(emit(e.ptr(), plan, group_offsets, cse, slot_of, next_slot));
      plan.outputs_.push_back(std::move(out));
    }
    plan.n_slots_ = next_slot;
    return plan;
  }

 private:
  struct Pending {
    std::string name;
    int rows, cols;
    std::vector<Expr> exprs;
  };

  struct CseKey {
    OpCode op;
    std::uint32_t a = 0, b = 0;
    std::uint64_t imm = 0;  // constant bits, or packed group identity for Input
    bool operator==(const CseKey&) const = default;
  };
  struct CseKeyHash {
    std::size_t operator()(const CseKey& k) const {
      std::size_t h = static_cast<std::size_t>(k.op);
      h = h * 1000003u ^ k.a;
      h = h * 1000003u ^ k.b;
      h = h * 1000003u ^ static_cast<std::size_t>(k.imm ^ (k.imm >> 32));
      return h;
    }
  };

  void add(const std::string& name, int rows, int cols, std::vector<Expr> exprs) {
    for (const auto& p : pending_)
      if (p.name == name) throw ConstructionError("compile: duplicate output '" + name + "'");
    pending_.push_back({name, rows, cols, std::move(exprs)});
  }

  // Iterative post-order emission; DAGs can be deep enough that recursion
  // is not safe here.
  std::uint32_t emit(const NodePtr& root, CompiledPlan& plan,
                     const std::unordered_map<std::string, std::pair<int, int>>& groups,
                     std::unordered_map<CseKey, std::uint32_t, CseKeyHash>& cse,
                     std::unordered_map<const ExprNode*, std::uint32_t>& slot_of,
                     std::uint32_t& next_slot) const {
    struct Frame {
      const ExprNode* node;
      bool expanded;
    };
    std::vector<Frame> stack{{root.get(), false}};
    while (!stack.empty()) {
      auto [node, expanded] = stack.back();
      stack.pop_back();
      if (slot_of.contains(node)) continue;
      if (!expanded) {
        stack.push_back({node, true});
        if (node->kind == ExprNode::Kind::Unary || node->kind == ExprNode::Kind::Binary) {
          stack.push_back({node->a.get(), false});
          if (node->b) stack.push_back({node->b.get(), false});
        }
        continue;
      }

      CseKey key{};
      CompiledPlan::Instr instr{};
      switch (node->kind) {
        case ExprNode::Kind::Constant:
          key = {OpCode::Const, 0, 0, std::bit_cast<std::uint64_t>(node->value)};
          instr = {OpCode::Const, 0, 0, 0, node->value, -1};
          break;
        case ExprNode::Kind::Input: {
          auto it = groups.find(node->group);
          if (it == groups.end())
            throw ConstructionError("compile: input group '" + node->group +
                                    "' is not in the plan's input list");
          if (node->index >= it->second.second)
            throw ConstructionError("compile: input " + describe(*node) +
                                    " exceeds declared group dim " +
                                    std::to_string(it->second.second));
          const auto flat = static_cast<std::uint32_t>(it->second.first + node->index);
          key = {OpCode::Input, flat, 0, 0};
          instr = {OpCode::Input, 0, flat, 0, 0.0, -1};
          break;
        }
        case ExprNode::Kind::Unary: {
          const auto a = slot_of.at(node->a.get());
          const OpCode op = opcode_of(node->uop);
          key = {op, a, 0, 0};
          instr = {op, 0, a, 0, 0.0, -1};
          break;
        }
        case ExprNode::Kind::Binary: {
          const auto a = slot_of.at(node->a.get());
          const auto b = slot_of.at(node->b.get());
          const OpCode op = opcode_of(node->bop);
          key = {op, a, b, 0};
          instr = {op, 0, a, b, 0.0, -1};
          break;
        }
      }

      if (auto it = cse.find(key); it != cse.end()) {
        slot_of.emplace(node, it->second);
        continue;
      }
      if (instr.op == OpCode::Log || instr.op == OpCode::Sqrt) {
        instr.diag = static_cast<std::int32_t>(plan.diagnostics_.size());
        plan.diagnostics_.push_back(describe(*node));
      }
      const auto slot = next_slot++;
      instr.dst = slot;
      plan.tape_.push_back(instr);
      cse.emplace(key, slot);
      slot_of.emplace(node, slot);
    }
    return slot_of.at(root.get());
  }

  std::vector<Pending> pending_;
};

// Assembles the flat input vector for a plan from named bindings.
inline std::vector<double> pack_inputs(const CompiledPlan& plan, const Bindings& bindings) {
  std::vector<double> flat(plan.input_size(), 0.0);
  int off = 0;
  for (const auto& g : plan.input_layout()) {
    auto it = bindings.find(g.name);
    if (it == bindings.end()) throw EvalError("missing binding for input group '" + g.name + "'");
    if (static_cast<int>(it->second.size()) != g.dim)
      throw EvalError("binding for '" + g.name + "' has length " +
                      std::to_string(it->second.size()) + ", expected " + std::to_string(g.dim));
    for (int i = 0; i < g.dim; ++i) flat[static_cast<std::size_t>(off + i)] = it->second[i];
    off += g.dim;
  }
  return flat;
}

}  // namespace fabrics
