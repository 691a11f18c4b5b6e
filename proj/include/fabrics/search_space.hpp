#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "fabrics/errors.hpp"

namespace fabrics {

enum class ValueKind { Float, Int };
enum class Scale { Uniform, Log };

struct ParameterDecl {
  std::string name;
  double lower = 0.0;
  double upper = 1.0;
  ValueKind kind = ValueKind::Float;
  Scale scale = Scale::Uniform;
  double manual_default = 0.0;
};

// A full parameter assignment, keyed by declaration name. std::map keeps the
// serialization order stable.
using ParamValues = std::map<std::string, double>;

class SearchSpace {
 public:
  void add(ParameterDecl decl) {
    if (!(decl.lower < decl.upper))
      throw ConstructionError("parameter '" + decl.name + "': lower must be < upper");
    if (decl.scale == Scale::Log && decl.lower <= 0.0)
      throw ConstructionError("parameter '" + decl.name + "': log scale requires lower > 0");
    if (decl.manual_default < decl.lower || decl.manual_default > decl.upper)
      throw ConstructionError("parameter '" + decl.name + "': manual default out of bounds");
    if (decl.kind == ValueKind::Int &&
        (decl.lower != std::floor(decl.lower) || decl.upper != std::floor(decl.upper) ||
         decl.manual_default != std::floor(decl.manual_default)))
      throw ConstructionError("parameter '" + decl.name + "': int kind requires integral values");
    for (const auto& d : decls_)
      if (d.name == decl.name)
        throw ConstructionError("parameter '" + decl.name + "' declared twice");
    decls_.push_back(std::move(decl));
  }

  const std::vector<ParameterDecl>& decls() const { return decls_; }
  std::size_t size() const { return decls_.size(); }

  const ParameterDecl* find(std::string_view name) const {
    for (const auto& d : decls_)
      if (d.name == name) return &d;
    return nullptr;
  }

  ParamValues manual_defaults() const {
    ParamValues values;
    for (const auto& d : decls_) values[d.name] = d.manual_default;
    return values;
  }

  // Feasibility of one assignment: every declared parameter present, within
  // closed bounds, and integral where the declaration says so.
  void validate(const ParamValues& values) const {
    for (const auto& d : decls_) {
      auto it = values.find(d.name);
      if (it == values.end()) throw EvalError("parameter '" + d.name + "' missing");
      const double v = it->second;
      if (!(v >= d.lower && v <= d.upper))
        throw EvalError("parameter '" + d.name + "' = " + std::to_string(v) +
                        " outside bounds [" + std::to_string(d.lower) + ", " +
                        std::to_string(d.upper) + "]");
      if (d.kind == ValueKind::Int && v != std::floor(v))
        throw EvalError("parameter '" + d.name + "' must be integral");
    }
    for (const auto& [name, _] : values)
      if (!find(name)) throw EvalError("unknown parameter '" + name + "'");
  }

 private:
  std::vector<ParameterDecl> decls_;
};

// The stock search space: geometry/energy gains and exponents for the three
// avoidance families, base inertia, the speed-control block, and the
// attractor gain.
inline SearchSpace default_search_space() {
  SearchSpace space;
  space.add({"m_base", 0.0, 1.0, ValueKind::Float, Scale::Uniform, 0.2});
  space.add({"k_geo_col", 0.01, 1.0, ValueKind::Float, Scale::Log, 0.03});
  space.add({"k_geo_limit", 0.01, 1.0, ValueKind::Float, Scale::Log, 0.3});
  space.add({"k_geo_self", 0.01, 1.0, ValueKind::Float, Scale::Log, 0.03});
  space.add({"k_fin_col", 0.01, 1.0, ValueKind::Float, Scale::Log, 0.03});
  space.add({"k_fin_limit", 0.01, 1.0, ValueKind::Float, Scale::Log, 0.05});
  space.add({"k_fin_self", 0.01, 1.0, ValueKind::Float, Scale::Log, 0.03});
  space.add({"beta_geo_col", 1, 5, ValueKind::Int, Scale::Uniform, 3});
  space.add({"beta_geo_limit", 1, 5, ValueKind::Int, Scale::Uniform, 2});
  space.add({"beta_geo_self", 1, 5, ValueKind::Int, Scale::Uniform, 3});
  space.add({"beta_fin_col", 1, 5, ValueKind::Int, Scale::Uniform, 3});
  space.add({"beta_fin_limit", 1, 5, ValueKind::Int, Scale::Uniform, 3});
  space.add({"beta_fin_self", 1, 5, ValueKind::Int, Scale::Uniform, 3});
  space.add({"alpha_beta", 0.0, 1.0, ValueKind::Float, Scale::Uniform, 0.5});
  space.add({"b_min", 0.0, 1.0, ValueKind::Float, Scale::Uniform, 0.01});
  space.add({"b_max", 5.0, 20.0, ValueKind::Float, Scale::Uniform, 6.5});
  space.add({"radius_shift", 0.01, 0.1, ValueKind::Float, Scale::Uniform, 0.05});
  space.add({"v_ex", 1.0, 30.0, ValueKind::Float, Scale::Uniform, 15.0});
  space.add({"k_attractor", 1.0, 10.0, ValueKind::Float, Scale::Uniform, 5.0});
  return space;
}

}  // namespace fabrics
