#pragma once

#include <stdexcept>
#include <string>

namespace fabrics {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised while building expressions, maps or planners (bad shapes,
// duplicate input groups, invalid preconditions).
class ConstructionError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public ConstructionError {
 public:
  using ConstructionError::ConstructionError;
};

// Raised while evaluating expressions or compiled plans (unbound inputs,
// log/sqrt domain violations, non-finite planner output).
class EvalError : public Error {
 public:
  using Error::Error;
};

// Raised when loading configuration or study files.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace fabrics
