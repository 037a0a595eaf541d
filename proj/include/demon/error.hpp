#pragma once

#include <stdexcept>
#include <string>

namespace demon {

// Bad input: out-of-range parameter, wrong shape, malformed config.
class ConfigError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

// A physical or algebraic invariant failed beyond tolerance. Usually a
// convention bug rather than bad input.
class InvariantError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class ConvergenceError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// The block superoperator has more than one fixed point (e.g. p_a = 0).
class NonUniqueFixedPoint : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class BudgetExceeded : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

} // namespace demon
