#pragma once

#include <stdexcept>
#include <string>

namespace polycascade {

// Invalid distribution parameters or option values.
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A lattice site outside the reachable space-time cone.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// A time index beyond the horizon of an environment slab.
class RangeError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

// Exhaustive enumeration or materialization exceeding its budget.
class BudgetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite or otherwise unusable numerical result.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller misuse: empty inputs, violated preconditions, unsupported combinations.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace polycascade
