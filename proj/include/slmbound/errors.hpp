#pragma once

#include <stdexcept>
#include <string>

namespace slmbound {

/// Malformed input: wrong dimensions, out-of-range indices, non-finite entries.
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A matrix that must be positive definite (or of full column rank) is not.
class SingularityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The requested combination of options is valid input but not supported by
/// this code path (for example quadrature means with sparsity > 1).
class UnsupportedConfiguration : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An exhaustive enumeration would exceed the configured budget.
class BudgetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical diagnostics failed (e.g. a kernel Gram matrix broke down).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace slmbound
