#pragma once

#include <stdexcept>
#include <string>

namespace mfspde {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on caller input does not hold (negative time, dimension
/// mismatch, malformed formula, invalid configuration).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

/// A numerical guard tripped: overflow budget of a group action, dilation
/// accuracy, quadrature tolerance, ODE step rejection, Picard divergence.
class NumericalGuardError : public Error {
 public:
  using Error::Error;
};

/// Projection of a frame vector left an imaginary residual above tolerance.
class DilationBreakdown : public NumericalGuardError {
 public:
  using NumericalGuardError::NumericalGuardError;
};

/// A full cubature tree would exceed the configured branch budget.
class BudgetExceeded : public ContractViolation {
 public:
  using ContractViolation::ContractViolation;
};

namespace detail {

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ContractViolation(message);
}

}  // namespace detail
}  // namespace mfspde
