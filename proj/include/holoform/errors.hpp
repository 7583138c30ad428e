#pragma once

#include <stdexcept>
#include <string>

namespace holoform {

// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Malformed input: bad dimensions, invalid weights, inconsistent shapes.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Argument outside the mathematical domain (e.g. evaluating off [0,1]).
class DomainError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// A map image left the fiber.
class MapRangeError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// A measure lacks full support where the hypotheses require supp = whole space.
class SupportError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Sampled pair violating the contraction inequality.
struct ContractionWitness {
  int x1 = 0;
  int x2 = 0;
  double z1 = 0.0;
  double z2 = 0.0;
  double lhs = 0.0;  // d(tau_x1(z1), tau_x2(z2))
  double rhs = 0.0;  // gamma * (d(x1,x2) + d(z1,z2))
};

class ContractionViolation : public ValidationError {
 public:
  ContractionViolation(const std::string& what, ContractionWitness w)
      : ValidationError(what), witness(w) {}
  ContractionWitness witness;
};

// An iterative solver ran out of iterations.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual, int iterations)
      : Error(what), last_residual(residual), iterations(iterations) {}
  double last_residual;
  int iterations;
};

// A plan failed the holonomy test beyond tolerance.
class HolonomyError : public Error {
 public:
  HolonomyError(const std::string& what, double residual)
      : Error(what), residual(residual) {}
  double residual;
};

// Entropy asked for a closed-form certificate the plan does not carry.
class MissingCertificateError : public Error {
 public:
  using Error::Error;
};

// Transport marginals with different total mass.
class InfeasibleMarginalsError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// An oracle was asked for an instance above its enumeration cap.
class OracleScaleError : public Error {
 public:
  using Error::Error;
};

// Slackness check called with a certificate whose pressure is not zero.
class PressureNonzeroError : public Error {
 public:
  PressureNonzeroError(const std::string& what, double pressure)
      : Error(what), pressure(pressure) {}
  double pressure;
};

}  // namespace holoform
