#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace phdae {

/// Root of the toolkit error hierarchy. Every failure the library can
/// signal derives from this, so callers may catch either the precise
/// condition or anything phdae-related.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed expression text. Carries the byte offset of the offending token.
class SyntaxError : public Error {
public:
  SyntaxError(const std::string& msg, std::size_t position)
      : Error(msg + " (at position " + std::to_string(position) + ")"),
        position_(position) {}
  std::size_t position() const { return position_; }

private:
  std::size_t position_;
};

/// Identifier not present in the declared variable list.
class UnknownVariable : public Error {
public:
  using Error::Error;
};

/// Evaluation outside the expression's domain (ln of a non-positive
/// number, division by zero, non-finite intermediate).
class DomainError : public Error {
public:
  using Error::Error;
};

class SingularMatrix : public Error {
public:
  using Error::Error;
};

class NoConvergence : public Error {
public:
  using Error::Error;
};

/// Hessian singular at an iterate: the map x -> grad P(x) stops being
/// injective, so the transform is not defined there.
class NonConvexPoint : public Error {
public:
  using Error::Error;
};

class RankDeficientConstraint : public Error {
public:
  using Error::Error;
};

class NoZeroSetPointFound : public Error {
public:
  using Error::Error;
};

class DimensionMismatch : public Error {
public:
  using Error::Error;
};

class ValidationFailed : public Error {
public:
  using Error::Error;
};

class NothingToConvert : public Error {
public:
  using Error::Error;
};

class MorseRankFailure : public Error {
public:
  using Error::Error;
};

class UnknownFixture : public Error {
public:
  using Error::Error;
};

/// The (x_I, e_J) chart stopped parametrizing the dynamics: the combined
/// flow-map/constraint system became singular during a step.
class ChartBreakdown : public Error {
public:
  using Error::Error;
};

class IndexViolation : public Error {
public:
  using Error::Error;
};

class UnsupportedStorage : public Error {
public:
  using Error::Error;
};

/// System-description file violates the schema.
class SchemaError : public Error {
public:
  using Error::Error;
};

}  // namespace phdae
