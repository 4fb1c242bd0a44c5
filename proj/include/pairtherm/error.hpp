#pragma once

#include <stdexcept>
#include <string>

namespace pairtherm {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Precondition violated by caller-supplied data.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// An iterative procedure exhausted its budget or lost its bracket.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

/// The projected measure has non-positive norm or a non-negligible
/// imaginary part: the trial state carries (almost) no weight in the
/// requested particle-number sector.
class ProjectionBreakdown : public Error {
 public:
  using Error::Error;
};

/// Exact diagonalization request exceeds the supported size.
class OracleSizeError : public Error {
 public:
  using Error::Error;
};

}  // namespace pairtherm
