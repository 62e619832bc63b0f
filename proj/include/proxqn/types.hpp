#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace proxqn {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Operands whose sizes do not agree.
class DimensionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A metric (or a factor system derived from it) that is not symmetric
/// positive definite.
class NotPositiveDefinite : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A root finder that could not certify its result.
class RootFindingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require_same_size(Index expected, Index got, const char* what) {
  if (expected != got) {
    throw DimensionMismatch(std::string(what) + ": expected dimension " +
                            std::to_string(expected) + ", got " +
                            std::to_string(got));
  }
}

}  // namespace proxqn
