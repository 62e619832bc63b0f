#pragma once

#include "proxqn/types.hpp"

#include <cmath>
#include <cstdint>
#include <random>

namespace proxqn {

/// Seeded generator with platform-independent output. std::mt19937_64 is
/// fully specified by the standard; the standard distributions are not, so
/// the transforms below are written out.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal (Box-Muller).
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * M_PI * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  /// Uniform integer in [0, n).
  Index index(Index n) { return static_cast<Index>(engine_() % static_cast<std::uint64_t>(n)); }

  Vector normal_vector(Index n) {
    Vector v(n);
    for (Index i = 0; i < n; ++i) v(i) = normal();
    return v;
  }

  Vector uniform_vector(Index n, double lo = 0.0, double hi = 1.0) {
    Vector v(n);
    for (Index i = 0; i < n; ++i) v(i) = uniform(lo, hi);
    return v;
  }

  /// Column-major fill, so the draw order is part of the format.
  Matrix normal_matrix(Index rows, Index cols) {
    Matrix m(rows, cols);
    for (Index j = 0; j < cols; ++j)
      for (Index i = 0; i < rows; ++i) m(i, j) = normal();
    return m;
  }

  Matrix uniform_matrix(Index rows, Index cols, double lo = 0.0, double hi = 1.0) {
    Matrix m(rows, cols);
    for (Index j = 0; j < cols; ++j)
      for (Index i = 0; i < rows; ++i) m(i, j) = uniform(lo, hi);
    return m;
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace proxqn
