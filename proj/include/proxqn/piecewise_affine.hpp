#pragma once

#include <array>
#include <cmath>
#include <stdexcept>

namespace proxqn {

// Continuous, monotone piecewise-affine scalar map
//   z -> a_j z + b_j   on [t_j, t_{j+1}),  t_0 = -inf, t_{k+1} = +inf,
// i.e. one coordinate of a separable prox. Breakpoints are sorted ascending;
// a point exactly on a breakpoint belongs to the segment on its right.
struct PiecewiseAffine {
  static constexpr int kMaxBreakpoints = 4;

  int count = 0;  // number of breakpoints k; segments = k + 1
  std::array<double, kMaxBreakpoints> breakpoints{};
  std::array<double, kMaxBreakpoints + 1> slopes{};
  std::array<double, kMaxBreakpoints + 1> intercepts{};

  static PiecewiseAffine identity() {
    PiecewiseAffine pa;
    pa.slopes[0] = 1.0;
    return pa;
  }

  /// Adds the next segment [t, next breakpoint) with value a z + b.
  void push(double t, double a, double b) {
    if (count >= kMaxBreakpoints) throw std::logic_error("PiecewiseAffine: too many breakpoints");
    breakpoints[static_cast<std::size_t>(count)] = t;
    ++count;
    slopes[static_cast<std::size_t>(count)] = a;
    intercepts[static_cast<std::size_t>(count)] = b;
  }

  int segment(double z) const {
    int j = 0;
    while (j < count && z >= breakpoints[static_cast<std::size_t>(j)]) ++j;
    return j;
  }

  double operator()(double z) const {
    const auto j = static_cast<std::size_t>(segment(z));
    return slopes[j] * z + intercepts[j];
  }

  double slope_at(double z) const { return slopes[static_cast<std::size_t>(segment(z))]; }

  /// Largest jump across a breakpoint (0 for an exactly continuous map).
  double continuity_defect() const {
    double worst = 0.0;
    for (std::size_t j = 0; j < static_cast<std::size_t>(count); ++j) {
      const double t = breakpoints[j];
      const double left = slopes[j] * t + intercepts[j];
      const double right = slopes[j + 1] * t + intercepts[j + 1];
      worst = std::max(worst, std::abs(left - right));
    }
    return worst;
  }

  bool is_monotone_nonexpansive() const {
    for (int j = 0; j <= count; ++j) {
      const double a = slopes[static_cast<std::size_t>(j)];
      if (a < 0.0 || a > 1.0) return false;
    }
    for (int j = 1; j < count; ++j) {
      if (!(breakpoints[static_cast<std::size_t>(j - 1)] < breakpoints[static_cast<std::size_t>(j)])) {
        return false;
      }
    }
    return true;
  }
};

}  // namespace proxqn
