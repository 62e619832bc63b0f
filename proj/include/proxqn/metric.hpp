#pragma once

#include "proxqn/types.hpp"

#include <optional>
#include <vector>

namespace proxqn {

class MetricInverse;

/// Symmetric positive-definite matrix V = P + sum_i sign_i u_i u_i^T with P
/// diagonal. The common case is a uniform sign (diagonal +/- rank r); the
/// mixed form P + Q1 - Q2 arises from the zero-memory BFGS Hessian.
///
/// Values are immutable after construction. Construction validates positive
/// diagonal entries, linear independence of the factors and positive
/// definiteness of the full matrix, using only r x r computations. Factors
/// whose Euclidean norm is below `kDropTolerance` are discarded.
class LowRankMetric {
 public:
  static constexpr double kDropTolerance = 1e-12;

  /// Pure diagonal metric (r = 0).
  explicit LowRankMetric(Vector diag);

  /// P + sign * U U^T, sign in {+1, -1}.
  LowRankMetric(Vector diag, Matrix factors, int sign);

  /// P + U diag(signs) U^T with per-column signs.
  LowRankMetric(Vector diag, Matrix factors, std::vector<int> signs);

  /// Builds P + U diag(signs) U^T from arbitrary (possibly dependent or
  /// cancelling) signed terms by re-factoring the low-rank part into an
  /// orthogonal signed basis. Terms below the drop tolerance vanish.
  static LowRankMetric from_signed_terms(Vector diag, const Matrix& terms,
                                         const std::vector<int>& signs);

  static LowRankMetric identity(Index n) { return LowRankMetric(Vector::Ones(n)); }
  static LowRankMetric scaled_identity(Index n, double value) {
    return LowRankMetric(Vector::Constant(n, value));
  }

  Index dim() const { return diag_.size(); }
  Index rank() const { return factors_.cols(); }
  const Vector& diag() const { return diag_; }
  const Matrix& factors() const { return factors_; }
  const std::vector<int>& signs() const { return signs_; }

  /// The shared sign of the low-rank part; +1 when r = 0, empty when mixed.
  std::optional<int> uniform_sign() const;
  bool is_mixed() const { return !uniform_sign().has_value(); }

  /// Columns with the given sign, as a separate factor matrix.
  Matrix factors_with_sign(int sign) const;

  /// V x in O(N r).
  Vector apply(const Vector& x) const;

  /// <x, V x>.
  double norm_sq(const Vector& x) const;

  /// Spectral norm squared of P^{-1/2} U, i.e. the largest eigenvalue of the
  /// Gram matrix U^T P^{-1} U.
  double scaled_factor_norm_sq() const { return scaled_factor_norm_sq_; }

  MetricInverse inverse() const;

 private:
  void validate_and_prepare();

  Vector diag_;
  Matrix factors_;
  std::vector<int> signs_;
  double scaled_factor_norm_sq_ = 0.0;
};

/// Factored inverse V^{-1} = P^{-1} + sum_i sign_inv_i v_i v_i^T obtained by
/// Sherman-Morrison-Woodbury; for a uniform source sign the inverse carries
/// the opposite sign.
class MetricInverse {
 public:
  MetricInverse(Vector diag_inv, Matrix factors_inv, std::vector<int> signs_inv)
      : diag_inv_(std::move(diag_inv)),
        factors_inv_(std::move(factors_inv)),
        signs_inv_(std::move(signs_inv)) {}

  const Vector& diag_inv() const { return diag_inv_; }
  const Matrix& factors_inv() const { return factors_inv_; }
  const std::vector<int>& signs_inv() const { return signs_inv_; }
  std::optional<int> uniform_sign() const;

  Vector apply(const Vector& x) const;

  /// The inverse as a metric in its own right (it is SPD as well).
  LowRankMetric as_metric() const;

 private:
  Vector diag_inv_;
  Matrix factors_inv_;
  std::vector<int> signs_inv_;
};

MetricInverse invert(const LowRankMetric& metric);

inline Vector apply(const LowRankMetric& metric, const Vector& x) { return metric.apply(x); }
inline double metric_norm_sq(const LowRankMetric& metric, const Vector& x) {
  return metric.norm_sq(x);
}

}  // namespace proxqn
