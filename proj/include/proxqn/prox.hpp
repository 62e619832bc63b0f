#pragma once

#include "proxqn/piecewise_affine.hpp"
#include "proxqn/types.hpp"

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace proxqn {

enum class ProxKind {
  Zero,
  L1,
  NonNeg,
  Box,
  Hinge,
  LinfBall,
  L1Ball,
  Simplex,
  LinfNorm,
  Max,
  GroupL2,
  Affine,
  Conjugate,
};

/// Contiguous index block [start, start + size).
struct Block {
  Index start = 0;
  Index size = 0;
};

/// A closed convex function h together with its proximity operator in a
/// diagonal metric:
///
///   prox(x, d, kappa) = argmin_z  kappa h(z) + 1/2 sum_i d_i (x_i - z_i)^2.
///
/// Operators are immutable after construction and safe to share.
class ProxOperator {
 public:
  virtual ~ProxOperator() = default;

  virtual ProxKind kind() const = 0;
  virtual std::string name() const = 0;

  /// h(z); +infinity outside the domain. Indicators accept a small
  /// feasibility slack so that computed projections evaluate finite.
  virtual double value(const Vector& z) const = 0;

  /// h*(z) for the operators that have a closed form.
  virtual double conjugate_value(const Vector& z) const;

  /// True when 0 minimizes h, so that every scaled prox maps 0 to 0.
  virtual bool zero_in_argmin() const = 0;

  /// Required dimension, if the operator is tied to one.
  virtual std::optional<Index> fixed_dim() const { return std::nullopt; }

  virtual bool separable() const { return false; }
  virtual bool has_descriptor() const { return false; }
  /// Scalar prox map of coordinate i (weight d_i, scale kappa).
  virtual PiecewiseAffine descriptor(Index i, double d_i, double kappa) const;

  /// Non-empty for block-separable operators.
  virtual std::vector<Block> blocks() const { return {}; }

  Vector prox(const Vector& x, const Vector& d, double kappa = 1.0) const;
  Vector prox(const Vector& x, double kappa = 1.0) const;

  /// J v for an element J of the generalized Jacobian of prox(., d, kappa)
  /// at x. Descriptor-backed operators use the right-segment slope; others
  /// override with an exact formula or fall back to a forward difference.
  virtual Vector jacobian_apply(const Vector& x, const Vector& d, double kappa,
                                const Vector& v) const;

 protected:
  virtual Vector do_prox(const Vector& x, const Vector& d, double kappa) const = 0;
};

using ProxPtr = std::shared_ptr<const ProxOperator>;

/// Slack used when evaluating indicator functions.
inline constexpr double kFeasibilityTol = 1e-9;

class ZeroProx final : public ProxOperator {
 public:
  ProxKind kind() const override { return ProxKind::Zero; }
  std::string name() const override { return "zero"; }
  double value(const Vector&) const override { return 0.0; }
  double conjugate_value(const Vector& z) const override;
  bool zero_in_argmin() const override { return true; }
  bool separable() const override { return true; }
  bool has_descriptor() const override { return true; }
  PiecewiseAffine descriptor(Index, double, double) const override {
    return PiecewiseAffine::identity();
  }

 protected:
  Vector do_prox(const Vector& x, const Vector&, double) const override { return x; }
};

/// lambda ||z||_1.
class L1Prox final : public ProxOperator {
 public:
  explicit L1Prox(double lambda);
  double lambda() const { return lambda_; }

  ProxKind kind() const override { return ProxKind::L1; }
  std::string name() const override { return "l1"; }
  double value(const Vector& z) const override { return lambda_ * z.lpNorm<1>(); }
  double conjugate_value(const Vector& z) const override;
  bool zero_in_argmin() const override { return true; }
  bool separable() const override { return true; }
  bool has_descriptor() const override { return true; }
  PiecewiseAffine descriptor(Index i, double d_i, double kappa) const override;
  Vector jacobian_apply(const Vector& x, const Vector& d, double kappa,
                        const Vector& v) const override;

 protected:
  Vector do_prox(const Vector& x, const Vector& d, double kappa) const override;

 private:
  double lambda_;
};

/// Indicator of the box [lo, hi]^N (bounds may be infinite).
class BoxProx : public ProxOperator {
 public:
  BoxProx(double lo, double hi);
  double lo() const { return lo_; }
  double hi() const { return hi_; }

  ProxKind kind() const override { return ProxKind::Box; }
  std::string name() const override { return "box"; }
  double value(const Vector& z) const override;
  double conjugate_value(const Vector& z) const override;
  bool zero_in_argmin() const override { return lo_ <= 0.0 && hi_ >= 0.0; }
  bool separable() const override { return true; }
  bool has_descriptor() const override { return true; }
  PiecewiseAffine descriptor(Index i, double d_i, double kappa) const override;

 protected:
  Vector do_prox(const Vector& x, const Vector& d, double kappa) const override;

 private:
  double lo_;
  double hi_;
};

/// Indicator of the non-negative orthant.
class NonNegProx final : public BoxProx {
 public:
  NonNegProx();
  ProxKind kind() const override { return ProxKind::NonNeg; }
  std::string name() const override { return "nonneg"; }
};

/// Indicator of {||z||_inf <= radius}.
class LinfBallProx final : public BoxProx {
 public:
  explicit LinfBallProx(double radius);
  ProxKind kind() const override { return ProxKind::LinfBall; }
  std::string name() const override { return "linf-ball"; }
};

/// lambda sum_i max(0, z_i), the shifted and reversed hinge loss.
class HingeProx final : public ProxOperator {
 public:
  explicit HingeProx(double lambda);
  double lambda() const { return lambda_; }

  ProxKind kind() const override { return ProxKind::Hinge; }
  std::string name() const override { return "hinge"; }
  double value(const Vector& z) const override;
  double conjugate_value(const Vector& z) const override;
  bool zero_in_argmin() const override { return true; }
  bool separable() const override { return true; }
  bool has_descriptor() const override { return true; }
  PiecewiseAffine descriptor(Index i, double d_i, double kappa) const override;

 protected:
  Vector do_prox(const Vector& x, const Vector& d, double kappa) const override;

 private:
  double lambda_;
};

/// Indicator of {||z||_1 <= radius}; weighted projection by sorting.
class L1BallProx final : public ProxOperator {
 public:
  explicit L1BallProx(double radius);
  double radius() const { return radius_; }

  ProxKind kind() const override { return ProxKind::L1Ball; }
  std::string name() const override { return "l1-ball"; }
  double value(const Vector& z) const override;
  double conjugate_value(const Vector& z) const override;
  bool zero_in_argmin() const override { return true; }
  Vector jacobian_apply(const Vector& x, const Vector& d, double kappa,
                        const Vector& v) const override;

 protected:
  Vector do_prox(const Vector& x, const Vector& d, double kappa) const override;

 private:
  double radius_;
};

/// Indicator of {z >= 0, sum z = radius}; weighted projection by sorting.
class SimplexProx final : public ProxOperator {
 public:
  explicit SimplexProx(double radius);
  double radius() const { return radius_; }

  ProxKind kind() const override { return ProxKind::Simplex; }
  std::string name() const override { return "simplex"; }
  double value(const Vector& z) const override;
  double conjugate_value(const Vector& z) const override;
  bool zero_in_argmin() const override { return false; }
  Vector jacobian_apply(const Vector& x, const Vector& d, double kappa,
                        const Vector& v) const override;

 protected:
  Vector do_prox(const Vector& x, const Vector& d, double kappa) const override;

 private:
  double radius_;
};

/// h* computed from h through the Moreau identity in the diagonal metric:
///   prox^D_{kappa h*}(x) = x - kappa D^{-1} prox^{D^{-1}}_{h/kappa}(D x / kappa).
class ConjugateProx : public ProxOperator {
 public:
  explicit ConjugateProx(ProxPtr base);
  const ProxOperator& base() const { return *base_; }

  ProxKind kind() const override { return ProxKind::Conjugate; }
  std::string name() const override { return "conj(" + base_->name() + ")"; }
  double value(const Vector& z) const override { return base_->conjugate_value(z); }
  double conjugate_value(const Vector& z) const override { return base_->value(z); }
  bool zero_in_argmin() const override;
  std::optional<Index> fixed_dim() const override { return base_->fixed_dim(); }
  Vector jacobian_apply(const Vector& x, const Vector& d, double kappa,
                        const Vector& v) const override;

 protected:
  Vector do_prox(const Vector& x, const Vector& d, double kappa) const override;

 private:
  ProxPtr base_;
};

/// lambda ||z||_inf, the conjugate of the l1-ball indicator of radius lambda.
class LinfNormProx final : public ConjugateProx {
 public:
  explicit LinfNormProx(double lambda);
  double lambda() const { return lambda_; }
  ProxKind kind() const override { return ProxKind::LinfNorm; }
  std::string name() const override { return "linf"; }
  double value(const Vector& z) const override { return lambda_ * z.lpNorm<Eigen::Infinity>(); }
  bool zero_in_argmin() const override { return true; }

 protected:
  Vector do_prox(const Vector& x, const Vector& d, double kappa) const override;

 private:
  double lambda_;
};

/// lambda max_i z_i, the conjugate of the simplex indicator of radius lambda.
class MaxProx final : public ConjugateProx {
 public:
  explicit MaxProx(double lambda);
  double lambda() const { return lambda_; }
  ProxKind kind() const override { return ProxKind::Max; }
  std::string name() const override { return "max"; }
  double value(const Vector& z) const override { return lambda_ * z.maxCoeff(); }
  bool zero_in_argmin() const override { return lambda_ == 0.0; }

 protected:
  Vector do_prox(const Vector& x, const Vector& d, double kappa) const override;

 private:
  double lambda_;
};

/// lambda sum_b ||z_b||_2 over a partition into contiguous blocks. The
/// diagonal weights must be constant on every block.
class GroupL2Prox final : public ProxOperator {
 public:
  GroupL2Prox(double lambda, std::vector<Index> block_sizes);
  double lambda() const { return lambda_; }
  const std::vector<Block>& block_list() const { return blocks_; }

  ProxKind kind() const override { return ProxKind::GroupL2; }
  std::string name() const override { return "group-l2"; }
  double value(const Vector& z) const override;
  double conjugate_value(const Vector& z) const override;
  bool zero_in_argmin() const override { return true; }
  std::optional<Index> fixed_dim() const override { return dim_; }
  std::vector<Block> blocks() const override { return blocks_; }
  Vector jacobian_apply(const Vector& x, const Vector& d, double kappa,
                        const Vector& v) const override;

  /// Throws unless d is constant (to 1e-12 relative) on every block.
  void check_block_constant(const Vector& d) const;

 protected:
  Vector do_prox(const Vector& x, const Vector& d, double kappa) const override;

 private:
  double lambda_;
  Index dim_;
  std::vector<Block> blocks_;
};

/// Indicator of the affine set {z : A z = b}; A must have full row rank.
class AffineProx final : public ProxOperator {
 public:
  AffineProx(Matrix a, Vector b);
  const Matrix& a() const { return a_; }
  const Vector& b() const { return b_; }

  ProxKind kind() const override { return ProxKind::Affine; }
  std::string name() const override { return "affine"; }
  double value(const Vector& z) const override;
  bool zero_in_argmin() const override { return b_.isZero(0.0); }
  std::optional<Index> fixed_dim() const override { return a_.cols(); }
  Vector jacobian_apply(const Vector& x, const Vector& d, double kappa,
                        const Vector& v) const override;

 protected:
  Vector do_prox(const Vector& x, const Vector& d, double kappa) const override;

 private:
  /// x - D^{-1} A^T (A D^{-1} A^T)^{-1} A x, the D-orthogonal projection of x
  /// onto null(A).
  Vector project_null(const Vector& x, const Vector& d) const;

  Matrix a_;
  Vector b_;
  Matrix pinv_;  // Euclidean pseudo-inverse A^T (A A^T)^{-1}
};

/// Plain description of an operator, as used by configuration files and the
/// command line.
struct ProxSpec {
  std::string kind = "l1";
  double lambda = 1.0;
  double lo = 0.0;
  double hi = 1.0;
  double radius = 1.0;
  std::vector<Index> block_sizes;
  Matrix a;
  Vector b;
};

/// Builds an operator; throws std::invalid_argument on an unknown kind or
/// invalid parameters.
ProxPtr make_prox(const ProxSpec& spec);

/// Names accepted by make_prox.
const std::vector<std::string>& prox_kind_names();

}  // namespace proxqn
