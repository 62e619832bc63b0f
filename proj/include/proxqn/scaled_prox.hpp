#pragma once

#include "proxqn/metric.hpp"
#include "proxqn/prox.hpp"

#include <optional>
#include <string>
#include <vector>

namespace proxqn {

enum class RootMethod { None, Exact, Bisection, SemismoothNewton, ClosedForm, GroupBreakpoint, Nested, FixedPoint };

enum class RootFinderChoice { Auto, Exact, Bisection, SemismoothNewton, ClosedForm, GroupBreakpoint, Nested };

std::string to_string(RootMethod method);
std::string to_string(RootFinderChoice choice);
/// Accepts auto, exact, bisection, ssnewton, closed-form, group, nested.
RootFinderChoice parse_root_finder(const std::string& name);

struct RootSolverReport {
  Vector alpha;
  double residual = 0.0;  // ||L(alpha)||
  int iterations = 0;
  RootMethod method = RootMethod::None;
  bool converged = true;
  bool fallback_used = false;
  bool regularized = false;  // a singular Newton system was shifted by c I
  std::vector<double> residual_history;
};

/// The r-dimensional root-finding problem behind the prox in
/// V = P + U S U^T (S = diag(signs)):
///
///   p(alpha) = prox^P_{kappa h}(x - P^{-1} U S alpha),
///   L(alpha) = U^T (x - p(alpha)) + alpha,
///
/// whose unique zero alpha* gives prox^V_{kappa h}(x) = p(alpha*). For a
/// uniform sign L is Lipschitz with constant 1 + ||P^{-1/2} U||^2 and strongly
/// monotone with modulus 1 (sign +) or 1 - ||P^{-1/2} U||^2 (sign -).
///
/// Holds references to the metric and the operator; both must outlive it.
class RootProblem {
 public:
  RootProblem(const LowRankMetric& metric, const ProxOperator& prox, Vector x, double kappa = 1.0);

  Index rank() const { return metric_->rank(); }
  Index dim() const { return metric_->dim(); }
  const LowRankMetric& metric() const { return *metric_; }
  const ProxOperator& prox() const { return *prox_; }
  const Vector& x() const { return x_; }
  double kappa() const { return kappa_; }
  /// +1 / -1 for a uniform sign, 0 for a mixed metric.
  int sign() const { return sign_; }

  /// The argument of the diagonal prox, x - P^{-1} U S alpha.
  Vector shifted_point(const Vector& alpha) const;
  Vector primal(const Vector& alpha) const;
  Vector evaluate(const Vector& alpha) const;
  Vector evaluate(const Vector& alpha, Vector& primal_out) const;
  double evaluate_scalar(double alpha) const;
  /// Generalized Jacobian I + U^T J P^{-1} U S with J from the operator.
  Matrix jacobian(const Vector& alpha) const;

  double lipschitz_bound() const { return 1.0 + metric_->scaled_factor_norm_sq(); }
  /// Strong-monotonicity modulus; NaN for mixed metrics (no such bound).
  double monotonicity_modulus() const;

 private:
  const LowRankMetric* metric_;
  const ProxOperator* prox_;
  Vector x_;
  double kappa_;
  int sign_;
  Matrix correction_;  // P^{-1} U S
};

/// Radius beta = ||u|| (2 ||x|| + ||prox^V(0)||) of an interval containing
/// the rank-1 root. prox^V(0) vanishes when 0 minimizes h; otherwise it is
/// computed by an auxiliary bracketed solve.
double root_bound(const RootProblem& problem);

/// Exact root for r = 1 and an operator with piecewise-affine descriptors:
/// locate the pair of breakpoints bracketing the root (median selection
/// instead of a full sort, O(N) expected), then solve the affine piece in
/// closed form.
RootSolverReport root_exact_piecewise_affine(const RootProblem& problem);

/// Bisection on [-beta, beta] for r = 1, stopping when two consecutive
/// midpoints differ by less than eps.
RootSolverReport root_bisection(const RootProblem& problem, double eps = 1e-10);

/// Bisection on a caller-provided bracket [lo, hi] with L(lo) <= 0 <= L(hi).
RootSolverReport root_bisection_bracket(const RootProblem& problem, double lo, double hi,
                                        double eps);

struct NewtonOptions {
  double tol = 1e-12;        // on ||L(alpha)||, scaled by max(1, ||U^T x||)
  bool absolute_tol = false;  // use tol as given, without scaling
  int max_iter = 50;
  double eta = 0.0;  // relative residual of the inner linear solve (0 = exact)
  std::optional<Vector> alpha0;
  bool allow_fallback = true;
};

/// Semi-smooth Newton on L. When the budget is exhausted it falls back to
/// bisection (r = 1) or a damped fixed-point iteration (uniform r >= 2); for
/// mixed metrics the report is returned unconverged and the caller decides.
RootSolverReport root_semismooth_newton(const RootProblem& problem, const NewtonOptions& options = {});

/// Damped fixed point alpha <- alpha - (c / Lip^2) L(alpha); uniform sign only.
RootSolverReport root_fixed_point(const RootProblem& problem, const Vector& alpha0, double tol,
                                  int max_iter = 100000);

/// Closed-form root for the indicator of {A z = b} with r = 1.
RootSolverReport root_affine_closed_form(const RootProblem& problem);

/// Group l1-l2 with r = 1 and block-constant P: breakpoints from per-block
/// quadratics, binary search over them, then safeguarded Newton on the
/// smooth piece. Every evaluation costs O(number of blocks).
RootSolverReport root_group_breakpoint(const RootProblem& problem);

struct ScaledProxOptions {
  RootFinderChoice finder = RootFinderChoice::Auto;
  double bisection_eps = 1e-12;
  NewtonOptions newton;
};

struct ScaledProxResult {
  Vector point;
  RootSolverReport report;
};

/// prox^V_{kappa h}(x) = argmin_z kappa h(z) + 1/2 ||x - z||_V^2.
ScaledProxResult scaled_prox(const LowRankMetric& metric, const ProxOperator& prox, const Vector& x,
                             double kappa = 1.0, const ScaledProxOptions& options = {});

/// Two-stage reduction for V = P + Q1 - Q2: the outer problem lives in the
/// metric (P + Q1) - Q2, each outer evaluation is a prox in P + Q1.
ScaledProxResult scaled_prox_nested(const LowRankMetric& metric, const ProxOperator& prox,
                                    const Vector& x, double kappa = 1.0,
                                    const ScaledProxOptions& options = {});

ScaledProxResult scaled_prox_affine_closed_form(const LowRankMetric& metric, const AffineProx& prox,
                                                const Vector& x, double kappa = 1.0);

ScaledProxResult scaled_prox_group_l1l2(const LowRankMetric& metric, const GroupL2Prox& prox,
                                        const Vector& x, double kappa = 1.0);

/// prox^V_{rho h*}(x) = x - rho V^{-1} prox^{V^{-1}}_{h/rho}(V x / rho), i.e.
/// the prox of the conjugate obtained from the prox of h in the inverse
/// metric.
ScaledProxResult scaled_prox_conjugate(const LowRankMetric& metric, const ProxOperator& prox,
                                       const Vector& x, double rho = 1.0,
                                       const ScaledProxOptions& options = {});

}  // namespace proxqn
