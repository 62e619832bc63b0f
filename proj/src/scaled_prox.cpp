#include "proxqn/scaled_prox.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <functional>
#include <limits>

namespace proxqn {

namespace {

// alpha* = U^T (p - x) for the unified system; recomputed from the final
// point so that every path reports the same coordinates.
RootSolverReport finish_report(const LowRankMetric& metric, const ProxOperator& prox, const Vector& x,
                               double kappa, const Vector& point, RootSolverReport report) {
  if (metric.rank() == 0) return report;
  report.alpha = metric.factors().transpose() * (point - x);
  const RootProblem problem(metric, prox, x, kappa);
  report.residual = problem.evaluate(report.alpha).norm();
  return report;
}

bool block_constant(const GroupL2Prox& group, const Vector& d) {
  try {
    group.check_block_constant(d);
    return true;
  } catch (const std::invalid_argument&) {
    return false;
  }
}

// Illinois-modified regula falsi on [a, b] with f(a) < 0 < f(b).
double bracketed_root(const std::function<double(double)>& f, double a, double fa, double b, double fb,
                      double ftol, int& evaluations) {
  int side = 0;
  double best = std::abs(fa) < std::abs(fb) ? a : b;
  double best_val = std::min(std::abs(fa), std::abs(fb));
  for (int it = 0; it < 300; ++it) {
    double c = (a * fb - b * fa) / (fb - fa);
    if (!(c > a && c < b)) c = 0.5 * (a + b);
    const double fc = f(c);
    ++evaluations;
    if (std::abs(fc) < best_val) {
      best_val = std::abs(fc);
      best = c;
    }
    if (std::abs(fc) <= ftol) return c;
    if (fc < 0.0) {
      a = c;
      fa = fc;
      if (side == -1) fb *= 0.5;
      side = -1;
    } else {
      b = c;
      fb = fc;
      if (side == 1) fa *= 0.5;
      side = 1;
    }
    if (b - a <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(a), std::abs(b))) break;
  }
  return best;
}

}  // namespace

ScaledProxResult scaled_prox(const LowRankMetric& metric, const ProxOperator& prox, const Vector& x,
                             double kappa, const ScaledProxOptions& options) {
  require_same_size(metric.dim(), x.size(), "scaled prox point");
  if (metric.rank() == 0) {
    ScaledProxResult out;
    out.point = prox.prox(x, metric.diag(), kappa);
    out.report.alpha = Vector::Zero(0);
    return out;
  }

  const RootProblem problem(metric, prox, x, kappa);
  const Index r = metric.rank();
  RootFinderChoice choice = options.finder;
  if (choice == RootFinderChoice::Auto) {
    const auto* group = dynamic_cast<const GroupL2Prox*>(&prox);
    if (metric.is_mixed()) choice = RootFinderChoice::SemismoothNewton;
    else if (r == 1 && prox.has_descriptor()) choice = RootFinderChoice::Exact;
    else if (r == 1 && group != nullptr && block_constant(*group, metric.diag())) choice = RootFinderChoice::GroupBreakpoint;
    else if (r == 1 && prox.kind() == ProxKind::Affine) choice = RootFinderChoice::ClosedForm;
    else choice = RootFinderChoice::SemismoothNewton;
  }

  RootSolverReport report;
  switch (choice) {
    case RootFinderChoice::Exact: report = root_exact_piecewise_affine(problem); break;
    case RootFinderChoice::Bisection: report = root_bisection(problem, options.bisection_eps); break;
    case RootFinderChoice::ClosedForm: report = root_affine_closed_form(problem); break;
    case RootFinderChoice::GroupBreakpoint: report = root_group_breakpoint(problem); break;
    case RootFinderChoice::Nested: return scaled_prox_nested(metric, prox, x, kappa, options);
    case RootFinderChoice::SemismoothNewton:
    case RootFinderChoice::Auto: {
      report = root_semismooth_newton(problem, options.newton);
      if (!report.converged && metric.is_mixed() && options.newton.allow_fallback) {
        ScaledProxResult nested = scaled_prox_nested(metric, prox, x, kappa, options);
        nested.report.fallback_used = true;
        nested.report.iterations += report.iterations;
        return nested;
      }
      if (!report.converged) {
        throw RootFindingError("scaled prox: semi-smooth Newton did not converge (residual " +
                               std::to_string(report.residual) + ")");
      }
      break;
    }
  }
  ScaledProxResult out;
  out.point = problem.primal(report.alpha);
  out.report = std::move(report);
  return out;
}

ScaledProxResult scaled_prox_nested(const LowRankMetric& metric, const ProxOperator& prox,
                                    const Vector& x, double kappa, const ScaledProxOptions& options) {
  const Matrix plus = metric.factors_with_sign(1);
  const Matrix minus = metric.factors_with_sign(-1);
  ScaledProxOptions inner_options = options;
  inner_options.finder = RootFinderChoice::Auto;
  inner_options.newton.alpha0.reset();

  if (minus.cols() == 0 || plus.cols() == 0) {
    ScaledProxResult out = scaled_prox(metric, prox, x, kappa, inner_options);
    out.report.method = RootMethod::Nested;
    return out;
  }

  // Outer metric (P + Q1) - Q2; every outer evaluation is a prox in P + Q1.
  const LowRankMetric inner(metric.diag(), plus, 1);
  const MetricInverse inner_inv = inner.inverse();
  Matrix shift(metric.dim(), minus.cols());  // (P + Q1)^{-1} U2
  for (Index j = 0; j < minus.cols(); ++j) shift.col(j) = inner_inv.apply(minus.col(j));
  const Matrix gram = minus.transpose() * shift;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram, Eigen::EigenvaluesOnly);
  const double gram_norm = eig.eigenvalues().maxCoeff();
  const double c = 1.0 - gram_norm;
  const double lip = 1.0 + gram_norm;
  if (!(c > 0.0)) throw NotPositiveDefinite("nested prox: outer metric is not positive definite");

  int evaluations = 0;
  Vector last_point;
  auto outer = [&](const Vector& alpha) {
    last_point = scaled_prox(inner, prox, x + shift * alpha, kappa, inner_options).point;
    ++evaluations;
    return Vector(minus.transpose() * (x - last_point) + alpha);
  };

  const double scale = std::max(1.0, (minus.transpose() * x).lpNorm<Eigen::Infinity>());
  const double ftol = 1e-14 * scale;
  Vector alpha = Vector::Zero(minus.cols());
  Vector value = outer(alpha);
  if (minus.cols() == 1) {
    const double f0 = value[0];
    if (std::abs(f0) > ftol) {
      auto f = [&](double a) { return outer(Vector::Constant(1, a))[0]; };
      const double radius = std::abs(f0) / c * (1.0 + 1e-10) + 1e-300;
      double a = 0.0, b = 0.0, fa = f0, fb = f0;
      if (f0 > 0.0) {
        a = -radius;
        fa = f(a);
      } else {
        b = radius;
        fb = f(b);
      }
      double root = a;
      if (fa >= 0.0) root = a;
      else if (fb <= 0.0) root = b;
      else root = bracketed_root(f, a, fa, b, fb, ftol, evaluations);
      alpha[0] = root;
      value = outer(alpha);
    }
  } else {
    const double step = c / (lip * lip);
    for (int it = 0; it < 100000 && value.norm() > ftol; ++it) {
      alpha -= step * value;
      value = outer(alpha);
    }
  }

  ScaledProxResult out;
  out.point = last_point;
  out.report.method = RootMethod::Nested;
  out.report.iterations = evaluations;
  out.report = finish_report(metric, prox, x, kappa, out.point, out.report);
  return out;
}

ScaledProxResult scaled_prox_affine_closed_form(const LowRankMetric& metric, const AffineProx& prox,
                                                const Vector& x, double kappa) {
  ScaledProxOptions options;
  options.finder = RootFinderChoice::ClosedForm;
  return scaled_prox(metric, prox, x, kappa, options);
}

ScaledProxResult scaled_prox_group_l1l2(const LowRankMetric& metric, const GroupL2Prox& prox,
                                        const Vector& x, double kappa) {
  ScaledProxOptions options;
  options.finder = metric.rank() == 0 ? RootFinderChoice::Auto : RootFinderChoice::GroupBreakpoint;
  return scaled_prox(metric, prox, x, kappa, options);
}

ScaledProxResult scaled_prox_conjugate(const LowRankMetric& metric, const ProxOperator& prox,
                                       const Vector& x, double rho, const ScaledProxOptions& options) {
  if (!(rho > 0.0)) throw std::invalid_argument("conjugate prox: rho must be positive");
  const LowRankMetric inverse = metric.inverse().as_metric();
  ScaledProxResult dual = scaled_prox(inverse, prox, metric.apply(x) / rho, 1.0 / rho, options);
  ScaledProxResult out;
  out.point = x - rho * metric.inverse().apply(dual.point);
  out.report = std::move(dual.report);
  return out;
}

}  // namespace proxqn
