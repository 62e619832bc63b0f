#include "proxqn/scaled_prox.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <limits>

namespace proxqn {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Vector signs_of(const LowRankMetric& metric) {
  Vector s(metric.rank());
  for (Index j = 0; j < metric.rank(); ++j) s[j] = metric.signs()[static_cast<std::size_t>(j)];
  return s;
}

RootSolverReport trivial_report(Index r) {
  RootSolverReport report;
  report.alpha = Vector::Zero(r);
  return report;
}

void require_rank_one(const RootProblem& problem, const char* what) {
  if (problem.rank() != 1) throw std::invalid_argument(std::string(what) + ": requires r = 1");
}

}  // namespace

std::string to_string(RootMethod method) {
  switch (method) {
    case RootMethod::None: return "none";
    case RootMethod::Exact: return "exact";
    case RootMethod::Bisection: return "bisection";
    case RootMethod::SemismoothNewton: return "ssnewton";
    case RootMethod::ClosedForm: return "closed_form";
    case RootMethod::GroupBreakpoint: return "group";
    case RootMethod::Nested: return "nested";
    case RootMethod::FixedPoint: return "fixed_point";
  }
  return "unknown";
}

std::string to_string(RootFinderChoice choice) {
  switch (choice) {
    case RootFinderChoice::Auto: return "auto";
    case RootFinderChoice::Exact: return "exact";
    case RootFinderChoice::Bisection: return "bisection";
    case RootFinderChoice::SemismoothNewton: return "ssnewton";
    case RootFinderChoice::ClosedForm: return "closed-form";
    case RootFinderChoice::GroupBreakpoint: return "group";
    case RootFinderChoice::Nested: return "nested";
  }
  return "unknown";
}

RootFinderChoice parse_root_finder(const std::string& name) {
  if (name == "auto") return RootFinderChoice::Auto;
  if (name == "exact") return RootFinderChoice::Exact;
  if (name == "bisection") return RootFinderChoice::Bisection;
  if (name == "ssnewton" || name == "newton") return RootFinderChoice::SemismoothNewton;
  if (name == "closed-form") return RootFinderChoice::ClosedForm;
  if (name == "group") return RootFinderChoice::GroupBreakpoint;
  if (name == "nested") return RootFinderChoice::Nested;
  throw std::invalid_argument("unknown root finder '" + name + "'");
}

// ---------------------------------------------------------------------------
// RootProblem

RootProblem::RootProblem(const LowRankMetric& metric, const ProxOperator& prox, Vector x, double kappa)
    : metric_(&metric), prox_(&prox), x_(std::move(x)), kappa_(kappa) {
  require_same_size(metric.dim(), x_.size(), "root problem point");
  if (!(kappa > 0.0)) throw std::invalid_argument("root problem: kappa must be positive");
  const auto s = metric.uniform_sign();
  sign_ = s ? *s : 0;
  correction_ = metric.diag().cwiseInverse().asDiagonal() * metric.factors() *
                signs_of(metric).asDiagonal();
}

Vector RootProblem::shifted_point(const Vector& alpha) const {
  require_same_size(rank(), alpha.size(), "root problem alpha");
  return x_ - correction_ * alpha;
}

Vector RootProblem::primal(const Vector& alpha) const {
  return prox_->prox(shifted_point(alpha), metric_->diag(), kappa_);
}

Vector RootProblem::evaluate(const Vector& alpha, Vector& primal_out) const {
  primal_out = primal(alpha);
  return metric_->factors().transpose() * (x_ - primal_out) + alpha;
}

Vector RootProblem::evaluate(const Vector& alpha) const {
  Vector p;
  return evaluate(alpha, p);
}

double RootProblem::evaluate_scalar(double alpha) const {
  return evaluate(Vector::Constant(1, alpha))[0];
}

Matrix RootProblem::jacobian(const Vector& alpha) const {
  const Vector y = shifted_point(alpha);
  const Index r = rank();
  Matrix jw(dim(), r);
  for (Index j = 0; j < r; ++j) {
    jw.col(j) = prox_->jacobian_apply(y, metric_->diag(), kappa_, correction_.col(j));
  }
  Matrix g = metric_->factors().transpose() * jw;
  g.diagonal().array() += 1.0;
  return g;
}

double RootProblem::monotonicity_modulus() const {
  if (sign_ > 0) return 1.0;
  if (sign_ < 0) return 1.0 - metric_->scaled_factor_norm_sq();
  return std::numeric_limits<double>::quiet_NaN();
}

// ---------------------------------------------------------------------------
// Bound and bisection

double root_bound(const RootProblem& problem) {
  require_rank_one(problem, "root bound");
  const Vector u = problem.metric().factors().col(0);
  double prox0_norm = 0.0;
  if (!problem.prox().zero_in_argmin()) {
    // prox^V(0) from an auxiliary problem at x = 0, bracketed through strong
    // monotonicity: |a* - a| <= |L(a)| / c.
    RootProblem at_zero(problem.metric(), problem.prox(), Vector::Zero(problem.dim()), problem.kappa());
    const double l0 = at_zero.evaluate_scalar(0.0);
    double alpha_star = 0.0;
    if (l0 != 0.0) {
      const double radius = std::abs(l0) / at_zero.monotonicity_modulus() * (1.0 + 1e-10) + 1e-300;
      const double lo = l0 > 0.0 ? -radius : 0.0;
      const double hi = l0 > 0.0 ? 0.0 : radius;
      alpha_star = root_bisection_bracket(at_zero, lo, hi, 1e-15 * (1.0 + radius)).alpha[0];
    }
    prox0_norm = at_zero.primal(Vector::Constant(1, alpha_star)).norm();
  }
  return u.norm() * (2.0 * problem.x().norm() + prox0_norm);
}

RootSolverReport root_bisection_bracket(const RootProblem& problem, double lo, double hi, double eps) {
  require_rank_one(problem, "bisection");
  if (!(eps > 0.0)) throw std::invalid_argument("bisection: eps must be positive");
  if (lo > hi) throw std::invalid_argument("bisection: empty bracket");
  const double f_lo = problem.evaluate_scalar(lo);
  const double f_hi = problem.evaluate_scalar(hi);
  if (f_lo > 0.0 || f_hi < 0.0) {
    throw RootFindingError("bisection: L has no sign change on [" + std::to_string(lo) + ", " +
                           std::to_string(hi) + "] (L = " + std::to_string(f_lo) + ", " +
                           std::to_string(f_hi) + ")");
  }
  RootSolverReport report;
  report.method = RootMethod::Bisection;
  double previous = 0.0;
  double alpha = 0.5 * (lo + hi);
  for (int k = 0; k < 2000; ++k) {
    alpha = 0.5 * (lo + hi);
    const double value = problem.evaluate_scalar(alpha);
    report.residual_history.push_back(std::abs(value));
    report.iterations = k + 1;
    if (value > 0.0) hi = alpha;
    else lo = alpha;
    if (k > 1 && std::abs(alpha - previous) < eps) break;
    if (k > 1 && alpha == previous) break;  // bracket exhausted in floating point
    previous = alpha;
  }
  report.alpha = Vector::Constant(1, alpha);
  report.residual = std::abs(problem.evaluate_scalar(alpha));
  return report;
}

RootSolverReport root_bisection(const RootProblem& problem, double eps) {
  require_rank_one(problem, "bisection");
  if (problem.sign() == 0) throw std::invalid_argument("bisection: requires a uniform sign");
  const double beta = root_bound(problem);
  if (beta == 0.0) {
    RootSolverReport report = trivial_report(1);
    report.method = RootMethod::Bisection;
    report.residual = std::abs(problem.evaluate_scalar(0.0));
    return report;
  }
  return root_bisection_bracket(problem, -beta, beta, eps);
}

// ---------------------------------------------------------------------------
// Exact piecewise-affine root

RootSolverReport root_exact_piecewise_affine(const RootProblem& problem) {
  require_rank_one(problem, "exact root");
  const ProxOperator& h = problem.prox();
  if (!h.has_descriptor()) throw std::invalid_argument("exact root: operator has no descriptor");
  const double sigma = problem.sign();
  const Vector& d = problem.metric().diag();
  const Vector u = problem.metric().factors().col(0);
  const Vector& x = problem.x();
  const double kappa = problem.kappa();
  const Index n = problem.dim();

  // L(alpha) = u^T (x - p(alpha)) + alpha is piecewise affine in alpha.
  // Coordinate i sees z_i = x_i - alpha r_i, r_i = sigma u_i / d_i; on a
  // piece z -> s z + c it contributes alpha s u_i r_i + u_i ((1 - s) x_i - c).
  // Start from the piece at alpha -> -inf and record, per breakpoint, the
  // change of slope and intercept when alpha crosses it upwards.
  struct Kink {
    double t;
    double da;
    double db;
  };
  double agg_a = 1.0;
  double agg_b = 0.0;
  std::vector<Kink> kinks;
  kinks.reserve(static_cast<std::size_t>(2 * n));
  for (Index i = 0; i < n; ++i) {
    if (u[i] == 0.0) continue;
    const double r = sigma * u[i] / d[i];
    const PiecewiseAffine pa = h.descriptor(i, d[i], kappa);
    auto slope = [&](int k) { return pa.slopes[static_cast<std::size_t>(k)] * u[i] * r; };
    auto offset = [&](int k) {
      const auto j = static_cast<std::size_t>(k);
      return u[i] * ((1.0 - pa.slopes[j]) * x[i] - pa.intercepts[j]);
    };
    // r > 0: z decreases with alpha, so segments are visited last to first.
    const int first = r > 0.0 ? pa.count : 0;
    agg_a += slope(first);
    agg_b += offset(first);
    for (int j = 0; j < pa.count; ++j) {
      const int before = r > 0.0 ? j + 1 : j;
      const int after = r > 0.0 ? j : j + 1;
      kinks.push_back({(x[i] - pa.breakpoints[static_cast<std::size_t>(j)]) / r, slope(after) - slope(before),
                       offset(after) - offset(before)});
    }
  }

  // Median selection on the kinks inside (lo, hi); kinks at or below lo are
  // folded into agg, kinks at or above hi dropped. O(n) expected overall.
  RootSolverReport report;
  report.method = RootMethod::Exact;
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  auto begin = kinks.begin();
  auto end = kinks.end();
  while (begin != end) {
    const auto mid = begin + (end - begin) / 2;
    std::nth_element(begin, mid, end, [](const Kink& a, const Kink& b) { return a.t < b.t; });
    const double pivot = mid->t;
    double slope = agg_a;
    double offset = agg_b;
    for (auto it = begin; it != end; ++it) {
      if (it->t <= pivot) {
        slope += it->da;
        offset += it->db;
      }
    }
    const double value = slope * pivot + offset;
    ++report.iterations;
    if (value == 0.0) {
      report.alpha = Vector::Constant(1, pivot);
      report.residual = std::abs(problem.evaluate_scalar(pivot));
      return report;
    }
    (value < 0.0 ? lo : hi) = pivot;
    auto keep = begin;
    for (auto it = begin; it != end; ++it) {
      if (it->t <= lo) {
        agg_a += it->da;
        agg_b += it->db;
      } else if (it->t < hi) {
        *keep++ = *it;
      }
    }
    end = keep;
  }

  if (!(agg_a > 0.0)) throw RootFindingError("exact root: non-positive slope on the bracketing piece");
  // Guard against rounding pushing the root just outside its piece.
  double alpha = std::clamp(-agg_b / agg_a, lo, hi);
  double residual = problem.evaluate_scalar(alpha);
  // The aggregate sums many terms; one correction step on the same piece
  // removes the accumulated rounding when it helps.
  const double polished = std::clamp(alpha - residual / agg_a, lo, hi);
  const double polished_residual = problem.evaluate_scalar(polished);
  if (std::abs(polished_residual) < std::abs(residual)) {
    alpha = polished;
    residual = polished_residual;
  }
  report.alpha = Vector::Constant(1, alpha);
  report.residual = std::abs(residual);
  return report;
}

// ---------------------------------------------------------------------------
// Semi-smooth Newton

namespace {

// Minimal-residual iteration for G delta = rhs, stopped at relative residual eta.
Vector inexact_solve(const Matrix& g, const Vector& rhs, double eta) {
  Vector delta = Vector::Zero(rhs.size());
  Vector res = rhs;
  const double target = eta * rhs.norm();
  for (int it = 0; it < 100 && res.norm() > target; ++it) {
    const Vector gr = g * res;
    const double denom = gr.squaredNorm();
    if (denom == 0.0) break;
    const double step = gr.dot(res) / denom;
    delta += step * res;
    res -= step * gr;
  }
  if (res.norm() > target) delta = g.partialPivLu().solve(rhs);
  return delta;
}

}  // namespace

RootSolverReport root_fixed_point(const RootProblem& problem, const Vector& alpha0, double tol,
                                  int max_iter) {
  const double c = problem.monotonicity_modulus();
  if (!(c > 0.0)) throw std::invalid_argument("fixed point: requires a uniform-sign metric");
  const double lip = problem.lipschitz_bound();
  const double step = c / (lip * lip);
  RootSolverReport report;
  report.method = RootMethod::FixedPoint;
  Vector alpha = alpha0;
  Vector value = problem.evaluate(alpha);
  int k = 0;
  while (value.norm() > tol && k < max_iter) {
    alpha -= step * value;
    value = problem.evaluate(alpha);
    ++k;
  }
  report.alpha = alpha;
  report.iterations = k;
  report.residual = value.norm();
  report.converged = report.residual <= tol;
  return report;
}

constexpr int kNewtonMaxHalvings = 30;

RootSolverReport root_semismooth_newton(const RootProblem& problem, const NewtonOptions& options) {
  const Index r = problem.rank();
  if (r == 0) return trivial_report(0);
  Vector alpha = options.alpha0 ? *options.alpha0 : Vector::Zero(r);
  require_same_size(r, alpha.size(), "newton start");
  const double scale = std::max(1.0, (problem.metric().factors().transpose() * problem.x()).lpNorm<Eigen::Infinity>());
  const double tol = options.absolute_tol ? options.tol : options.tol * scale;
  double c = problem.monotonicity_modulus();
  if (!(c > 0.0)) c = 1e-8;

  RootSolverReport report;
  report.method = RootMethod::SemismoothNewton;
  report.converged = false;
  Vector best_alpha = alpha;
  double best_res = kInf;
  Vector value = problem.evaluate(alpha);
  int k = 0;
  for (;; ++k) {
    const double res = value.norm();
    report.residual_history.push_back(res);
    if (!std::isfinite(res)) break;
    if (res < best_res) {
      best_res = res;
      best_alpha = alpha;
    }
    if (res <= tol) {
      report.converged = true;
      break;
    }
    if (k >= options.max_iter) break;
    Matrix g = problem.jacobian(alpha);
    Eigen::FullPivLU<Matrix> lu(g);
    const double pivot_ratio = lu.maxPivot() > 0.0
                                   ? std::abs(lu.matrixLU().diagonal().cwiseAbs().minCoeff()) / lu.maxPivot()
                                   : 0.0;
    if (lu.rank() < r || pivot_ratio < 1e-14) {
      g.diagonal().array() += c;
      report.regularized = true;
    }
    const Vector delta = options.eta > 0.0 ? inexact_solve(g, -value, options.eta)
                                           : Vector(g.fullPivLu().solve(-value));
    if (!delta.allFinite()) break;
    // Damping on ||L||: a no-op near the root, where full steps contract, but
    // it stops the cycling an undamped step can fall into on kinks far away.
    double theta = 1.0;
    Vector trial_value;
    bool accepted = false;
    for (int h = 0; h <= kNewtonMaxHalvings; ++h, theta *= 0.5) {
      trial_value = problem.evaluate(alpha + theta * delta);
      if (trial_value.norm() <= (1.0 - 1e-4 * theta) * res) {
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    alpha += theta * delta;
    value = trial_value;
  }
  report.iterations = k;
  report.alpha = report.converged ? alpha : best_alpha;
  report.residual = report.converged ? report.residual_history.back() : best_res;
  if (report.converged || !options.allow_fallback || problem.sign() == 0) return report;

  // Budget exhausted: fall back to a globally convergent method.
  RootSolverReport fallback;
  if (r == 1) {
    fallback = root_bisection(problem, 1e-15 * (1.0 + std::abs(best_alpha[0])));
  } else {
    fallback = root_fixed_point(problem, best_alpha, tol);
  }
  fallback.fallback_used = true;
  fallback.iterations += report.iterations;
  fallback.residual_history.insert(fallback.residual_history.begin(), report.residual_history.begin(),
                                   report.residual_history.end());
  fallback.converged = fallback.residual <= std::max(tol, 1e-9 * scale);
  return fallback;
}

// ---------------------------------------------------------------------------
// Affine constraint: L is affine, one closed-form step.

RootSolverReport root_affine_closed_form(const RootProblem& problem) {
  require_rank_one(problem, "closed form");
  const auto* affine = dynamic_cast<const AffineProx*>(&problem.prox());
  if (affine == nullptr) throw std::invalid_argument("closed form: requires an affine constraint");
  const double sigma = problem.sign();
  const Vector& d = problem.metric().diag();
  const Vector u = problem.metric().factors().col(0);
  const Vector& x = problem.x();
  const Vector p0 = affine->prox(x, d, problem.kappa());
  const Vector proj = affine->jacobian_apply(x, d, problem.kappa(), u.cwiseQuotient(d));
  const double denom = 1.0 + sigma * u.dot(proj);
  if (!(denom > 0.0)) throw RootFindingError("closed form: non-positive denominator");
  RootSolverReport report;
  report.method = RootMethod::ClosedForm;
  report.alpha = Vector::Constant(1, -u.dot(x - p0) / denom);
  report.residual = std::abs(problem.evaluate_scalar(report.alpha[0]));
  return report;
}

// ---------------------------------------------------------------------------
// Group l1-l2 breakpoint search

namespace {

struct BlockStats {
  double xx, xu, uu, d, t;
};

class GroupScalarMap {
 public:
  GroupScalarMap(const RootProblem& problem, const GroupL2Prox& group) : sigma_(problem.sign()) {
    const Vector& d = problem.metric().diag();
    group.check_block_constant(d);
    const Vector u = problem.metric().factors().col(0);
    const Vector& x = problem.x();
    for (const Block& b : group.block_list()) {
      const auto xb = x.segment(b.start, b.size);
      const auto ub = u.segment(b.start, b.size);
      const double db = d[b.start];
      stats_.push_back({xb.squaredNorm(), xb.dot(ub), ub.squaredNorm(), db,
                        problem.kappa() * group.lambda() / db});
    }
  }

  /// Returns L(alpha) and stores L'(alpha) in slope.
  double operator()(double alpha, double& slope) const {
    double value = alpha;
    slope = 1.0;
    for (const BlockStats& s : stats_) {
      double n2 = s.xx - 2.0 * sigma_ * alpha * s.xu / s.d + alpha * alpha * s.uu / (s.d * s.d);
      n2 = std::max(n2, 0.0);
      const double norm = std::sqrt(n2);
      value += s.xu;
      if (norm > s.t) {
        const double w = s.xu - sigma_ * alpha * s.uu / s.d;
        const double shrink = 1.0 - s.t / norm;
        value -= shrink * w;
        slope += sigma_ * (s.t * w * w / (s.d * norm * norm * norm) + shrink * s.uu / s.d);
      }
    }
    return value;
  }

  std::vector<double> breakpoints(double kappa_lambda) const {
    std::vector<double> out;
    for (const BlockStats& s : stats_) {
      if (s.uu == 0.0) continue;
      // ||d x_b - alpha u_b||^2 = (kappa lambda)^2 as a quadratic in alpha.
      const double half_b = sigma_ * s.d * s.xu;
      const double disc = half_b * half_b - s.uu * (s.d * s.d * s.xx - kappa_lambda * kappa_lambda);
      if (disc < 0.0) continue;
      const double root = std::sqrt(disc);
      out.push_back((half_b - root) / s.uu);
      out.push_back((half_b + root) / s.uu);
    }
    return out;
  }

 private:
  double sigma_;
  std::vector<BlockStats> stats_;
};

}  // namespace

RootSolverReport root_group_breakpoint(const RootProblem& problem) {
  require_rank_one(problem, "group root");
  if (problem.sign() == 0) throw std::invalid_argument("group root: requires a uniform sign");
  const auto* group = dynamic_cast<const GroupL2Prox*>(&problem.prox());
  if (group == nullptr) throw std::invalid_argument("group root: requires a group l1-l2 operator");
  const GroupScalarMap map(problem, *group);
  std::vector<double> breaks = map.breakpoints(problem.kappa() * group->lambda());
  std::sort(breaks.begin(), breaks.end());

  RootSolverReport report;
  report.method = RootMethod::GroupBreakpoint;
  double slope = 0.0;
  std::ptrdiff_t lo = -1;
  auto hi = static_cast<std::ptrdiff_t>(breaks.size());
  double f_lo = -kInf;
  double f_hi = kInf;
  while (hi - lo > 1) {
    const std::ptrdiff_t mid = lo + (hi - lo) / 2;
    const double value = map(breaks[static_cast<std::size_t>(mid)], slope);
    ++report.iterations;
    if (value == 0.0) {
      report.alpha = Vector::Constant(1, breaks[static_cast<std::size_t>(mid)]);
      report.residual = std::abs(problem.evaluate_scalar(report.alpha[0]));
      return report;
    }
    if (value < 0.0) {
      lo = mid;
      f_lo = value;
    } else {
      hi = mid;
      f_hi = value;
    }
  }

  // Finite bracket on the smooth piece; unbounded ends are closed using
  // |alpha* - a| <= |L(a)| / c.
  const double c = problem.monotonicity_modulus();
  double a_lo = lo >= 0 ? breaks[static_cast<std::size_t>(lo)] : 0.0;
  double a_hi = hi < static_cast<std::ptrdiff_t>(breaks.size()) ? breaks[static_cast<std::size_t>(hi)] : 0.0;
  if (lo < 0 && hi >= static_cast<std::ptrdiff_t>(breaks.size())) {
    const double f0 = map(0.0, slope);
    const double radius = std::abs(f0) / c * (1.0 + 1e-10) + 1e-300;
    a_lo = f0 > 0.0 ? -radius : 0.0;
    a_hi = f0 > 0.0 ? 0.0 : radius;
  } else if (lo < 0) {
    a_lo = a_hi - std::abs(f_hi) / c * (1.0 + 1e-10) - 1e-300;
  } else if (hi >= static_cast<std::ptrdiff_t>(breaks.size())) {
    a_hi = a_lo + std::abs(f_lo) / c * (1.0 + 1e-10) + 1e-300;
  }

  double alpha = 0.5 * (a_lo + a_hi);
  const double tol = 1e-12;
  for (int it = 0; it < 200; ++it) {
    const double value = map(alpha, slope);
    ++report.iterations;
    if (std::abs(value) <= tol) break;
    if (value < 0.0) a_lo = alpha;
    else a_hi = alpha;
    double next = alpha - value / slope;
    if (!(next > a_lo && next < a_hi)) next = 0.5 * (a_lo + a_hi);  // safeguard
    if (next == alpha || a_hi - a_lo <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(a_lo), std::abs(a_hi))) {
      alpha = next;
      break;
    }
    alpha = next;
  }
  report.alpha = Vector::Constant(1, alpha);
  report.residual = std::abs(problem.evaluate_scalar(alpha));
  return report;
}

}  // namespace proxqn
