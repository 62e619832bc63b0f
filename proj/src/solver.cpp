#include "proxqn/solver.hpp"

#include "solver_detail.hpp"

#include <cmath>
#include <limits>

namespace proxqn {

std::string to_string(Termination termination) {
  switch (termination) {
    case Termination::Converged: return "converged";
    case Termination::TargetReached: return "target_reached";
    case Termination::MaxIterations: return "max_iterations";
    case Termination::TimeBudget: return "time_budget";
    case Termination::Stagnation: return "stagnation";
    case Termination::Diverged: return "diverged";
    case Termination::Failed: return "failed";
  }
  return "unknown";
}

std::string to_string(LineSearchMode mode) {
  return mode == LineSearchMode::None ? "none" : "backtracking";
}

LineSearchMode parse_line_search(const std::string& name) {
  if (name == "none") return LineSearchMode::None;
  if (name == "backtracking") return LineSearchMode::Backtracking;
  throw std::invalid_argument("unknown line search '" + name + "'");
}

void ProblemSpec::validate() const {
  if (dim <= 0) throw std::invalid_argument("problem: dimension must be positive");
  if (!f || !grad) throw std::invalid_argument("problem: f and grad are required");
  if (!h) throw std::invalid_argument("problem: h is required");
  if (auto n = h->fixed_dim()) require_same_size(dim, *n, "problem regularizer");
}

ScaledProxResult fb_step(const ProblemSpec& problem, const Vector& x, const Vector& grad,
                         const QNMetric& metric, double kappa, const ScaledProxOptions& options) {
  const Vector forward = x - kappa * metric.h.apply(grad);
  return scaled_prox(metric.b, *problem.h, forward, kappa, options);
}

LineSearchResult line_search(const ProblemSpec& problem, const Vector& x, double fx, const Vector& p,
                             double kappa, LineSearchMode mode, double sigma, int max_halvings) {
  LineSearchResult out;
  out.objective = problem.objective(x + p);
  if (mode == LineSearchMode::None) return out;
  const double decrease = sigma * p.squaredNorm() / kappa;
  // Near a minimizer the required decrease falls below the resolution of F;
  // differences within a few ulps of F(x) count as no increase.
  const double slack = kLineSearchUlps * std::numeric_limits<double>::epsilon() * std::abs(fx);
  double t = 1.0;
  for (int k = 0;; ++k) {
    if (out.objective <= fx - t * decrease + slack) {
      out.t = t;
      out.halvings = k;
      return out;
    }
    if (k == max_halvings) break;
    t *= 0.5;
    out.objective = problem.objective(x + t * p);
  }
  out.t = t;
  out.halvings = max_halvings;
  out.stagnated = true;
  return out;
}

namespace {

enum class Variant { SR1, BFGS };

SolverResult run_quasi_newton(const ProblemSpec& problem, const SolverOptions& options, Variant variant) {
  problem.validate();
  options.qn.validate();
  detail::RunRecorder rec(variant == Variant::SR1 ? "zero-sr1" : "zero-bfgs", problem, options);
  Vector x = detail::starting_point(problem, options);
  Vector g = problem.grad(x);
  double fx = problem.objective(x);
  const double f0 = fx;
  rec.record(0, fx, 0.0);

  const double tau0 = options.tau0 ? *options.tau0 : (problem.lipschitz ? 1.0 / *problem.lipschitz : 1.0);
  std::optional<QNPair> pair;
  std::optional<Vector> alpha_prev;
  int k = 1;
  for (; k <= options.max_iter; ++k) {
    QNMetric metric = !pair ? initial_metric(problem.dim, tau0)
                            : (variant == Variant::SR1 ? sr1_metric(*pair, options.qn, tau0)
                                                       : zbfgs_metric(*pair, options.qn, tau0));
    if (pair && metric.skipped) ++rec.result.skipped_updates;
    std::optional<QNPair> metric_pair;
    if (options.observer) metric_pair = pair;

    ScaledProxOptions prox_options = options.prox;
    if (options.warm_start && alpha_prev && alpha_prev->size() == metric.b.rank()) {
      prox_options.newton.alpha0 = *alpha_prev;
    }
    ScaledProxResult step;
    try {
      step = fb_step(problem, x, g, metric, options.kappa, prox_options);
    } catch (const std::exception& e) {
      rec.finish(x, fx, k - 1, Termination::Failed, "iteration " + std::to_string(k) + ": " + e.what());
      return rec.result;
    }
    if (step.report.fallback_used) ++rec.result.prox_fallbacks;
    alpha_prev = step.report.alpha;

    const Vector p = step.point - x;
    const double step_norm = p.lpNorm<Eigen::Infinity>();
    if (step_norm < options.tol) {
      const double f_bar = problem.objective(step.point);
      if (f_bar <= fx) {
        x = step.point;
        fx = f_bar;
      }
      rec.record(k, fx, step_norm);
      rec.finish(x, fx, k, Termination::Converged, "");
      return rec.result;
    }

    const LineSearchResult ls = line_search(problem, x, fx, p, options.kappa, options.line_search,
                                            options.ls_sigma, options.ls_max_halvings);
    if (ls.stagnated) {
      rec.finish(x, fx, k - 1, Termination::Stagnation, "line search found no sufficient decrease");
      return rec.result;
    }
    const Vector x_new = x + ls.t * p;
    const Vector g_new = problem.grad(x_new);
    pair = QNPair{x_new - x, g_new - g};
    x = x_new;
    g = g_new;
    fx = ls.objective;

    if (options.observer) {
      IterationInfo info;
      info.iter = k;
      info.x = &x;
      info.metric = &metric;
      info.pair = metric_pair ? &*metric_pair : nullptr;
      info.kappa = options.kappa;
      info.step = ls.t;
      info.objective = fx;
      options.observer(info);
    }
    rec.record(k, fx, step_norm);
    if (detail::diverged(fx, f0)) {
      rec.finish(x, fx, k, Termination::Diverged, "objective is not finite or exploded");
      return rec.result;
    }
    if (auto stop = rec.check_budgets(fx)) {
      rec.finish(x, fx, k, *stop, "");
      return rec.result;
    }
  }
  rec.finish(x, fx, options.max_iter, Termination::MaxIterations, "");
  return rec.result;
}

}  // namespace

SolverResult run_zero_sr1(const ProblemSpec& problem, const SolverOptions& options) {
  return run_quasi_newton(problem, options, Variant::SR1);
}

SolverResult run_zero_bfgs(const ProblemSpec& problem, const SolverOptions& options) {
  return run_quasi_newton(problem, options, Variant::BFGS);
}

}  // namespace proxqn
