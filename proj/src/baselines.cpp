// First-order baselines: ISTA, FISTA (BB step, restarts), SpaRSA/SPG.

#include "proxqn/solver.hpp"

#include "solver_detail.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

namespace proxqn {

namespace {

constexpr double kStepMin = 1e-30;
constexpr double kStepMax = 1e30;

// Sufficient-decrease test of the quadratic upper model, with a relative slack
// for round-off near convergence.
bool upper_model_holds(double f_new, double f_old, const Vector& grad, const Vector& diff, double step) {
  const double model = f_old + grad.dot(diff) + diff.squaredNorm() / (2.0 * step);
  return f_new <= model + 1e-12 * std::abs(f_old);
}

}  // namespace

SolverResult run_ista(const ProblemSpec& problem, const SolverOptions& options) {
  problem.validate();
  detail::RunRecorder rec("ista", problem, options);
  Vector x = detail::starting_point(problem, options);
  double fx = problem.objective(x);
  const double f0 = fx;
  rec.record(0, fx, 0.0);
  // Step 1/L; L only grows if the quadratic upper model fails (estimates of
  // L from power iteration approach it from below).
  double lip = problem.lipschitz ? *problem.lipschitz : 1.0;

  for (int k = 1; k <= options.max_iter; ++k) {
    const Vector g = problem.grad(x);
    const double f_smooth = problem.f(x);
    Vector x_new;
    for (int tries = 0;; ++tries) {
      x_new = problem.h->prox(x - g / lip, 1.0 / lip);
      if (upper_model_holds(problem.f(x_new), f_smooth, g, x_new - x, 1.0 / lip) || tries > 60) break;
      lip *= 2.0;
    }
    const double step_norm = (x_new - x).lpNorm<Eigen::Infinity>();
    x = x_new;
    fx = problem.objective(x);
    rec.record(k, fx, step_norm);
    if (step_norm < options.tol) {
      rec.finish(x, fx, k, Termination::Converged, "");
      return rec.result;
    }
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

SolverResult run_fista_bb(const ProblemSpec& problem, const SolverOptions& options) {
  problem.validate();
  detail::RunRecorder rec("fista-bb", problem, options);
  Vector x = detail::starting_point(problem, options);
  Vector y = x;
  double fx = problem.objective(x);
  const double f0 = fx;
  rec.record(0, fx, 0.0);
  double t = 1.0;
  double step = problem.lipschitz ? 1.0 / *problem.lipschitz : 1.0;
  Vector y_prev;
  Vector g_prev;

  for (int k = 1; k <= options.max_iter; ++k) {
    const Vector gy = problem.grad(y);
    const double fy = problem.f(y);
    if (y_prev.size() > 0) {
      const Vector s = y - y_prev;
      const double sy = s.dot(gy - g_prev);
      if (sy > 0.0) step = std::clamp(s.squaredNorm() / sy, kStepMin, kStepMax);
    }
    y_prev = y;
    g_prev = gy;

    Vector x_new;
    for (int tries = 0;; ++tries) {
      x_new = problem.h->prox(y - step * gy, step);
      if (upper_model_holds(problem.f(x_new), fy, gy, x_new - y, step) || tries > 60) break;
      step *= 0.5;
    }
    const double step_norm = (x_new - y).lpNorm<Eigen::Infinity>();
    const double f_new = problem.objective(x_new);
    const double t_new = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    y = x_new + ((t - 1.0) / t_new) * (x_new - x);
    x = x_new;
    t = t_new;
    // Periodic restart, plus a restart whenever the objective goes up: with
    // BB trial steps the step size is not monotone and momentum alone can
    // run away.
    if ((options.fista_restart > 0 && k % options.fista_restart == 0) || f_new > fx) {
      t = 1.0;
      y = x;
    }
    fx = f_new;
    rec.record(k, fx, step_norm);
    if (step_norm < options.tol) {
      rec.finish(x, fx, k, Termination::Converged, "");
      return rec.result;
    }
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

SolverResult run_spg_sparsa(const ProblemSpec& problem, const SolverOptions& options) {
  problem.validate();
  detail::RunRecorder rec("spg", problem, options);
  Vector x = detail::starting_point(problem, options);
  Vector g = problem.grad(x);
  double fx = problem.objective(x);
  const double f0 = fx;
  rec.record(0, fx, 0.0);
  double step = problem.lipschitz ? 1.0 / *problem.lipschitz : 1.0;
  std::deque<double> history{fx};
  const auto memory = static_cast<std::size_t>(std::max(1, options.nonmonotone_memory));

  for (int k = 1; k <= options.max_iter; ++k) {
    const double reference = *std::max_element(history.begin(), history.end());
    Vector x_new;
    double f_new = 0.0;
    bool accepted = false;
    for (int tries = 0; tries <= 60; ++tries) {
      x_new = problem.h->prox(x - step * g, step);
      f_new = problem.objective(x_new);
      const double sufficient = options.ls_sigma * 0.5 / step * (x_new - x).squaredNorm();
      if (f_new <= reference - sufficient + 1e-12 * std::abs(reference)) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    const double step_norm = (x_new - x).lpNorm<Eigen::Infinity>();
    if (!accepted) {
      rec.finish(x, fx, k - 1, Termination::Stagnation, "non-monotone line search failed");
      return rec.result;
    }
    const Vector g_new = problem.grad(x_new);
    const Vector s = x_new - x;
    const double sy = s.dot(g_new - g);
    step = sy > 0.0 ? std::clamp(s.squaredNorm() / sy, kStepMin, kStepMax)
                    : (problem.lipschitz ? 1.0 / *problem.lipschitz : std::min(step * 2.0, kStepMax));
    x = x_new;
    g = g_new;
    fx = f_new;
    history.push_back(fx);
    if (history.size() > memory) history.pop_front();
    rec.record(k, fx, step_norm);
    if (step_norm < options.tol) {
      rec.finish(x, fx, k, Termination::Converged, "");
      return rec.result;
    }
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

SolverResult run_fista_restart(const ProblemSpec& problem, const SolverOptions& options) {
  problem.validate();
  detail::RunRecorder rec("fista-restart", problem, options);
  Vector x = detail::starting_point(problem, options);
  Vector y = x;
  double fx = problem.objective(x);
  rec.record(0, fx, 0.0);
  double lip = problem.lipschitz ? *problem.lipschitz : 1.0;
  double t = 1.0;

  for (int k = 1; k <= options.max_iter; ++k) {
    const Vector gy = problem.grad(y);
    const double fy = problem.f(y);
    Vector x_new;
    for (int tries = 0;; ++tries) {
      x_new = problem.h->prox(y - gy / lip, 1.0 / lip);
      if (upper_model_holds(problem.f(x_new), fy, gy, x_new - y, 1.0 / lip) || tries > 60) break;
      lip *= 2.0;
    }
    const double step_norm = (x_new - y).lpNorm<Eigen::Infinity>();
    // Gradient-based adaptive restart.
    if ((y - x_new).dot(x_new - x) > 0.0) {
      t = 1.0;
      y = x_new;
    } else {
      const double t_new = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
      y = x_new + ((t - 1.0) / t_new) * (x_new - x);
      t = t_new;
    }
    x = x_new;
    fx = problem.objective(x);
    rec.record(k, fx, step_norm);
    if (step_norm < options.tol) {
      rec.finish(x, fx, k, Termination::Converged, "");
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

const std::vector<std::string>& solver_ids() {
  static const std::vector<std::string> ids = {"zero-sr1", "zero-bfgs", "ista", "fista-bb", "spg"};
  return ids;
}

SolverResult run_solver(const std::string& id, const ProblemSpec& problem, const SolverOptions& options) {
  if (id == "zero-sr1") return run_zero_sr1(problem, options);
  if (id == "zero-bfgs") return run_zero_bfgs(problem, options);
  if (id == "ista") return run_ista(problem, options);
  if (id == "fista-bb") return run_fista_bb(problem, options);
  if (id == "spg") return run_spg_sparsa(problem, options);
  if (id == "fista-restart") return run_fista_restart(problem, options);
  throw std::invalid_argument("unknown solver '" + id + "'");
}

}  // namespace proxqn
