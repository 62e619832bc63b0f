#pragma once

// Shared plumbing for the solver loops (not installed).

#include "proxqn/solver.hpp"

#include <chrono>
#include <cmath>
#include <optional>
#include <string>

namespace proxqn::detail {

class RunRecorder {
 public:
  RunRecorder(std::string solver, const ProblemSpec& problem, const SolverOptions& options)
      : problem_(problem), options_(options), start_(std::chrono::steady_clock::now()) {
    result.solver = std::move(solver);
  }

  double elapsed() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

  void record(int iter, double objective, double step_norm) {
    if (!options_.record_trace) return;
    TraceRecord r;
    r.iter = iter;
    r.objective = objective;
    if (problem_.f_star) r.obj_err = objective - *problem_.f_star;
    r.step_norm = step_norm;
    r.seconds = elapsed();
    result.trace.push_back(r);
  }

  /// Target or time budget reached?
  std::optional<Termination> check_budgets(double objective) const {
    if (problem_.f_star && objective - *problem_.f_star <= options_.target_error) {
      return Termination::TargetReached;
    }
    if (elapsed() > options_.time_budget) return Termination::TimeBudget;
    return std::nullopt;
  }

  void finish(const Vector& x, double objective, int iterations, Termination termination, std::string message) {
    result.x = x;
    result.objective = objective;
    result.iterations = iterations;
    result.termination = termination;
    result.message = std::move(message);
    result.seconds = elapsed();
  }

  SolverResult result;

 private:
  const ProblemSpec& problem_;
  const SolverOptions& options_;
  std::chrono::steady_clock::time_point start_;
};

/// options.x0 (or 0), moved into dom h by a Euclidean prox when needed.
inline Vector starting_point(const ProblemSpec& problem, const SolverOptions& options) {
  Vector x = options.x0 ? *options.x0 : Vector::Zero(problem.dim);
  require_same_size(problem.dim, x.size(), "starting point");
  if (!std::isfinite(problem.objective(x))) x = problem.h->prox(x, 1.0);
  return x;
}

inline bool diverged(double objective, double initial) {
  return !std::isfinite(objective) || objective > initial + 1e8 * (1.0 + std::abs(initial));
}

}  // namespace proxqn::detail
