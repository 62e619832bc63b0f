#pragma once

#include "proxqn/prox.hpp"
#include "proxqn/quasi_newton.hpp"
#include "proxqn/scaled_prox.hpp"

#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace proxqn {

/// min_x F(x) = f(x) + h(x) with f smooth.
struct ProblemSpec {
  Index dim = 0;
  std::function<double(const Vector&)> f;
  std::function<Vector(const Vector&)> grad;
  ProxPtr h;
  std::optional<double> mu;         // strong convexity modulus of f
  std::optional<double> lipschitz;  // Lipschitz constant of grad f
  std::optional<Vector> x_star;
  std::optional<double> f_star;

  double objective(const Vector& x) const { return f(x) + h->value(x); }
  void validate() const;
};

enum class LineSearchMode { None, Backtracking };

enum class Termination { Converged, TargetReached, MaxIterations, TimeBudget, Stagnation, Diverged, Failed };

std::string to_string(Termination termination);
std::string to_string(LineSearchMode mode);
LineSearchMode parse_line_search(const std::string& name);

struct TraceRecord {
  int iter = 0;
  double objective = 0.0;
  double obj_err = std::numeric_limits<double>::quiet_NaN();  // F - F*, when F* is known
  double step_norm = 0.0;                                     // ||p_k||_inf
  double seconds = 0.0;
};

/// Iterate, gradient, last curvature pair and metric of the quasi-Newton loop.
struct SolverState {
  Vector x;
  Vector grad;
  double objective = 0.0;
  std::optional<QNPair> pair;
  std::optional<QNMetric> metric;
  double kappa = 1.0;
  int iter = 0;
  std::optional<Vector> alpha;  // last root, for warm starts
};

/// Snapshot handed to the observer after every accepted iteration.
struct IterationInfo {
  int iter = 0;
  const Vector* x = nullptr;  // x_k after the update
  const QNMetric* metric = nullptr;  // H_k, B_k used for the step
  const QNPair* pair = nullptr;      // pair used to build the metric (null at k = 1)
  double kappa = 0.0;
  double step = 1.0;  // line-search t
  double objective = 0.0;
};

struct SolverOptions {
  int max_iter = 10000;
  double tol = 1e-10;  // on ||p_k||_inf
  double time_budget = std::numeric_limits<double>::infinity();  // seconds
  /// Stop once F - F* <= target (needs F*); disabled by default.
  double target_error = -std::numeric_limits<double>::infinity();

  LineSearchMode line_search = LineSearchMode::Backtracking;
  double ls_sigma = 1e-4;
  int ls_max_halvings = 30;

  double kappa = 1.0;  // prox step kappa_k, constant
  QNConfig qn;
  std::optional<double> tau0;  // first-iteration H_0 = tau0 Id; default 1/L or 1

  std::optional<Vector> x0;
  ScaledProxOptions prox;
  bool warm_start = true;

  int fista_restart = 1000;
  int nonmonotone_memory = 10;
  bool record_trace = true;

  std::function<void(const IterationInfo&)> observer;
};

struct SolverResult {
  std::string solver;
  Vector x;
  double objective = 0.0;
  int iterations = 0;
  Termination termination = Termination::MaxIterations;
  std::string message;
  std::vector<TraceRecord> trace;
  int skipped_updates = 0;
  int prox_fallbacks = 0;
  double seconds = 0.0;
};

/// Candidate x_bar = prox^B_{kappa h}(x - kappa H grad).
ScaledProxResult fb_step(const ProblemSpec& problem, const Vector& x, const Vector& grad,
                         const QNMetric& metric, double kappa, const ScaledProxOptions& options = {});

struct LineSearchResult {
  double t = 1.0;
  double objective = 0.0;  // F(x + t p)
  int halvings = 0;
  bool stagnated = false;
};

inline constexpr double kLineSearchUlps = 8.0;

/// t = 1 (mode None) or the largest t in {1, 1/2, ...} with
/// F(x + t p) <= F(x) - sigma t ||p||^2 / kappa + 8 eps |F(x)|; the last
/// term only absorbs round-off in F.
LineSearchResult line_search(const ProblemSpec& problem, const Vector& x, double fx, const Vector& p,
                             double kappa, LineSearchMode mode, double sigma = 1e-4, int max_halvings = 30);

SolverResult run_zero_sr1(const ProblemSpec& problem, const SolverOptions& options = {});
SolverResult run_zero_bfgs(const ProblemSpec& problem, const SolverOptions& options = {});

/// Proximal gradient with step 1/L (backtracking on L when unknown).
SolverResult run_ista(const ProblemSpec& problem, const SolverOptions& options = {});
/// FISTA with Barzilai-Borwein trial steps, backtracking and periodic momentum restart.
SolverResult run_fista_bb(const ProblemSpec& problem, const SolverOptions& options = {});
/// SpaRSA / spectral projected gradient: BB step with a non-monotone line search.
SolverResult run_spg_sparsa(const ProblemSpec& problem, const SolverOptions& options = {});
/// FISTA with step 1/L and gradient-based adaptive restart; used for references.
SolverResult run_fista_restart(const ProblemSpec& problem, const SolverOptions& options = {});

/// Ids: zero-sr1, zero-bfgs, ista, fista-bb, spg.
const std::vector<std::string>& solver_ids();
SolverResult run_solver(const std::string& id, const ProblemSpec& problem, const SolverOptions& options = {});

}  // namespace proxqn
