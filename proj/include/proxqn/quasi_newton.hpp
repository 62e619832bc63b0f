#pragma once

#include "proxqn/metric.hpp"

namespace proxqn {

/// Curvature pair s = x_k - x_{k-1}, y = grad f(x_k) - grad f(x_{k-1}).
struct QNPair {
  Vector s;
  Vector y;
};

struct BBSteps {
  double bb1 = 0.0;  // ||s||^2 / <s, y>
  double bb2 = 0.0;  // <s, y> / ||y||^2
};

/// Barzilai-Borwein step lengths. Throws std::domain_error when <s, y> <= 0.
BBSteps bb_stepsizes(const QNPair& pair);

/// Parameters shared by the zero-memory SR1 and BFGS metrics.
struct QNConfig {
  double gamma = 0.8;
  double tau_min = 1e-8;
  double tau_max = 1e8;
  double skip_tol = 1e-8;

  void validate() const;
};
using SR1Config = QNConfig;

/// H_k (inverse Hessian approximation) and the prox metric B_k = H_k^{-1}.
struct QNMetric {
  LowRankMetric h;
  LowRankMetric b;
  double tau = 1.0;      // scalar step length after clamping
  bool skipped = false;  // low-rank update skipped; H is a multiple of Id
  bool clamped = false;  // tau_BB2 was projected onto [tau_min, tau_max]
};

/// H_0 = tau Id for the first iteration, where no pair exists yet.
QNMetric initial_metric(Index n, double tau);

/// Zero-memory SR1: H = gamma tau Id + u u^T with u = (s - H0 y) / sqrt(<s - H0 y, y>)
/// and tau the clamped BB2 step; the update is skipped when
/// <s - H0 y, y> <= skip_tol ||y|| ||s - H0 y||. B carries the opposite sign.
/// `tau_fallback` is used when y = 0.
QNMetric sr1_metric(const QNPair& pair, const QNConfig& config, double tau_fallback = 1.0);

/// Zero-memory BFGS: H = V^T (gamma tau Id) V + rho s s^T, V = Id - rho y s^T,
/// i.e. gamma tau Id + rho (1 + gamma) u u^T - rho gamma^2 tau^2 / (1 + gamma) y y^T
/// with u = s - gamma tau / (1 + gamma) y when tau = tau_BB2, and
/// B = (Id - s s^T / s^T s) / (gamma tau) + y y^T / y^T s. Non-positive
/// curvature keeps only the diagonal gamma tau Id.
QNMetric zbfgs_metric(const QNPair& pair, const QNConfig& config, double tau_fallback = 1.0);

}  // namespace proxqn
