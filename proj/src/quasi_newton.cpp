#include "proxqn/quasi_newton.hpp"

#include <algorithm>
#include <cmath>

namespace proxqn {

namespace {

struct TauChoice {
  double tau;
  bool clamped;
  bool undefined;  // y = 0
};

TauChoice choose_tau(const QNPair& pair, const QNConfig& config, double tau_fallback) {
  const double yy = pair.y.squaredNorm();
  if (yy == 0.0) {
    return {std::clamp(tau_fallback, config.tau_min, config.tau_max), false, true};
  }
  const double raw = pair.s.dot(pair.y) / yy;
  const double tau = std::clamp(raw, config.tau_min, config.tau_max);
  return {tau, tau != raw, false};
}

// Accepts dependent or cancelling terms (s parallel to y) by re-factoring.
LowRankMetric signed_metric(const Vector& diag, const Matrix& terms, const std::vector<int>& signs) {
  try {
    return LowRankMetric(diag, terms, signs);
  } catch (const NotPositiveDefinite&) {
    return LowRankMetric::from_signed_terms(diag, terms, signs);
  } catch (const std::invalid_argument&) {
    return LowRankMetric::from_signed_terms(diag, terms, signs);
  }
}

QNMetric scaled_identity_metric(Index n, double h_scale, double tau, bool clamped) {
  return QNMetric{LowRankMetric::scaled_identity(n, h_scale),
                  LowRankMetric::scaled_identity(n, 1.0 / h_scale), tau, true, clamped};
}

}  // namespace

BBSteps bb_stepsizes(const QNPair& pair) {
  require_same_size(pair.s.size(), pair.y.size(), "BB pair");
  const double sy = pair.s.dot(pair.y);
  if (!(sy > 0.0)) throw std::domain_error("BB steps: non-positive curvature <s, y>");
  return {pair.s.squaredNorm() / sy, sy / pair.y.squaredNorm()};
}

void QNConfig::validate() const {
  if (!(gamma > 0.0)) throw std::invalid_argument("quasi-Newton: gamma must be positive");
  if (!(tau_min > 0.0 && tau_min < tau_max)) {
    throw std::invalid_argument("quasi-Newton: require 0 < tau_min < tau_max");
  }
  if (!(skip_tol >= 0.0)) throw std::invalid_argument("quasi-Newton: skip tolerance must be >= 0");
}

QNMetric initial_metric(Index n, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("initial metric: tau must be positive");
  return scaled_identity_metric(n, tau, tau, false);
}

QNMetric sr1_metric(const QNPair& pair, const QNConfig& config, double tau_fallback) {
  config.validate();
  if (!(config.gamma < 1.0)) throw std::invalid_argument("SR1: gamma must lie in (0, 1)");
  require_same_size(pair.s.size(), pair.y.size(), "SR1 pair");
  const Index n = pair.s.size();
  const TauChoice tau = choose_tau(pair, config, tau_fallback);
  const double h0 = config.gamma * tau.tau;
  if (tau.undefined) return scaled_identity_metric(n, h0, tau.tau, tau.clamped);

  const Vector w = pair.s - h0 * pair.y;
  const double wy = w.dot(pair.y);
  if (wy <= config.skip_tol * pair.y.norm() * w.norm()) {
    return scaled_identity_metric(n, h0, tau.tau, tau.clamped);
  }
  Matrix u = w / std::sqrt(wy);
  if (u.norm() < LowRankMetric::kDropTolerance) return scaled_identity_metric(n, h0, tau.tau, tau.clamped);
  LowRankMetric h(Vector::Constant(n, h0), u, 1);
  LowRankMetric b = h.inverse().as_metric();
  return QNMetric{std::move(h), std::move(b), tau.tau, false, tau.clamped};
}

QNMetric zbfgs_metric(const QNPair& pair, const QNConfig& config, double tau_fallback) {
  config.validate();
  require_same_size(pair.s.size(), pair.y.size(), "BFGS pair");
  const Index n = pair.s.size();
  const TauChoice tau = choose_tau(pair, config, tau_fallback);
  const double gt = config.gamma * tau.tau;
  const double sy = pair.s.dot(pair.y);
  const double ss = pair.s.squaredNorm();
  if (tau.undefined || !(sy > 0.0) || ss == 0.0) return scaled_identity_metric(n, gt, tau.tau, tau.clamped);
  const double rho = 1.0 / sy;
  const double gamma = config.gamma;

  Matrix h_terms(n, 2);
  std::vector<int> h_signs = {1, -1};
  if (!tau.clamped) {
    // tau = <s,y>/||y||^2, so rho ||y||^2 tau = 1.
    h_terms.col(0) = std::sqrt(rho * (1.0 + gamma)) * (pair.s - (gt / (1.0 + gamma)) * pair.y);
    h_terms.col(1) = std::sqrt(rho / (1.0 + gamma)) * gt * pair.y;
  } else {
    // General tau: gamma tau (Id - rho (y s^T + s y^T) + rho^2 ||y||^2 s s^T) + rho s s^T,
    // with y s^T + s y^T written as a difference of squares.
    const double yy = pair.y.squaredNorm();
    const double ss_coef = gt * rho * rho * yy + rho;
    Matrix terms(n, 3);
    terms.col(0) = std::sqrt(ss_coef) * pair.s;
    terms.col(1) = std::sqrt(0.5 * gt * rho) * (pair.y - pair.s);
    terms.col(2) = std::sqrt(0.5 * gt * rho) * (pair.y + pair.s);
    h_terms = terms;
    h_signs = {1, 1, -1};
  }
  LowRankMetric h = signed_metric(Vector::Constant(n, gt), h_terms, h_signs);

  Matrix b_terms(n, 2);
  b_terms.col(0) = pair.y * std::sqrt(rho);
  b_terms.col(1) = pair.s / std::sqrt(gt * ss);
  LowRankMetric b = signed_metric(Vector::Constant(n, 1.0 / gt), b_terms, {1, -1});
  return QNMetric{std::move(h), std::move(b), tau.tau, false, tau.clamped};
}

}  // namespace proxqn
