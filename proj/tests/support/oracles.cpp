#include "oracles.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace proxqn::oracle {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kSlack = 1e-9;

// theta with sum_i max(w_i - theta, 0) = target, for w with sum max(w, 0) > target.
double water_level(const Vector& w, double target) {
  double lo = w.minCoeff() - target / static_cast<double>(w.size()) - 1.0;
  double hi = w.maxCoeff();
  auto mass = [&](double theta) { return (w.array() - theta).max(0.0).sum(); };
  for (int k = 0; k < 200 && hi - lo > 0.0; ++k) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (mass(mid) > target ? lo : hi) = mid;
  }
  // Polish on the active set so the level is exact up to round-off.
  double theta = 0.5 * (lo + hi);
  for (int pass = 0; pass < 8; ++pass) {
    double sum = 0.0;
    int count = 0;
    for (Index i = 0; i < w.size(); ++i) {
      if (w[i] > theta) {
        sum += w[i];
        ++count;
      }
    }
    if (count == 0) break;
    const double next = (sum - target) / count;
    if (next == theta) break;
    theta = next;
  }
  return theta;
}

Vector kkt_solve(const Matrix& q, const Vector& c, const Matrix& a, const Vector& b) {
  const Index n = q.rows();
  const Index m = a.rows();
  Matrix k = Matrix::Zero(n + m, n + m);
  k.topLeftCorner(n, n) = q;
  k.topRightCorner(n, m) = a.transpose();
  k.bottomLeftCorner(m, n) = a;
  Vector rhs(n + m);
  rhs << c, b;
  Vector sol = k.fullPivLu().solve(rhs);
  // One step of iterative refinement.
  sol += k.fullPivLu().solve(rhs - k * sol);
  return sol.head(n);
}

// min 1/2 z^T Q z - c^T z + kappa h(z).
BruteForceResult accelerated(const Matrix& q, const Vector& c, const OracleH& h, double kappa,
                             const BruteForceOptions& options) {
  BruteForceResult out;
  if (h.kind == HKind::Affine) {
    out.z = kkt_solve(q, c, h.a, h.b);
    out.converged = true;
    return out;
  }
  const Vector eig = symmetric_eigenvalues(q);
  const double lip = eig.maxCoeff();
  const double mu = std::max(eig.minCoeff(), 0.0);
  const double beta = (std::sqrt(lip) - std::sqrt(mu)) / (std::sqrt(lip) + std::sqrt(mu));
  const double step = 1.0 / lip;
  auto objective = [&](const Vector& z) { return 0.5 * z.dot(q * z) - c.dot(z) + kappa * h.value(z); };
  auto forward_backward = [&](const Vector& y) { return h.euclidean_prox(y - step * (q * y - c), step * kappa); };

  Vector z = h.euclidean_prox(Vector::Zero(c.size()), 1.0);
  Vector y = z;
  double fz = objective(z);
  for (int k = 1; k <= options.max_iter; ++k) {
    const Vector z_new = forward_backward(y);
    const double f_new = objective(z_new);
    if (f_new > fz) {
      // Restart: drop the momentum and take a plain step from z.
      z = forward_backward(z);
      y = z;
      fz = objective(z);
    } else {
      y = z_new + beta * (z_new - z);
      z = z_new;
      fz = f_new;
    }
    if (k % 10 == 0) {
      out.residual = (z - forward_backward(z)).lpNorm<Eigen::Infinity>();
      if (out.residual <= options.tol) {
        out.converged = true;
        out.iterations = k;
        break;
      }
    }
    out.iterations = k;
  }
  // Finish with plain forward-backward steps, which are monotone.
  for (int k = 0; k < 50; ++k) {
    const Vector next = forward_backward(z);
    if (objective(next) > objective(z)) break;
    z = next;
  }
  out.residual = (z - forward_backward(z)).lpNorm<Eigen::Infinity>();
  out.converged = out.converged || out.residual <= options.tol;
  out.z = z;
  return out;
}

}  // namespace

std::string OracleH::name() const {
  switch (kind) {
    case HKind::Zero: return "zero";
    case HKind::L1: return "l1";
    case HKind::NonNeg: return "nonneg";
    case HKind::Box: return "box";
    case HKind::Hinge: return "hinge";
    case HKind::Simplex: return "simplex";
    case HKind::L1Ball: return "l1-ball";
    case HKind::Group: return "group-l2";
    case HKind::Affine: return "affine";
  }
  return "?";
}

double OracleH::value(const Vector& z) const {
  switch (kind) {
    case HKind::Zero: return 0.0;
    case HKind::L1: return lambda * z.cwiseAbs().sum();
    case HKind::NonNeg: return z.minCoeff() >= -kSlack ? 0.0 : kInf;
    case HKind::Box: return (z.minCoeff() >= lo - kSlack && z.maxCoeff() <= hi + kSlack) ? 0.0 : kInf;
    case HKind::Hinge: return lambda * z.cwiseMax(0.0).sum();
    case HKind::Simplex:
      return (z.minCoeff() >= -kSlack && std::abs(z.sum() - radius) <= kSlack * (1.0 + radius)) ? 0.0 : kInf;
    case HKind::L1Ball: return z.cwiseAbs().sum() <= radius + kSlack * (1.0 + radius) ? 0.0 : kInf;
    case HKind::Group: {
      double total = 0.0;
      Index start = 0;
      for (Index size : blocks) {
        total += z.segment(start, size).norm();
        start += size;
      }
      return lambda * total;
    }
    case HKind::Affine: return (a * z - b).lpNorm<Eigen::Infinity>() <= kSlack * (1.0 + b.lpNorm<Eigen::Infinity>()) ? 0.0 : kInf;
  }
  return kInf;
}

Vector OracleH::euclidean_prox(const Vector& v, double step) const {
  const Index n = v.size();
  Vector z(n);
  switch (kind) {
    case HKind::Zero: return v;
    case HKind::L1: {
      const double t = step * lambda;
      for (Index i = 0; i < n; ++i) z[i] = v[i] > t ? v[i] - t : (v[i] < -t ? v[i] + t : 0.0);
      return z;
    }
    case HKind::NonNeg: return v.cwiseMax(0.0);
    case HKind::Box: return v.cwiseMax(lo).cwiseMin(hi);
    case HKind::Hinge: {
      const double t = step * lambda;
      for (Index i = 0; i < n; ++i) z[i] = v[i] > t ? v[i] - t : (v[i] < 0.0 ? v[i] : 0.0);
      return z;
    }
    case HKind::Simplex: {
      const double theta = water_level(v, radius);
      return (v.array() - theta).max(0.0).matrix();
    }
    case HKind::L1Ball: {
      if (v.cwiseAbs().sum() <= radius) return v;
      const double theta = water_level(v.cwiseAbs(), radius);
      for (Index i = 0; i < n; ++i) {
        const double mag = std::max(std::abs(v[i]) - theta, 0.0);
        z[i] = v[i] >= 0.0 ? mag : -mag;
      }
      return z;
    }
    case HKind::Group: {
      Index start = 0;
      const double t = step * lambda;
      for (Index size : blocks) {
        const auto vb = v.segment(start, size);
        const double norm = vb.norm();
        z.segment(start, size) = norm > t ? Vector((1.0 - t / norm) * vb) : Vector::Zero(size);
        start += size;
      }
      return z;
    }
    case HKind::Affine: {
      const Matrix aat = a * a.transpose();
      const Vector mult = aat.ldlt().solve(a * v - b);
      return v - a.transpose() * mult;
    }
  }
  return v;
}

ProxPtr OracleH::make_operator() const {
  switch (kind) {
    case HKind::Zero: return std::make_shared<ZeroProx>();
    case HKind::L1: return std::make_shared<L1Prox>(lambda);
    case HKind::NonNeg: return std::make_shared<NonNegProx>();
    case HKind::Box: return std::make_shared<BoxProx>(lo, hi);
    case HKind::Hinge: return std::make_shared<HingeProx>(lambda);
    case HKind::Simplex: return std::make_shared<SimplexProx>(radius);
    case HKind::L1Ball: return std::make_shared<L1BallProx>(radius);
    case HKind::Group: return std::make_shared<GroupL2Prox>(lambda, blocks);
    case HKind::Affine: return std::make_shared<AffineProx>(a, b);
  }
  return nullptr;
}

Matrix dense_metric(const Vector& diag, const Matrix& factors, const std::vector<int>& signs) {
  const Index n = diag.size();
  Matrix v = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i) v(i, i) = diag[i];
  for (Index k = 0; k < factors.cols(); ++k) {
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j) v(i, j) += signs[static_cast<std::size_t>(k)] * factors(i, k) * factors(j, k);
  }
  return v;
}

Matrix dense_metric(const LowRankMetric& metric) {
  return dense_metric(metric.diag(), metric.factors(), metric.signs());
}

BruteForceResult scaled_prox_brute_force(const Matrix& v, const OracleH& h, const Vector& x, double kappa,
                                         const BruteForceOptions& options) {
  return accelerated(v, v * x, h, kappa, options);
}

BruteForceResult quadratic_composite_minimizer(const Matrix& q, const Vector& c, const OracleH& h,
                                               const BruteForceOptions& options) {
  return accelerated(q, c, h, 1.0, options);
}

Vector symmetric_eigenvalues(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

namespace {

RateConstants finish_rate(RateConstants r, double mu, double lip, double gamma, double kappa_lo, double kappa_hi) {
  r.alpha = 1.0 - lip * r.b * kappa_hi / 2.0;
  r.eta = lip / (2.0 * gamma * mu * kappa_lo);
  r.rho1 = 1.0 - r.alpha * (1.0 - 2.0 * (std::sqrt(r.eta * r.eta + r.eta) - r.eta));
  r.rho2 = r.eta <= 0.25 ? 2.0 * r.eta : 1.0 - 1.0 / (8.0 * r.eta);
  r.rho = r.alpha < 0.5 ? r.rho1 : std::min(r.rho1, r.rho2);
  return r;
}

}  // namespace

RateConstants sr1_rate(double mu, double lip, double gamma, double kappa_lo, double kappa_hi) {
  RateConstants r;
  r.a = gamma / lip;
  r.b = ((1.0 + gamma) / mu - 2.0 * gamma / lip) / (1.0 - gamma);
  return finish_rate(r, mu, lip, gamma, kappa_lo, kappa_hi);
}

RateConstants bfgs_rate(double mu, double lip, double gamma, double kappa_lo, double kappa_hi) {
  RateConstants r;
  r.a = gamma / ((1.0 + gamma) * lip);
  r.b = (1.0 + 2.0 * gamma) / mu - (2.0 + gamma) * gamma / ((1.0 + gamma) * lip);
  return finish_rate(r, mu, lip, gamma, kappa_lo, kappa_hi);
}

double golden_section_min(const std::function<double(double)>& f, double lo, double hi, double tol) {
  const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo;
  double b = hi;
  double c = b - ratio * (b - a);
  double d = a + ratio * (b - a);
  double fc = f(c);
  double fd = f(d);
  while (b - a > tol * (1.0 + std::abs(a) + std::abs(b))) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - ratio * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + ratio * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

namespace {

// Minimizes 1/2 sum d_i (z_i - x_i)^2 subject to sum_{i in S} s_i z_i = radius,
// z_i = 0 off S, by the Lagrange condition z_i = x_i - mu s_i / d_i; returns
// false when the signs s_i z_i >= 0 are violated.
bool on_face(const Vector& x, const Vector& d, double radius, unsigned support, const Vector& signs, Vector& z) {
  double num = -radius;
  double den = 0.0;
  for (Index i = 0; i < x.size(); ++i) {
    if (support >> i & 1U) {
      num += signs[i] * x[i];
      den += 1.0 / d[i];
    }
  }
  if (den == 0.0) return false;
  const double mu = num / den;
  z = Vector::Zero(x.size());
  for (Index i = 0; i < x.size(); ++i) {
    if (support >> i & 1U) {
      z[i] = x[i] - mu * signs[i] / d[i];
      if (signs[i] * z[i] < -1e-14) return false;
    }
  }
  return true;
}

Vector best_of_faces(const Vector& x, const Vector& d, double radius, bool signed_faces) {
  const Index n = x.size();
  if (n > 8) throw std::invalid_argument("enumeration oracle: n too large");
  Vector best;
  double best_value = kInf;
  Vector z;
  for (unsigned support = 1; support < (1U << n); ++support) {
    const unsigned sign_patterns = signed_faces ? (1U << n) : 1U;
    for (unsigned pattern = 0; pattern < sign_patterns; ++pattern) {
      if (signed_faces && (pattern & ~support)) continue;
      Vector signs = Vector::Ones(n);
      for (Index i = 0; i < n; ++i)
        if (pattern >> i & 1U) signs[i] = -1.0;
      if (!on_face(x, d, radius, support, signs, z)) continue;
      const double value = 0.5 * (d.array() * (z - x).array().square()).sum();
      if (value < best_value) {
        best_value = value;
        best = z;
      }
    }
  }
  return best;
}

}  // namespace

Vector simplex_projection_enumerated(const Vector& x, const Vector& d, double radius) {
  return best_of_faces(x, d, radius, false);
}

Vector l1_ball_projection_enumerated(const Vector& x, const Vector& d, double radius) {
  if (x.cwiseAbs().sum() <= radius) return x;
  return best_of_faces(x, d, radius, true);
}

double scalar_lasso(double a, double b, double lambda) {
  // Minimizer of 1/2 a^2 x^2 - a b x + lambda |x|: soft threshold of a b.
  const double ab = a * b;
  if (ab > lambda) return (ab - lambda) / (a * a);
  if (ab < -lambda) return (ab + lambda) / (a * a);
  return 0.0;
}

}  // namespace proxqn::oracle
