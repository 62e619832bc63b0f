#include "proxqn/prox.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace proxqn {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool feasible_leq(double value, double bound) {
  return value <= bound + kFeasibilityTol * (1.0 + std::abs(bound));
}

void require_positive(double value, const char* what) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    throw std::invalid_argument(std::string(what) + " must be finite and positive");
  }
}

// Solves sum_i max(a_i - theta / d_i, 0) = target for theta, assuming the
// left-hand side exceeds target at theta = min_i d_i a_i. Breakpoints
// theta_i = d_i a_i are visited in decreasing order (stable for ties).
double weighted_threshold(const Vector& a, const Vector& d, double target) {
  const Index n = a.size();
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index i, Index j) {
    return d[i] * a[i] > d[j] * a[j];
  });
  double sum_a = 0.0;
  double sum_w = 0.0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const Index i = order[k];
    sum_a += a[i];
    sum_w += 1.0 / d[i];
    const double theta = (sum_a - target) / sum_w;
    if (k + 1 == order.size() || theta >= d[order[k + 1]] * a[order[k + 1]]) return theta;
  }
  return 0.0;  // unreachable for n > 0
}

}  // namespace

// ---------------------------------------------------------------------------
// ProxOperator

double ProxOperator::conjugate_value(const Vector&) const {
  throw std::logic_error(name() + ": no closed-form conjugate");
}

PiecewiseAffine ProxOperator::descriptor(Index, double, double) const {
  throw std::logic_error(name() + ": no piecewise-affine descriptor");
}

Vector ProxOperator::prox(const Vector& x, const Vector& d, double kappa) const {
  require_same_size(x.size(), d.size(), "prox weights");
  if (auto n = fixed_dim()) require_same_size(*n, x.size(), name().c_str());
  require_positive(kappa, "prox scale");
  if (d.size() > 0 && !(d.minCoeff() > 0.0)) {
    throw std::invalid_argument("prox weights must be strictly positive");
  }
  return do_prox(x, d, kappa);
}

Vector ProxOperator::prox(const Vector& x, double kappa) const {
  return prox(x, Vector::Ones(x.size()), kappa);
}

Vector ProxOperator::jacobian_apply(const Vector& x, const Vector& d, double kappa,
                                    const Vector& v) const {
  require_same_size(x.size(), v.size(), "jacobian direction");
  if (has_descriptor()) {
    Vector out(x.size());
    for (Index i = 0; i < x.size(); ++i) out[i] = descriptor(i, d[i], kappa).slope_at(x[i]) * v[i];
    return out;
  }
  const double vnorm = v.lpNorm<Eigen::Infinity>();
  if (vnorm == 0.0) return Vector::Zero(x.size());
  const double step = 1e-7 * std::max(1.0, x.lpNorm<Eigen::Infinity>()) / vnorm;
  return (prox(x + step * v, d, kappa) - prox(x, d, kappa)) / step;
}

// ---------------------------------------------------------------------------
// Zero

double ZeroProx::conjugate_value(const Vector& z) const {
  return feasible_leq(z.lpNorm<Eigen::Infinity>(), 0.0) ? 0.0 : kInf;
}

// ---------------------------------------------------------------------------
// l1

L1Prox::L1Prox(double lambda) : lambda_(lambda) { require_positive(lambda, "l1 weight"); }

double L1Prox::conjugate_value(const Vector& z) const {
  return feasible_leq(z.lpNorm<Eigen::Infinity>(), lambda_) ? 0.0 : kInf;
}

PiecewiseAffine L1Prox::descriptor(Index, double d_i, double kappa) const {
  const double t = kappa * lambda_ / d_i;
  PiecewiseAffine pa;
  pa.slopes[0] = 1.0;
  pa.intercepts[0] = t;
  pa.push(-t, 0.0, 0.0);
  pa.push(t, 1.0, -t);
  return pa;
}

Vector L1Prox::do_prox(const Vector& x, const Vector& d, double kappa) const {
  Vector out(x.size());
  const double scale = kappa * lambda_;
  for (Index i = 0; i < x.size(); ++i) {
    const double t = scale / d[i];
    const double xi = x[i];
    out[i] = xi > t ? xi - t : (xi < -t ? xi + t : 0.0);
  }
  return out;
}

Vector L1Prox::jacobian_apply(const Vector& x, const Vector& d, double kappa,
                              const Vector& v) const {
  Vector out(x.size());
  const double scale = kappa * lambda_;
  for (Index i = 0; i < x.size(); ++i) {
    const double t = scale / d[i];
    out[i] = (x[i] >= t || x[i] < -t) ? v[i] : 0.0;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Boxes

BoxProx::BoxProx(double lo, double hi) : lo_(lo), hi_(hi) {
  if (std::isnan(lo) || std::isnan(hi) || lo > hi || lo == kInf || hi == -kInf) {
    throw std::invalid_argument("box: require lo <= hi");
  }
}

double BoxProx::value(const Vector& z) const {
  for (Index i = 0; i < z.size(); ++i) {
    if (!feasible_leq(z[i], hi_) || !feasible_leq(-z[i], -lo_)) return kInf;
  }
  return 0.0;
}

double BoxProx::conjugate_value(const Vector& z) const {
  double total = 0.0;
  for (Index i = 0; i < z.size(); ++i) {
    if (z[i] > 0.0) total += z[i] * hi_;
    else if (z[i] < 0.0) total += z[i] * lo_;
  }
  return total;
}

PiecewiseAffine BoxProx::descriptor(Index, double, double) const {
  PiecewiseAffine pa;
  if (std::isinf(lo_)) {
    pa.slopes[0] = 1.0;
    if (!std::isinf(hi_)) pa.push(hi_, 0.0, hi_);
    return pa;
  }
  pa.intercepts[0] = lo_;
  if (lo_ == hi_) {
    pa.push(lo_, 0.0, lo_);
    return pa;
  }
  pa.push(lo_, 1.0, 0.0);
  if (!std::isinf(hi_)) pa.push(hi_, 0.0, hi_);
  return pa;
}

Vector BoxProx::do_prox(const Vector& x, const Vector&, double) const {
  return x.cwiseMax(lo_).cwiseMin(hi_);
}

NonNegProx::NonNegProx() : BoxProx(0.0, kInf) {}

LinfBallProx::LinfBallProx(double radius) : BoxProx(-radius, radius) {
  require_positive(radius, "linf-ball radius");
}

// ---------------------------------------------------------------------------
// Hinge

HingeProx::HingeProx(double lambda) : lambda_(lambda) { require_positive(lambda, "hinge weight"); }

double HingeProx::value(const Vector& z) const { return lambda_ * z.cwiseMax(0.0).sum(); }

double HingeProx::conjugate_value(const Vector& z) const {
  for (Index i = 0; i < z.size(); ++i) {
    if (!feasible_leq(-z[i], 0.0) || !feasible_leq(z[i], lambda_)) return kInf;
  }
  return 0.0;
}

PiecewiseAffine HingeProx::descriptor(Index, double d_i, double kappa) const {
  const double t = kappa * lambda_ / d_i;
  PiecewiseAffine pa;
  pa.slopes[0] = 1.0;
  pa.push(0.0, 0.0, 0.0);
  pa.push(t, 1.0, -t);
  return pa;
}

Vector HingeProx::do_prox(const Vector& x, const Vector& d, double kappa) const {
  Vector out(x.size());
  for (Index i = 0; i < x.size(); ++i) {
    const double t = kappa * lambda_ / d[i];
    out[i] = x[i] >= t ? x[i] - t : (x[i] >= 0.0 ? 0.0 : x[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// l1 ball

L1BallProx::L1BallProx(double radius) : radius_(radius) {
  require_positive(radius, "l1-ball radius");
}

double L1BallProx::value(const Vector& z) const {
  return feasible_leq(z.lpNorm<1>(), radius_) ? 0.0 : kInf;
}

double L1BallProx::conjugate_value(const Vector& z) const {
  return radius_ * z.lpNorm<Eigen::Infinity>();
}

Vector L1BallProx::do_prox(const Vector& x, const Vector& d, double) const {
  if (x.lpNorm<1>() <= radius_) return x;
  const Vector mag = x.cwiseAbs();
  const double theta = weighted_threshold(mag, d, radius_);
  Vector out(x.size());
  for (Index i = 0; i < x.size(); ++i) {
    const double m = std::max(mag[i] - theta / d[i], 0.0);
    out[i] = x[i] < 0.0 ? -m : m;
  }
  return out;
}

Vector L1BallProx::jacobian_apply(const Vector& x, const Vector& d, double,
                                  const Vector& v) const {
  require_same_size(x.size(), v.size(), "jacobian direction");
  if (x.lpNorm<1>() <= radius_) return v;
  const Vector mag = x.cwiseAbs();
  const double theta = weighted_threshold(mag, d, radius_);
  double num = 0.0;
  double den = 0.0;
  std::vector<bool> active(static_cast<std::size_t>(x.size()));
  for (Index i = 0; i < x.size(); ++i) {
    active[static_cast<std::size_t>(i)] = mag[i] - theta / d[i] > 0.0;
    if (active[static_cast<std::size_t>(i)]) {
      const double s = x[i] < 0.0 ? -1.0 : 1.0;
      num += s * v[i];
      den += 1.0 / d[i];
    }
  }
  Vector out = Vector::Zero(x.size());
  if (den == 0.0) return out;
  for (Index i = 0; i < x.size(); ++i) {
    if (!active[static_cast<std::size_t>(i)]) continue;
    const double s = x[i] < 0.0 ? -1.0 : 1.0;
    out[i] = v[i] - s * (num / den) / d[i];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Simplex

SimplexProx::SimplexProx(double radius) : radius_(radius) {
  require_positive(radius, "simplex radius");
}

double SimplexProx::value(const Vector& z) const {
  if (z.size() == 0) return kInf;
  if (!feasible_leq(-z.minCoeff(), 0.0)) return kInf;
  return std::abs(z.sum() - radius_) <= kFeasibilityTol * (1.0 + radius_) ? 0.0 : kInf;
}

double SimplexProx::conjugate_value(const Vector& z) const { return radius_ * z.maxCoeff(); }

Vector SimplexProx::do_prox(const Vector& x, const Vector& d, double) const {
  const double theta = weighted_threshold(x, d, radius_);
  Vector out(x.size());
  for (Index i = 0; i < x.size(); ++i) out[i] = std::max(x[i] - theta / d[i], 0.0);
  return out;
}

Vector SimplexProx::jacobian_apply(const Vector& x, const Vector& d, double,
                                   const Vector& v) const {
  require_same_size(x.size(), v.size(), "jacobian direction");
  const double theta = weighted_threshold(x, d, radius_);
  double num = 0.0;
  double den = 0.0;
  for (Index i = 0; i < x.size(); ++i) {
    if (x[i] - theta / d[i] > 0.0) {
      num += v[i];
      den += 1.0 / d[i];
    }
  }
  Vector out = Vector::Zero(x.size());
  if (den == 0.0) return out;
  for (Index i = 0; i < x.size(); ++i) {
    if (x[i] - theta / d[i] > 0.0) out[i] = v[i] - (num / den) / d[i];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Conjugates

ConjugateProx::ConjugateProx(ProxPtr base) : base_(std::move(base)) {
  if (!base_) throw std::invalid_argument("conjugate: null base operator");
}

bool ConjugateProx::zero_in_argmin() const {
  // 0 minimizes h* iff 0 is a subgradient of h* at 0 iff 0 minimizes h.
  return base_->zero_in_argmin();
}

Vector ConjugateProx::do_prox(const Vector& x, const Vector& d, double kappa) const {
  const Vector d_inv = d.cwiseInverse();
  const Vector inner = base_->prox(d.cwiseProduct(x) / kappa, d_inv, 1.0 / kappa);
  return x - kappa * d_inv.cwiseProduct(inner);
}

Vector ConjugateProx::jacobian_apply(const Vector& x, const Vector& d, double kappa,
                                     const Vector& v) const {
  const Vector d_inv = d.cwiseInverse();
  const Vector jv = base_->jacobian_apply(d.cwiseProduct(x) / kappa, d_inv, 1.0 / kappa,
                                          d.cwiseProduct(v));
  return v - d_inv.cwiseProduct(jv);
}

namespace {
ProxPtr support_base_l1(double lambda) {
  if (lambda < 0.0 || !std::isfinite(lambda)) throw std::invalid_argument("linf weight must be >= 0");
  if (lambda == 0.0) return std::make_shared<BoxProx>(0.0, 0.0);
  return std::make_shared<L1BallProx>(lambda);
}
ProxPtr support_base_simplex(double lambda) {
  if (lambda < 0.0 || !std::isfinite(lambda)) throw std::invalid_argument("max weight must be >= 0");
  if (lambda == 0.0) return std::make_shared<BoxProx>(0.0, 0.0);
  return std::make_shared<SimplexProx>(lambda);
}
}  // namespace

LinfNormProx::LinfNormProx(double lambda) : ConjugateProx(support_base_l1(lambda)), lambda_(lambda) {}

Vector LinfNormProx::do_prox(const Vector& x, const Vector& d, double kappa) const {
  if (lambda_ == 0.0) return x;
  return ConjugateProx::do_prox(x, d, kappa);
}

MaxProx::MaxProx(double lambda) : ConjugateProx(support_base_simplex(lambda)), lambda_(lambda) {}

Vector MaxProx::do_prox(const Vector& x, const Vector& d, double kappa) const {
  if (lambda_ == 0.0) return x;
  return ConjugateProx::do_prox(x, d, kappa);
}

// ---------------------------------------------------------------------------
// Group l1-l2

GroupL2Prox::GroupL2Prox(double lambda, std::vector<Index> block_sizes) : lambda_(lambda), dim_(0) {
  require_positive(lambda, "group weight");
  if (block_sizes.empty()) throw std::invalid_argument("group-l2: at least one block required");
  for (Index size : block_sizes) {
    if (size <= 0) throw std::invalid_argument("group-l2: block sizes must be positive");
    blocks_.push_back({dim_, size});
    dim_ += size;
  }
}

double GroupL2Prox::value(const Vector& z) const {
  require_same_size(dim_, z.size(), "group-l2 value");
  double total = 0.0;
  for (const Block& b : blocks_) total += z.segment(b.start, b.size).norm();
  return lambda_ * total;
}

double GroupL2Prox::conjugate_value(const Vector& z) const {
  require_same_size(dim_, z.size(), "group-l2 conjugate");
  for (const Block& b : blocks_) {
    if (!feasible_leq(z.segment(b.start, b.size).norm(), lambda_)) return kInf;
  }
  return 0.0;
}

void GroupL2Prox::check_block_constant(const Vector& d) const {
  for (const Block& b : blocks_) {
    const auto seg = d.segment(b.start, b.size);
    if (seg.maxCoeff() - seg.minCoeff() > 1e-12 * seg.maxCoeff()) {
      throw std::invalid_argument("group-l2: diagonal weights must be constant on each block");
    }
  }
}

Vector GroupL2Prox::do_prox(const Vector& x, const Vector& d, double kappa) const {
  check_block_constant(d);
  Vector out(x.size());
  for (const Block& b : blocks_) {
    const auto xb = x.segment(b.start, b.size);
    const double norm = xb.norm();
    const double t = kappa * lambda_ / d[b.start];
    if (norm > t) out.segment(b.start, b.size) = (1.0 - t / norm) * xb;
    else out.segment(b.start, b.size).setZero();
  }
  return out;
}

Vector GroupL2Prox::jacobian_apply(const Vector& x, const Vector& d, double kappa,
                                   const Vector& v) const {
  require_same_size(dim_, x.size(), "group-l2 jacobian");
  require_same_size(x.size(), v.size(), "jacobian direction");
  check_block_constant(d);
  Vector out(x.size());
  for (const Block& b : blocks_) {
    const auto xb = x.segment(b.start, b.size);
    const auto vb = v.segment(b.start, b.size);
    const double norm = xb.norm();
    const double t = kappa * lambda_ / d[b.start];
    if (norm > t) {
      out.segment(b.start, b.size) =
          (1.0 - t / norm) * vb + (t * xb.dot(vb) / (norm * norm * norm)) * xb;
    } else {
      out.segment(b.start, b.size).setZero();
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Affine constraint

AffineProx::AffineProx(Matrix a, Vector b) : a_(std::move(a)), b_(std::move(b)) {
  require_same_size(a_.rows(), b_.size(), "affine right-hand side");
  if (a_.rows() == 0 || a_.rows() > a_.cols()) {
    throw std::invalid_argument("affine: A must have 1 <= rows <= cols");
  }
  Eigen::JacobiSVD<Matrix> svd(a_, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& sigma = svd.singularValues();
  if (sigma.minCoeff() <= 1e-12 * sigma.maxCoeff()) {
    throw std::invalid_argument("affine: A is rank deficient");
  }
  pinv_ = svd.matrixV() * sigma.cwiseInverse().asDiagonal() * svd.matrixU().transpose();
}

double AffineProx::value(const Vector& z) const {
  require_same_size(a_.cols(), z.size(), "affine value");
  const double residual = (a_ * z - b_).lpNorm<Eigen::Infinity>();
  return residual <= kFeasibilityTol * (1.0 + b_.lpNorm<Eigen::Infinity>() +
                                        a_.lpNorm<Eigen::Infinity>() * z.lpNorm<Eigen::Infinity>())
             ? 0.0
             : kInf;
}

Vector AffineProx::project_null(const Vector& x, const Vector& d) const {
  if ((d.array() == d[0]).all()) return x - pinv_ * (a_ * x);
  const Vector d_inv = d.cwiseInverse();
  const Matrix scaled = a_ * d_inv.asDiagonal();
  const Matrix gram = scaled * a_.transpose();
  const Vector mult = gram.ldlt().solve(a_ * x);
  return x - d_inv.cwiseProduct(a_.transpose() * mult);
}

Vector AffineProx::do_prox(const Vector& x, const Vector& d, double) const {
  if ((d.array() == d[0]).all()) return x - pinv_ * (a_ * x - b_);
  const Vector d_inv = d.cwiseInverse();
  const Matrix scaled = a_ * d_inv.asDiagonal();
  const Matrix gram = scaled * a_.transpose();
  const Vector mult = gram.ldlt().solve(a_ * x - b_);
  return x - d_inv.cwiseProduct(a_.transpose() * mult);
}

Vector AffineProx::jacobian_apply(const Vector&, const Vector& d, double,
                                  const Vector& v) const {
  return project_null(v, d);
}

// ---------------------------------------------------------------------------
// Factory

const std::vector<std::string>& prox_kind_names() {
  static const std::vector<std::string> names = {"zero",    "l1",  "nonneg", "box",
                                                 "hinge",   "linf-ball", "l1-ball",
                                                 "simplex", "linf", "max", "group-l2",
                                                 "affine"};
  return names;
}

ProxPtr make_prox(const ProxSpec& spec) {
  const std::string& k = spec.kind;
  if (k == "zero") return std::make_shared<ZeroProx>();
  if (k == "l1") return std::make_shared<L1Prox>(spec.lambda);
  if (k == "nonneg") return std::make_shared<NonNegProx>();
  if (k == "box") return std::make_shared<BoxProx>(spec.lo, spec.hi);
  if (k == "hinge") return std::make_shared<HingeProx>(spec.lambda);
  if (k == "linf-ball") return std::make_shared<LinfBallProx>(spec.radius);
  if (k == "l1-ball") return std::make_shared<L1BallProx>(spec.radius);
  if (k == "simplex") return std::make_shared<SimplexProx>(spec.radius);
  if (k == "linf") return std::make_shared<LinfNormProx>(spec.lambda);
  if (k == "max") return std::make_shared<MaxProx>(spec.lambda);
  if (k == "group-l2") return std::make_shared<GroupL2Prox>(spec.lambda, spec.block_sizes);
  if (k == "affine") return std::make_shared<AffineProx>(spec.a, spec.b);
  throw std::invalid_argument("unknown prox kind '" + k + "'");
}

}  // namespace proxqn
