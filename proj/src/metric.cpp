#include "proxqn/metric.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <cmath>

namespace proxqn {

namespace {

Matrix gram_scaled(const Vector& diag, const Matrix& factors) {
  const Matrix scaled = diag.cwiseInverse().asDiagonal() * factors;
  return factors.transpose() * scaled;
}

Vector sign_vector(const std::vector<int>& signs) {
  Vector s(static_cast<Index>(signs.size()));
  for (std::size_t i = 0; i < signs.size(); ++i) s[static_cast<Index>(i)] = signs[i];
  return s;
}

std::optional<int> common_sign(const std::vector<int>& signs) {
  if (signs.empty()) return 1;
  for (int s : signs) {
    if (s != signs.front()) return std::nullopt;
  }
  return signs.front();
}

}  // namespace

LowRankMetric::LowRankMetric(Vector diag)
    : diag_(std::move(diag)), factors_(diag_.size(), 0) {
  validate_and_prepare();
}

LowRankMetric::LowRankMetric(Vector diag, Matrix factors, int sign)
    : diag_(std::move(diag)),
      factors_(std::move(factors)),
      signs_(static_cast<std::size_t>(factors_.cols()), sign) {
  validate_and_prepare();
}

LowRankMetric::LowRankMetric(Vector diag, Matrix factors, std::vector<int> signs)
    : diag_(std::move(diag)), factors_(std::move(factors)), signs_(std::move(signs)) {
  validate_and_prepare();
}

void LowRankMetric::validate_and_prepare() {
  if (diag_.size() == 0) throw std::invalid_argument("metric: dimension must be positive");
  for (Index i = 0; i < diag_.size(); ++i) {
    if (!(diag_[i] > 0.0) || !std::isfinite(diag_[i])) {
      throw NotPositiveDefinite("metric: diagonal entries must be finite and strictly positive");
    }
  }
  require_same_size(diag_.size(), factors_.rows(), "metric factors");
  if (static_cast<Index>(signs_.size()) != factors_.cols()) {
    throw std::invalid_argument("metric: one sign per factor required");
  }
  for (int s : signs_) {
    if (s != 1 && s != -1) throw std::invalid_argument("metric: signs must be +1 or -1");
  }
  if (!factors_.allFinite()) throw std::invalid_argument("metric: non-finite factor entries");

  // Drop numerically vanishing factors.
  std::vector<Index> keep;
  for (Index j = 0; j < factors_.cols(); ++j) {
    if (factors_.col(j).norm() >= kDropTolerance) keep.push_back(j);
  }
  if (static_cast<Index>(keep.size()) != factors_.cols()) {
    Matrix kept(factors_.rows(), static_cast<Index>(keep.size()));
    std::vector<int> kept_signs;
    for (std::size_t k = 0; k < keep.size(); ++k) {
      kept.col(static_cast<Index>(k)) = factors_.col(keep[k]);
      kept_signs.push_back(signs_[static_cast<std::size_t>(keep[k])]);
    }
    factors_ = std::move(kept);
    signs_ = std::move(kept_signs);
  }

  const Index r = factors_.cols();
  if (r > diag_.size()) throw std::invalid_argument("metric: rank exceeds dimension");
  if (r == 0) {
    scaled_factor_norm_sq_ = 0.0;
    return;
  }

  const Matrix gram = gram_scaled(diag_, factors_);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
  const Vector& lambda = eig.eigenvalues();
  scaled_factor_norm_sq_ = lambda.maxCoeff();
  if (lambda.minCoeff() <= 1e-13 * scaled_factor_norm_sq_) {
    throw std::invalid_argument("metric: low-rank factors are linearly dependent");
  }

  const auto sign = common_sign(signs_);
  if (sign && *sign > 0) return;
  if (sign) {
    // P - U U^T is SPD iff I_r - U^T P^{-1} U is.
    if (1.0 - scaled_factor_norm_sq_ <= 1e-14) {
      throw NotPositiveDefinite("metric: P - UU^T is not positive definite");
    }
    return;
  }
  // Mixed signs: the nonzero spectrum of P^{-1/2} U S U^T P^{-1/2} is that
  // of G^{1/2} S G^{1/2}.
  const Matrix root = eig.eigenvectors() * lambda.cwiseSqrt().asDiagonal() *
                      eig.eigenvectors().transpose();
  const Matrix inner = Matrix::Identity(r, r) + root * sign_vector(signs_).asDiagonal() * root;
  Eigen::SelfAdjointEigenSolver<Matrix> inner_eig(inner, Eigen::EigenvaluesOnly);
  if (inner_eig.eigenvalues().minCoeff() <= 1e-14) {
    throw NotPositiveDefinite("metric: P + U S U^T is not positive definite");
  }
}

LowRankMetric LowRankMetric::from_signed_terms(Vector diag, const Matrix& terms,
                                               const std::vector<int>& signs) {
  require_same_size(diag.size(), terms.rows(), "signed terms");
  if (static_cast<Index>(signs.size()) != terms.cols()) {
    throw std::invalid_argument("signed terms: one sign per column required");
  }
  if (terms.cols() == 0) return LowRankMetric(std::move(diag));

  Eigen::JacobiSVD<Matrix> svd(terms, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& sigma = svd.singularValues();
  const Matrix core = sigma.asDiagonal() * svd.matrixV().transpose() *
                      sign_vector(signs).asDiagonal() * svd.matrixV() * sigma.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(core);
  const Vector& lambda = eig.eigenvalues();
  const double scale = lambda.cwiseAbs().maxCoeff();

  std::vector<Index> keep;
  for (Index j = 0; j < lambda.size(); ++j) {
    const double mag = std::abs(lambda[j]);
    if (std::sqrt(mag) >= kDropTolerance && mag > 1e-13 * scale) keep.push_back(j);
  }
  Matrix factors(terms.rows(), static_cast<Index>(keep.size()));
  std::vector<int> out_signs;
  for (std::size_t k = 0; k < keep.size(); ++k) {
    const Index j = keep[k];
    factors.col(static_cast<Index>(k)) =
        svd.matrixU() * eig.eigenvectors().col(j) * std::sqrt(std::abs(lambda[j]));
    out_signs.push_back(lambda[j] > 0 ? 1 : -1);
  }
  return LowRankMetric(std::move(diag), std::move(factors), std::move(out_signs));
}

std::optional<int> LowRankMetric::uniform_sign() const { return common_sign(signs_); }

Matrix LowRankMetric::factors_with_sign(int sign) const {
  Index count = 0;
  for (int s : signs_) count += (s == sign);
  Matrix out(dim(), count);
  Index k = 0;
  for (Index j = 0; j < rank(); ++j) {
    if (signs_[static_cast<std::size_t>(j)] == sign) out.col(k++) = factors_.col(j);
  }
  return out;
}

Vector LowRankMetric::apply(const Vector& x) const {
  require_same_size(dim(), x.size(), "metric apply");
  Vector out = diag_.cwiseProduct(x);
  for (Index j = 0; j < rank(); ++j) {
    out.noalias() += (signs_[static_cast<std::size_t>(j)] * factors_.col(j).dot(x)) * factors_.col(j);
  }
  return out;
}

double LowRankMetric::norm_sq(const Vector& x) const {
  require_same_size(dim(), x.size(), "metric norm");
  double value = x.cwiseProduct(diag_).dot(x);
  for (Index j = 0; j < rank(); ++j) {
    const double c = factors_.col(j).dot(x);
    value += signs_[static_cast<std::size_t>(j)] * c * c;
  }
  return value;
}

MetricInverse LowRankMetric::inverse() const { return invert(*this); }

MetricInverse invert(const LowRankMetric& metric) {
  const Vector diag_inv = metric.diag().cwiseInverse();
  const Index r = metric.rank();
  if (r == 0) return MetricInverse(diag_inv, Matrix(metric.dim(), 0), {});

  // Woodbury: V^{-1} = P^{-1} - P^{-1} U (S + U^T P^{-1} U)^{-1} U^T P^{-1}.
  const Matrix scaled = diag_inv.asDiagonal() * metric.factors();
  Matrix capacitance = metric.factors().transpose() * scaled;
  capacitance.diagonal() += sign_vector(metric.signs());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(capacitance);
  const Vector& lambda = eig.eigenvalues();
  if (lambda.cwiseAbs().minCoeff() <= 1e-300) {
    throw NotPositiveDefinite("invert: singular capacitance matrix");
  }
  Matrix factors(metric.dim(), r);
  std::vector<int> signs(static_cast<std::size_t>(r));
  for (Index j = 0; j < r; ++j) {
    factors.col(j) = scaled * eig.eigenvectors().col(j) / std::sqrt(std::abs(lambda[j]));
    signs[static_cast<std::size_t>(j)] = lambda[j] > 0 ? -1 : 1;
  }
  return MetricInverse(diag_inv, std::move(factors), std::move(signs));
}

std::optional<int> MetricInverse::uniform_sign() const { return common_sign(signs_inv_); }

Vector MetricInverse::apply(const Vector& x) const {
  require_same_size(diag_inv_.size(), x.size(), "inverse apply");
  Vector out = diag_inv_.cwiseProduct(x);
  for (Index j = 0; j < factors_inv_.cols(); ++j) {
    out.noalias() +=
        (signs_inv_[static_cast<std::size_t>(j)] * factors_inv_.col(j).dot(x)) * factors_inv_.col(j);
  }
  return out;
}

LowRankMetric MetricInverse::as_metric() const {
  return LowRankMetric(diag_inv_, factors_inv_, signs_inv_);
}

}  // namespace proxqn
