#include <doctest.h>

#include "oracles.hpp"
#include "instances.hpp"

#include "proxqn/metric.hpp"

using namespace proxqn;

TEST_CASE("metric apply and norm agree with the dense matrix") {
  Rng rng(11);
  for (const std::vector<int>& signs : {std::vector<int>{}, {1}, {-1}, {1, 1}, {-1, -1}, {1, -1}}) {
    const Vector d = rng.uniform_vector(9, 0.5, 2.0);
    const LowRankMetric v = signs.empty() ? LowRankMetric(d) : testing::random_metric(d, signs, rng);
    const Matrix dense = oracle::dense_metric(v);
    const Vector x = rng.normal_vector(9);
    CHECK((v.apply(x) - dense * x).norm() <= 1e-12);
    CHECK(v.norm_sq(x) == doctest::Approx(x.dot(dense * x)).epsilon(1e-12));
  }
}

TEST_CASE("inverse by Sherman-Morrison-Woodbury") {
  Rng rng(12);
  for (const std::vector<int>& signs : {std::vector<int>{1}, {-1}, {1, 1}, {-1, -1}, {1, -1}}) {
    const LowRankMetric v = testing::random_metric(rng.uniform_vector(7, 0.5, 2.0), signs, rng);
    const Matrix dense = oracle::dense_metric(v);
    const Matrix inv = oracle::dense_metric(v.inverse().as_metric());
    CHECK((dense * inv - Matrix::Identity(7, 7)).lpNorm<Eigen::Infinity>() <= 1e-10);
  }
}

TEST_CASE("uniform sign inverse flips the sign") {
  const Vector d = Vector::Ones(3);
  Matrix u(3, 1);
  u << 0.5, 0.0, 0.0;
  CHECK(LowRankMetric(d, u, 1).inverse().as_metric().uniform_sign() == -1);
  CHECK(LowRankMetric(d, u, -1).inverse().as_metric().uniform_sign() == 1);
}

TEST_CASE("scaled factor norm is the Gram eigenvalue") {
  Vector d(2);
  d << 2.0, 4.0;
  Matrix u(2, 1);
  u << 2.0, 2.0;
  // u^T P^{-1} u = 4/2 + 4/4
  CHECK(LowRankMetric(d, u, 1).scaled_factor_norm_sq() == doctest::Approx(3.0));
}

TEST_CASE("indefinite metrics are rejected") {
  const Vector d = Vector::Ones(2);
  Matrix u(2, 1);
  u << 1.0, 0.0;  // I - e1 e1^T is singular
  CHECK_THROWS_AS(LowRankMetric(d, u, -1), NotPositiveDefinite);
  CHECK_THROWS(LowRankMetric(Vector::Constant(2, -1.0)));
}

TEST_CASE("signed terms are refactored, cancelling terms drop") {
  const Vector d = Vector::Ones(3);
  Matrix terms(3, 2);
  terms << 1.0, 1.0, 0.0, 0.0, 0.0, 0.0;
  const LowRankMetric v = LowRankMetric::from_signed_terms(d, terms, {1, -1});
  CHECK(v.rank() == 0);
  const Matrix dense = oracle::dense_metric(v);
  CHECK((dense - Matrix::Identity(3, 3)).norm() <= 1e-12);
}
