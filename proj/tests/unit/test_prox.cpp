#include <doctest.h>

#include "oracles.hpp"

#include "proxqn/prox.hpp"
#include "proxqn/rng.hpp"

#include <cmath>

using namespace proxqn;

namespace {

// Golden-section search compares function values, so near a smooth minimum
// it resolves the minimizer only to about sqrt(eps) relative.
constexpr double kGoldenTol = 1e-7;

Vector vec(std::initializer_list<double> values) {
  Vector v(static_cast<Index>(values.size()));
  Index i = 0;
  for (double x : values) v[i++] = x;
  return v;
}

// Weighted objective of a diagonal prox.
double weighted(const ProxOperator& h, const Vector& x, const Vector& d, double kappa, const Vector& z) {
  return kappa * h.value(z) + 0.5 * (d.array() * (z - x).array().square()).sum();
}

}  // namespace

TEST_CASE("l1 prox") {
  const L1Prox l1(1.0);
  CHECK((l1.prox(vec({2, 2}), vec({2, 1})) - vec({1.5, 1.0})).norm() == 0.0);
  CHECK(l1.prox(Vector::Zero(3), Vector::Ones(3)).norm() == 0.0);

  Rng rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const Vector x = 3.0 * rng.normal_vector(6);
    const Vector d = rng.uniform_vector(6, 0.2, 3.0);
    const double kappa = rng.uniform(0.2, 2.0);
    const Vector p = l1.prox(x, d, kappa);
    for (Index i = 0; i < 6; ++i) {
      const double z = oracle::golden_section_min(
          [&](double t) { return kappa * std::abs(t) + 0.5 * d[i] * (t - x[i]) * (t - x[i]); }, -10.0, 10.0);
      CHECK(std::abs(p[i] - z) <= kGoldenTol);
    }
  }
}

TEST_CASE("nonneg, box, hinge") {
  CHECK((NonNegProx().prox(vec({-1, 2}), Vector::Ones(2)) - vec({0, 2})).norm() == 0.0);
  CHECK((BoxProx(-1, 1).prox(vec({-3, 0.5}), Vector::Ones(2)) - vec({-1, 0.5})).norm() == 0.0);
  const HingeProx hinge(1.0);
  CHECK(hinge.prox(vec({2}), vec({1}))[0] == doctest::Approx(1.0));
  CHECK(hinge.prox(vec({0.5}), vec({1}))[0] == doctest::Approx(0.0));
  CHECK(hinge.prox(vec({-1}), vec({1}))[0] == doctest::Approx(-1.0));

  Rng rng(22);
  for (int trial = 0; trial < 100; ++trial) {
    const double x = rng.uniform(-4.0, 4.0);
    const double d = rng.uniform(0.2, 3.0);
    const double z = oracle::golden_section_min(
        [&](double t) { return std::max(0.0, t) + 0.5 * d * (t - x) * (t - x); }, -10.0, 10.0);
    CHECK(std::abs(hinge.prox(vec({x}), vec({d}))[0] - z) <= kGoldenTol);
  }
}

TEST_CASE("descriptors reproduce the diagonal prox") {
  Rng rng(23);
  const std::vector<ProxPtr> ops = {std::make_shared<L1Prox>(0.7), std::make_shared<NonNegProx>(),
                                    std::make_shared<BoxProx>(-0.5, 1.5), std::make_shared<HingeProx>(1.3),
                                    std::make_shared<LinfBallProx>(0.8), std::make_shared<ZeroProx>()};
  for (const auto& op : ops) {
    REQUIRE(op->has_descriptor());
    const Vector x = 2.0 * rng.normal_vector(20);
    const Vector d = rng.uniform_vector(20, 0.3, 3.0);
    const Vector p = op->prox(x, d, 0.9);
    for (Index i = 0; i < 20; ++i) {
      const PiecewiseAffine pa = op->descriptor(i, d[i], 0.9);
      CHECK(pa.is_monotone_nonexpansive());
      CHECK(pa.continuity_defect() <= 1e-14);
      CHECK(std::abs(pa(x[i]) - p[i]) <= 1e-14);
    }
  }
}

TEST_CASE("simplex and l1-ball projections") {
  CHECK((SimplexProx(1.0).prox(vec({0.5, 0.5}), Vector::Ones(2)) - vec({0.5, 0.5})).norm() <= 1e-15);
  CHECK((L1BallProx(1.0).prox(vec({2, 0}), Vector::Ones(2)) - vec({1, 0})).norm() <= 1e-15);

  Rng rng(24);
  for (int trial = 0; trial < 60; ++trial) {
    const Index n = 2 + rng.index(5);
    const Vector x = 2.0 * rng.normal_vector(n);
    const Vector d = rng.uniform_vector(n, 0.3, 3.0);
    const double radius = rng.uniform(0.3, 2.0);
    CHECK((SimplexProx(radius).prox(x, d) - oracle::simplex_projection_enumerated(x, d, radius)).norm() <= 1e-10);
    CHECK((L1BallProx(radius).prox(x, d) - oracle::l1_ball_projection_enumerated(x, d, radius)).norm() <= 1e-10);
  }
}

TEST_CASE("linf-norm and max prox via the Moreau identity") {
  CHECK(LinfNormProx(1.0).prox(vec({0.5, -0.5}), Vector::Ones(2)).norm() <= 1e-15);
  Rng rng(25);
  const Vector x = rng.normal_vector(5);
  CHECK((MaxProx(0.0).prox(x, Vector::Ones(5)) - x).norm() <= 1e-15);

  // prox_h(x) + prox_{h*}(x) = x in the Euclidean metric.
  for (double lambda : {0.3, 1.0, 2.5}) {
    const auto linf = std::make_shared<LinfNormProx>(lambda);
    const auto mx = std::make_shared<MaxProx>(lambda);
    for (const ProxPtr& h : std::vector<ProxPtr>{linf, mx}) {
      const Vector v = 2.0 * rng.normal_vector(7);
      const ConjugateProx conj(h);
      const Vector r = h->prox(v, Vector::Ones(7)) + conj.prox(v, Vector::Ones(7)) - v;
      CHECK(r.lpNorm<Eigen::Infinity>() <= 1e-12);
    }
  }
}

TEST_CASE("group l2 prox") {
  const GroupL2Prox single(1.0, {2});
  const Vector xb = vec({std::sqrt(2.0), std::sqrt(2.0)});  // norm 2
  CHECK((single.prox(xb, Vector::Ones(2)) - 0.5 * xb).norm() <= 1e-15);
  CHECK(single.prox(vec({0.3, 0.4}), Vector::Ones(2)).norm() == 0.0);

  Rng rng(26);
  const GroupL2Prox group(0.8, {3, 1, 2});
  for (int trial = 0; trial < 20; ++trial) {
    const Vector x = 1.5 * rng.normal_vector(6);
    Vector d(6);
    d << 1.5, 1.5, 1.5, 0.7, 2.0, 2.0;
    const Vector p = group.prox(x, d);
    // Per block the prox is x_b scaled by the minimizer of a scalar problem in t = ||z_b||.
    Index start = 0;
    for (Index size : {3, 1, 2}) {
      const Vector b = x.segment(start, size);
      const double db = d[start];
      const double t = oracle::golden_section_min(
          [&](double s) { return 0.8 * s + 0.5 * db * (s - b.norm()) * (s - b.norm()); }, 0.0, 10.0);
      CHECK((p.segment(start, size) - t * b / b.norm()).norm() <= kGoldenTol);
      start += size;
    }
  }
}

TEST_CASE("affine constraint prox") {
  Matrix a(1, 2);
  a << 1.0, 0.0;
  const AffineProx aff(a, vec({0.0}));
  CHECK((aff.prox(vec({3, 4}), Vector::Ones(2)) - vec({0, 4})).norm() <= 1e-15);
  CHECK((aff.prox(vec({0, 4}), Vector::Ones(2)) - vec({0, 4})).norm() <= 1e-15);

  Rng rng(27);
  const Matrix a2 = rng.normal_matrix(2, 5);
  const Vector b2 = rng.normal_vector(2);
  const AffineProx aff2(a2, b2);
  const Vector x = rng.normal_vector(5);
  const Vector d = rng.uniform_vector(5, 0.5, 2.0);
  const Vector p = aff2.prox(x, d);
  CHECK((a2 * p - b2).norm() <= 1e-10);
  // D (p - x) lies in range(A^T), i.e. is orthogonal to null(A).
  const Matrix null_basis = Eigen::FullPivLU<Matrix>(a2).kernel();
  CHECK((null_basis.transpose() * (d.asDiagonal() * (p - x))).norm() <= 1e-10);
}

TEST_CASE("diagonal prox is non-expansive in its metric") {
  Rng rng(28);
  const std::vector<ProxPtr> ops = {std::make_shared<L1Prox>(0.5), std::make_shared<HingeProx>(1.0),
                                    std::make_shared<SimplexProx>(1.0), std::make_shared<L1BallProx>(1.0),
                                    std::make_shared<GroupL2Prox>(0.5, std::vector<Index>{4, 4})};
  for (const auto& op : ops) {
    for (int trial = 0; trial < 30; ++trial) {
      const Vector d = op->kind() == ProxKind::GroupL2 ? Vector(Vector::Constant(8, rng.uniform(0.5, 2.0)))
                                                     : rng.uniform_vector(8, 0.5, 2.0);
      const Vector x = 2.0 * rng.normal_vector(8);
      const Vector y = 2.0 * rng.normal_vector(8);
      const Vector diff = op->prox(x, d) - op->prox(y, d);
      const double lhs = (d.array() * diff.array().square()).sum();
      const double rhs = (d.array() * (x - y).array().square()).sum();
      CHECK(lhs <= rhs * (1.0 + 1e-12));
    }
  }
}

TEST_CASE("prox minimizes its objective") {
  Rng rng(29);
  const L1BallProx ball(1.2);
  const Vector x = 2.0 * rng.normal_vector(6);
  const Vector d = rng.uniform_vector(6, 0.5, 2.0);
  const Vector p = ball.prox(x, d);
  const double best = weighted(ball, x, d, 1.0, p);
  for (int k = 0; k < 200; ++k) {
    const Vector q = ball.prox(p + 0.1 * rng.normal_vector(6), Vector::Ones(6));  // feasible perturbation
    CHECK(weighted(ball, x, d, 1.0, q) >= best - 1e-12);
  }
}

TEST_CASE("bad parameters are rejected") {
  CHECK_THROWS(L1Prox(-1.0));
  CHECK_THROWS(BoxProx(1.0, -1.0));
  CHECK_THROWS(SimplexProx(0.0));
  CHECK_THROWS(L1Prox(1.0).prox(Vector::Ones(3), Vector::Ones(2)));
}
