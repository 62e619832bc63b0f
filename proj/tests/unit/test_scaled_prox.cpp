#include <doctest.h>

#include "instances.hpp"
#include "oracles.hpp"

#include "proxqn/scaled_prox.hpp"

#include <cmath>

using namespace proxqn;
using oracle::HKind;

namespace {

Vector vec(std::initializer_list<double> values) {
  Vector v(static_cast<Index>(values.size()));
  Index i = 0;
  for (double x : values) v[i++] = x;
  return v;
}

Matrix col(std::initializer_list<double> values) { return vec(values); }

}  // namespace

TEST_CASE("rank 0 reduces to the diagonal prox") {
  const LowRankMetric v(vec({2.0, 0.5, 1.0}));
  const L1Prox l1(1.0);
  const Vector x = vec({1.0, -3.0, 0.2});
  CHECK((scaled_prox(v, l1, x).point - l1.prox(x, v.diag())).norm() == 0.0);
}

TEST_CASE("diagonal metric written as rank 1") {
  // V = I + e1 e1^T = diag(2, 1): separable soft-thresholding.
  const LowRankMetric v(Vector::Ones(2), col({1.0, 0.0}), 1);
  const Vector p = scaled_prox(v, L1Prox(1.0), vec({2.0, 2.0})).point;
  CHECK((p - vec({1.5, 1.0})).norm() <= 1e-12);
}

TEST_CASE("frozen brute-force values, D = I4") {
  // Oracle: restarted accelerated proximal gradient on the dense metric,
  // fixed-point residual 1e-14.
  const Vector x = vec({1.5, -0.3, 0.8, -2.0});
  const Matrix u = col({0.5, 0.5, 0.5, 0.5});
  const L1Prox l1(1.0);
  const Vector plus = scaled_prox(LowRankMetric(Vector::Ones(4), u, 1), l1, x).point;
  // u = 1/2 would make I - u u^T singular; the - case uses u = 0.4.
  const Vector minus = scaled_prox(LowRankMetric(Vector::Ones(4), Matrix(0.8 * u), -1), l1, x).point;
  CHECK((plus - vec({7.0 / 12.0, 0.0, 0.0, -11.0 / 12.0})).norm() <= 1e-10);
  CHECK((minus - vec({13.0 / 34.0, 0.0, 0.0, -19.0 / 17.0})).norm() <= 1e-10);
}

TEST_CASE("frozen brute-force value, group l1-l2 in a mixed rank-2 metric") {
  const Vector d = vec({1, 1, 2, 2, 2});
  Matrix u(5, 2);
  u << 0.3, 0.1, -0.2, 0.4, 0.5, 0.0, 0.1, -0.3, 0.2, 0.2;
  const LowRankMetric v(d, u, std::vector<int>{1, -1});
  const GroupL2Prox g(0.7, {2, 3});
  const Vector x = vec({1.0, -0.5, 2.0, 0.3, -1.2});
  const Vector expected =
      vec({0.465384562054260, -0.216887596832371, 1.770429081542053, 0.253886921075479, -0.989556581940497});
  CHECK((scaled_prox(v, g, x).point - expected).norm() <= 1e-10);
  CHECK((scaled_prox_nested(v, g, x).point - expected).norm() <= 1e-10);
}

TEST_CASE("positive orthant: root of L for V = I + e1 e1^T") {
  // p(alpha) = (x - alpha e1)_+, L(alpha) = <e1, x - p(alpha)> + alpha = alpha - 1.
  const LowRankMetric v(Vector::Ones(2), col({1.0, 0.0}), 1);
  const NonNegProx nonneg;
  const RootProblem problem(v, nonneg, vec({-1.0, 1.0}));
  const RootSolverReport exact = root_exact_piecewise_affine(problem);
  CHECK(exact.alpha[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(std::abs(root_bisection(problem, 1e-10).alpha[0] - 1.0) <= 1e-10);
}

TEST_CASE("positive orthant worked example: projection in V^{-1}, alpha = 1/2") {
  // argmin_{y >= 0} 1/2 ||y - x||^2_{V^{-1}}, V = D + u u^T, D = I, u = e1,
  // x = (-1, 1). With the multiplier lambda = V^{-1} (y - x) and alpha = u^T lambda
  // the root condition is alpha = (1 - alpha)_+, so alpha = 1/2.
  const Vector u = vec({1.0, 0.0});
  const LowRankMetric w = LowRankMetric(Vector::Ones(2), Matrix(u), 1).inverse().as_metric();
  const Vector x = vec({-1.0, 1.0});
  for (RootFinderChoice finder : {RootFinderChoice::Exact, RootFinderChoice::Bisection,
                                  RootFinderChoice::SemismoothNewton}) {
    ScaledProxOptions options;
    options.finder = finder;
    const Vector y = scaled_prox(w, NonNegProx(), x, 1.0, options).point;
    CHECK((y - vec({0.0, 1.0})).norm() <= 1e-10);
    CHECK(u.dot(w.apply(y - x)) == doctest::Approx(0.5).epsilon(1e-10));
  }
}

TEST_CASE("bisection on L(alpha) = alpha") {
  // h = 0 at x = 0: p(alpha) = -alpha u / d and L(alpha) = alpha (1 + u^2/d);
  // the bracket is [-beta, beta] with beta = 0, the first midpoint is the root.
  const LowRankMetric v(Vector::Ones(3), col({0.5, 0.5, 0.0}), 1);
  const ZeroProx zero;
  const RootProblem problem(v, zero, Vector::Zero(3));
  const RootSolverReport r = root_bisection(problem, 1e-10);
  CHECK(r.alpha[0] == 0.0);
  CHECK(r.iterations <= 1);
}

TEST_CASE("bisection refuses a bracket without a sign change") {
  const LowRankMetric v(Vector::Ones(2), col({1.0, 0.0}), 1);
  const NonNegProx nonneg;
  const RootProblem problem(v, nonneg, vec({-1.0, 1.0}));
  CHECK_THROWS_AS(root_bisection_bracket(problem, 2.0, 3.0, 1e-10), RootFindingError);
}

TEST_CASE("exact and bisection on random l1, N = 50") {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const Vector d = rng.uniform_vector(50, 0.5, 2.0);
    const LowRankMetric v = testing::random_metric(d, {trial % 2 == 0 ? 1 : -1}, rng);
    const L1Prox l1(rng.uniform(0.1, 1.5));
    const RootProblem problem(v, l1, 2.0 * rng.normal_vector(50), rng.uniform(0.3, 2.0));
    const RootSolverReport exact = root_exact_piecewise_affine(problem);
    CHECK(std::abs(problem.evaluate_scalar(exact.alpha[0])) <= 1e-12);
    CHECK(std::abs(root_bisection(problem, 1e-10).alpha[0] - exact.alpha[0]) <= 1e-9);
  }
}

TEST_CASE("exact root with a single active coordinate") {
  // u = e2 with x_2 in the linear region of the l1 prox: one affine piece.
  const LowRankMetric v(Vector::Ones(3), col({0.0, 1.0, 0.0}), 1);
  const L1Prox l1(0.5);
  const RootProblem problem(v, l1, vec({0.1, 3.0, -0.2}));
  // While x_2 - alpha > 0.5: p_2 = x_2 - alpha - 0.5 and L = 0.5 + 2 alpha.
  const RootSolverReport r = root_exact_piecewise_affine(problem);
  CHECK(r.alpha[0] == doctest::Approx(-0.25));
}

TEST_CASE("semismooth Newton is exact on affine L") {
  Rng rng(32);
  const Matrix a = rng.normal_matrix(2, 6);
  const AffineProx aff(a, rng.normal_vector(2));
  const LowRankMetric v = testing::random_metric(rng.uniform_vector(6, 0.5, 2.0), {1}, rng);
  const RootProblem problem(v, aff, rng.normal_vector(6));
  NewtonOptions options;
  options.allow_fallback = false;
  const RootSolverReport r = root_semismooth_newton(problem, options);
  CHECK(r.converged);
  CHECK(r.iterations == 1);
  CHECK(std::abs(r.alpha[0] - root_affine_closed_form(problem).alpha[0]) <= 1e-10);
}

TEST_CASE("closed-form and breakpoint special cases agree with the general path") {
  Rng rng(33);
  for (int trial = 0; trial < 10; ++trial) {
    const auto affine = testing::random_prox_instances(HKind::Affine, 1, 12, 100 + trial, 1).front();
    const auto& aff = static_cast<const AffineProx&>(*affine.h);
    CHECK((scaled_prox_affine_closed_form(affine.metric, aff, affine.x, affine.kappa).point -
           oracle::scaled_prox_brute_force(affine.dense(), affine.desc, affine.x, affine.kappa).z)
              .norm() <= 1e-9);
    const auto group = testing::random_prox_instances(HKind::Group, 1, 20, 200 + trial, 1).front();
    const auto& g = static_cast<const GroupL2Prox&>(*group.h);
    CHECK((scaled_prox_group_l1l2(group.metric, g, group.x, group.kappa).point -
           oracle::scaled_prox_brute_force(group.dense(), group.desc, group.x, group.kappa).z)
              .norm() <= 1e-8);
  }
}

TEST_CASE("rank 2 prox against the oracle, every sign pattern") {
  for (HKind kind : testing::oracle_families()) {
    const auto instances = testing::random_prox_instances(kind, 9, 20, 77, 2);
    for (const auto& inst : instances) {
      const Vector p = scaled_prox(inst.metric, *inst.h, inst.x, inst.kappa).point;
      const auto bf = oracle::scaled_prox_brute_force(inst.dense(), inst.desc, inst.x, inst.kappa);
      CHECK((p - bf.z).lpNorm<Eigen::Infinity>() <= 1e-7);
    }
  }
}

TEST_CASE("nested and coupled solves agree on mixed metrics") {
  for (HKind kind : {HKind::L1, HKind::Box, HKind::Group}) {
    const auto instances = testing::random_prox_instances(kind, 9, 20, 78, 2);
    for (std::size_t i = 2; i < instances.size(); i += 3) {  // (+, -)
      const auto& inst = instances[i];
      REQUIRE(inst.metric.is_mixed());
      const Vector coupled = scaled_prox(inst.metric, *inst.h, inst.x, inst.kappa).point;
      const Vector nested = scaled_prox_nested(inst.metric, *inst.h, inst.x, inst.kappa).point;
      CHECK((coupled - nested).lpNorm<Eigen::Infinity>() <= 1e-8);
    }
  }
}

TEST_CASE("conjugate prox by the Moreau identity in V") {
  const auto inst = testing::random_prox_instances(HKind::L1, 1, 10, 79, 1).front();
  const ConjugateProx conj(inst.h);
  const Vector direct = scaled_prox(inst.metric, conj, inst.x, 0.7).point;
  const Vector via = scaled_prox_conjugate(inst.metric, *inst.h, inst.x, 0.7).point;
  CHECK((direct - via).norm() <= 1e-10);
  // The conjugate of the l1 norm is the indicator of the l_inf ball.
  CHECK(direct.lpNorm<Eigen::Infinity>() <= inst.desc.lambda + 1e-12);
}

TEST_CASE("root bound contains the root") {
  for (HKind kind : {HKind::L1, HKind::Simplex, HKind::Box, HKind::Affine}) {
    for (const auto& inst : testing::random_prox_instances(kind, 20, 15, 80, 1)) {
      const RootProblem problem(inst.metric, *inst.h, inst.x, inst.kappa);
      const double alpha = scaled_prox(inst.metric, *inst.h, inst.x, inst.kappa).report.alpha[0];
      CHECK(std::abs(alpha) <= root_bound(problem) * (1.0 + 1e-12));
    }
  }
}

TEST_CASE("dimension mismatches throw") {
  const LowRankMetric v(Vector::Ones(3), col({1.0, 0.0, 0.0}), 1);
  CHECK_THROWS_AS(scaled_prox(v, L1Prox(1.0), Vector::Ones(2)), DimensionMismatch);
  CHECK_THROWS(RootProblem(v, L1Prox(1.0), Vector::Ones(3), 0.0));
}
