#include <doctest.h>

#include "oracles.hpp"

#include "proxqn/bench.hpp"
#include "proxqn/rng.hpp"
#include "proxqn/solver.hpp"

#include <cmath>

using namespace proxqn;

namespace {

ProblemSpec dense_problem(const Matrix& a, const Vector& b, ProxPtr h) {
  return least_squares_problem(DataMatrix(a), b, std::move(h));
}

}  // namespace

TEST_CASE("scalar lasso, every solver") {
  // 1/2 (2x - 3)^2 + |x|: soft-threshold gives x = 1.25.
  const double expected = oracle::scalar_lasso(2.0, 3.0, 1.0);
  CHECK(expected == doctest::Approx(1.25));
  const ProblemSpec problem = dense_problem(Matrix::Constant(1, 1, 2.0), Vector::Constant(1, 3.0),
                                            std::make_shared<L1Prox>(1.0));
  for (const auto& id : solver_ids()) {
    CAPTURE(id);
    const SolverResult r = run_solver(id, problem);
    CHECK(r.termination == Termination::Converged);
    CHECK(r.x[0] == doctest::Approx(1.25).epsilon(1e-9));
  }
}

TEST_CASE("NNLS with A = Id returns b_+") {
  Vector b(4);
  b << 1.0, -2.0, 0.5, 3.0;
  const ProblemSpec problem = dense_problem(Matrix::Identity(4, 4), b, std::make_shared<NonNegProx>());
  for (const auto& id : solver_ids()) {
    CAPTURE(id);
    const SolverResult r = run_solver(id, problem);
    CHECK((r.x - b.cwiseMax(0.0)).lpNorm<Eigen::Infinity>() <= 1e-9);
  }
}

TEST_CASE("solvers reach the brute-force minimizer of a small lasso") {
  Rng rng(7);
  const Matrix a = rng.normal_matrix(20, 30);
  const Vector b = rng.normal_vector(20);
  oracle::OracleH h;
  h.kind = oracle::HKind::L1;
  h.lambda = 0.5;
  const auto ref = oracle::quadratic_composite_minimizer(a.transpose() * a, a.transpose() * b, h);
  REQUIRE(ref.converged);
  const ProblemSpec problem = dense_problem(a, b, h.make_operator());
  const double f_star = problem.objective(ref.z);
  SolverOptions opts;
  opts.max_iter = 20000;
  for (const auto& id : solver_ids()) {
    CAPTURE(id);
    const SolverResult r = run_solver(id, problem, opts);
    CHECK(r.termination == Termination::Converged);
    CHECK(r.objective - f_star <= 1e-9 * (1.0 + std::abs(f_star)));
    CHECK((r.x - ref.z).lpNorm<Eigen::Infinity>() <= 1e-5);
  }
}

TEST_CASE("zero-memory methods converge on a group lasso") {
  Rng rng(8);
  const Matrix a = rng.uniform_matrix(25, 20);
  const Vector b = rng.uniform_vector(25);
  oracle::OracleH h;
  h.kind = oracle::HKind::Group;
  h.lambda = 0.3;
  h.blocks = {3, 5, 2, 6, 4};
  const auto ref = oracle::quadratic_composite_minimizer(a.transpose() * a, a.transpose() * b, h);
  const ProblemSpec problem = dense_problem(a, b, h.make_operator());
  for (const char* id : {"zero-sr1", "zero-bfgs"}) {
    CAPTURE(id);
    const SolverResult r = run_solver(id, problem);
    CHECK(r.termination == Termination::Converged);
    CHECK(r.objective - problem.objective(ref.z) <= 1e-9);
  }
}

TEST_CASE("trace objective never increases under backtracking") {
  Rng rng(9);
  const ProblemSpec problem =
      dense_problem(rng.normal_matrix(30, 50), rng.normal_vector(30), std::make_shared<L1Prox>(0.2));
  const SolverResult r = run_zero_sr1(problem);
  REQUIRE(r.trace.size() > 2);
  for (std::size_t k = 1; k < r.trace.size(); ++k)
    CHECK(r.trace[k].objective <= r.trace[k - 1].objective * (1.0 + 1e-14) + 1e-14);
}

TEST_CASE("line search") {
  // F(x) = 1/2 x^2 with a step that overshoots: p = -4 from x = 1.
  ProblemSpec problem;
  problem.dim = 1;
  problem.f = [](const Vector& x) { return 0.5 * x.squaredNorm(); };
  problem.grad = [](const Vector& x) { return x; };
  problem.h = std::make_shared<ZeroProx>();
  const Vector x = Vector::Ones(1);
  const Vector p = Vector::Constant(1, -4.0);
  const LineSearchResult none = line_search(problem, x, 0.5, p, 1.0, LineSearchMode::None);
  CHECK(none.t == 1.0);
  CHECK(none.objective == doctest::Approx(4.5));
  const LineSearchResult bt = line_search(problem, x, 0.5, p, 1.0, LineSearchMode::Backtracking);
  CHECK(bt.t == 0.25);  // t = 1/2 gives F = 0.5, not a sufficient decrease
  CHECK(bt.halvings == 2);
  CHECK(bt.objective == doctest::Approx(0.0));
  CHECK(parse_line_search("none") == LineSearchMode::None);
  CHECK_THROWS(parse_line_search("wolfe"));
}

TEST_CASE("budget and observer") {
  Rng rng(10);
  const ProblemSpec problem =
      dense_problem(rng.normal_matrix(40, 60), rng.normal_vector(40), std::make_shared<L1Prox>(0.05));
  SolverOptions opts;
  opts.max_iter = 3;
  int calls = 0;
  opts.observer = [&](const IterationInfo& info) {
    ++calls;
    CHECK(info.metric != nullptr);
    CHECK((info.iter == 1) == (info.pair == nullptr));
  };
  const SolverResult r = run_zero_bfgs(problem, opts);
  CHECK(r.termination == Termination::MaxIterations);
  CHECK(r.iterations == 3);
  CHECK(calls == 3);
  CHECK_THROWS(run_solver("newton", problem));
}

TEST_CASE("fb_step with H = Id is a proximal gradient step") {
  Vector b(3);
  b << 2.0, -0.1, 0.5;
  const ProblemSpec problem = dense_problem(Matrix::Identity(3, 3), b, std::make_shared<L1Prox>(0.2));
  const Vector x = Vector::Zero(3);
  const QNMetric id = initial_metric(3, 1.0);
  const Vector bar = fb_step(problem, x, problem.grad(x), id, 1.0).point;
  Vector expected(3);
  expected << 1.8, 0.0, 0.3;
  CHECK((bar - expected).norm() <= 1e-14);
}
