#pragma once

// Problem families, reference optima and solver races.

#include "proxqn/solver.hpp"

#include <Eigen/SparseCore>
#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace proxqn {

const char* version();

enum class Family { LassoGaussian, LassoDiff3d, GroupLasso, Nnls };

std::string to_string(Family family);
Family parse_family(const std::string& name);
const std::vector<std::string>& family_names();

/// Everything needed to rebuild an instance. For diff3d the column count is
/// side^3 and the row count 3 side^3; m and n are ignored.
struct ProblemRecipe {
  Family family = Family::LassoGaussian;
  Index m = 150;
  Index n = 300;
  Index side = 7;
  double lambda = 0.1;
  Index block_cap = 12;  // group_lasso only
  std::uint64_t seed = 0;

  Index rows() const;
  Index cols() const;
  /// Human-readable, filesystem-safe identifier.
  std::string id() const;
  /// FNV-1a of the canonical description; keys the reference cache.
  std::uint64_t hash() const;
  std::string hash_hex() const;
  void validate() const;

  /// Shrunk defaults that run at desk scale.
  static ProblemRecipe desk(Family family, std::uint64_t seed = 0);
  /// Full benchmark dimensions.
  static ProblemRecipe full(Family family, std::uint64_t seed = 0);

  bool operator==(const ProblemRecipe&) const = default;
};

void to_json(nlohmann::json& j, const ProblemRecipe& recipe);
void from_json(const nlohmann::json& j, ProblemRecipe& recipe);

using SparseMatrix = Eigen::SparseMatrix<double>;

/// Dense or sparse linear operator A.
class DataMatrix {
 public:
  DataMatrix() = default;
  explicit DataMatrix(Matrix dense) : dense_(std::move(dense)), sparse_flag_(false) {}
  explicit DataMatrix(SparseMatrix sparse) : sparse_(std::move(sparse)), sparse_flag_(true) {}

  bool is_sparse() const { return sparse_flag_; }
  Index rows() const { return sparse_flag_ ? sparse_.rows() : dense_.rows(); }
  Index cols() const { return sparse_flag_ ? sparse_.cols() : dense_.cols(); }
  const Matrix& dense() const { return dense_; }
  const SparseMatrix& sparse() const { return sparse_; }
  Matrix to_dense() const { return sparse_flag_ ? Matrix(sparse_) : dense_; }

  Vector apply(const Vector& x) const;
  Vector apply_transpose(const Vector& y) const;

 private:
  Matrix dense_;
  SparseMatrix sparse_;
  bool sparse_flag_ = false;
};

/// ||A^T A||_2 by power iteration from a seeded start.
double spectral_norm_sq(const DataMatrix& a, int max_steps = 50, double tol = 1e-8);

/// f(x) = 1/2 ||A x - b||^2 with the gradient and a Lipschitz estimate.
ProblemSpec least_squares_problem(DataMatrix a, Vector b, ProxPtr h);
ProblemSpec least_squares_problem(std::shared_ptr<const DataMatrix> a, Vector b, ProxPtr h);

/// Sparse forward differences along the three axes of a side^3 grid,
/// stacked [Dx; Dy; Dz]; rows that would step off the grid are zero.
SparseMatrix forward_difference_3d(Index side);

/// Block sizes drawn uniformly from {1, ..., cap}; the last is truncated so
/// the sizes sum to n.
std::vector<Index> random_block_sizes(Index n, Index cap, std::uint64_t seed);

struct ProblemInstance {
  ProblemRecipe recipe;
  std::shared_ptr<const DataMatrix> a;
  Vector b;
  std::vector<Index> block_sizes;  // group_lasso only
  ProblemSpec spec;
};

ProblemInstance generate(const ProblemRecipe& recipe);

struct ReferenceOptions {
  double tol = 1e-12;     // on the FISTA step norm
  int max_iter = 200000;  // beyond this the reference is flagged approximate
};

struct ReferenceSolution {
  Vector x;
  double f_star = 0.0;
  bool approximate = false;
  bool from_cache = false;
  int iterations = 0;
};

/// High-accuracy minimizer by restarted FISTA; never cached.
ReferenceSolution reference_solution(const ProblemSpec& problem, const ReferenceOptions& options = {});

/// Cached variant keyed by the recipe hash. Cache hits return the stored
/// bits unchanged.
ReferenceSolution reference_solution(const ProblemInstance& instance, const std::filesystem::path& cache_dir,
                                     const ReferenceOptions& options = {});

/// $PROXQN_CACHE_DIR, or ".proxqn_cache".
std::filesystem::path default_cache_dir();

/// Attaches x*, F* to the instance's problem.
void attach_reference(ProblemInstance& instance, const ReferenceSolution& reference);

struct RaceOptions {
  std::vector<std::string> solvers;
  SolverOptions budget;  // shared verbatim by every run
  unsigned jobs = 0;     // 0: hardware concurrency
};

struct RaceEntry {
  std::string solver;
  ProblemRecipe recipe;
  SolverResult result;
  bool failed = false;
  std::string error;
};

/// Every (problem, solver) pair under the same budget, each from its own
/// cold start. Results come back in (problem, solver) order; the sink, if
/// given, sees them as they finish, one at a time.
std::vector<RaceEntry> race(const std::vector<ProblemInstance>& problems, const RaceOptions& options,
                            const std::function<void(const RaceEntry&)>& sink = {});

}  // namespace proxqn
