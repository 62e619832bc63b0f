#pragma once

// Parsed command-line configuration and the plain-text input of `proxqn prox`.

#include "proxqn/bench.hpp"
#include "proxqn/metric.hpp"
#include "proxqn/prox.hpp"
#include "proxqn/scaled_prox.hpp"

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace proxqn {

/// Invalid flags, values or input files; the CLI maps it to exit code 2.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Command { Solve, Race, Validate, Prox };

std::string to_string(Command command);
Command parse_command(const std::string& name);

struct CliConfig {
  Command command = Command::Solve;

  // solve / race
  ProblemRecipe recipe;          // solve
  std::vector<Family> families;  // race; empty = the three experiment families
  std::string solver = "zero-sr1";
  std::vector<std::string> solvers;  // race; empty = all
  double tol = 1e-10;
  int max_iter = 10000;
  double time_budget = 0.0;  // seconds, 0 = none
  std::string line_search = "backtracking";
  double kappa = 1.0;
  double gamma = 0.8;
  std::string root_finder = "auto";
  std::string output;  // trace CSV (solve) or directory (race)
  bool timing = true;
  unsigned jobs = 0;
  bool gnuplot = false;
  std::string cache_dir;

  // validate
  std::string suite;  // empty = all
  long max_n = 50;

  // prox
  std::string input;

  /// Throws ConfigError on unknown ids or out-of-range values.
  void validate() const;
  /// Budget, tolerance and method options shared by every run.
  SolverOptions solver_options() const;

  bool operator==(const CliConfig&) const = default;
};

void to_json(nlohmann::json& j, const CliConfig& config);
/// Missing keys keep their defaults; type errors become ConfigError.
void from_json(const nlohmann::json& j, CliConfig& config);

/// Input of `proxqn prox`: `# key: value` metadata and `# vector: name`
/// sections with one number per line. Keys: h (zero, l1, nonneg, box, hinge,
/// simplex, l1-ball, group, affine), lambda, lo, hi, radius, blocks, kappa,
/// signs (+/- per factor), finder, metric (direct | inverse). Vectors: x, d,
/// u (repeat for rank 2), and for affine h one `a` per constraint row plus
/// `b`. Without u the metric is the diagonal d.
///
/// With `metric: inverse` the prox is taken in W = V^{-1} for
/// V = D + U S U^T, i.e. argmin h(y) + 1/2 ||y - x||^2_{V^{-1}}.
struct ProxInput {
  LowRankMetric metric;  // the metric the prox is computed in
  Matrix u;              // the factors as given in the file
  bool inverse = false;
  ProxPtr h;
  Vector x;
  double kappa = 1.0;
  RootFinderChoice finder = RootFinderChoice::Auto;
};

/// Throws ConfigError with the line number on malformed input.
ProxInput parse_prox_input(std::istream& in);
ProxInput read_prox_input(const std::string& path);

}  // namespace proxqn
