// proxqn: solve / race / validate / prox.
//
// Exit codes: 0 success, 1 validation failure, 2 configuration or input
// error, 3 solver failure.

#include "proxqn/bench.hpp"
#include "proxqn/cli_config.hpp"
#include "proxqn/trace_io.hpp"

#include "suites.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace proxqn;

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitConfig = 2;
constexpr int kExitSolver = 3;

const std::vector<Family> kExperimentFamilies = {Family::LassoGaussian, Family::LassoDiff3d, Family::GroupLasso};

// Flags whose presence overrides the family defaults.
struct RecipeFlags {
  std::string family = "lasso_gaussian";
  long m = 0;
  long n = 0;
  long side = 0;
  double lambda = 0.0;
  long block_cap = 0;
  std::uint64_t seed = 0;
  bool full_scale = false;
  CLI::Option* m_opt = nullptr;
  CLI::Option* n_opt = nullptr;
  CLI::Option* side_opt = nullptr;
  CLI::Option* lambda_opt = nullptr;
  CLI::Option* cap_opt = nullptr;

  void add(CLI::App* app, bool with_family) {
    if (with_family) app->add_option("--family", family, "lasso_gaussian | lasso_diff3d | group_lasso | nnls");
    m_opt = app->add_option("--m", m, "rows of A");
    n_opt = app->add_option("--n", n, "columns of A");
    side_opt = app->add_option("--side", side, "grid side (lasso_diff3d)");
    lambda_opt = app->add_option("--lambda", lambda, "regularization weight");
    cap_opt = app->add_option("--block-cap", block_cap, "largest group size (group_lasso)");
    app->add_option("--seed", seed, "instance seed");
    app->add_flag("--full-scale", full_scale, "full benchmark dimensions instead of the desk defaults");
  }

  ProblemRecipe recipe(Family f) const {
    ProblemRecipe r = full_scale ? ProblemRecipe::full(f, seed) : ProblemRecipe::desk(f, seed);
    if (m_opt->count()) r.m = m;
    if (n_opt->count()) r.n = n;
    if (side_opt->count()) r.side = side;
    if (lambda_opt->count()) r.lambda = lambda;
    if (cap_opt->count()) r.block_cap = block_cap;
    return r;
  }
};

void add_solver_flags(CLI::App* app, CliConfig& c) {
  app->add_option("--tol", c.tol, "stop when ||p_k||_inf <= tol");
  app->add_option("--max-iter", c.max_iter, "iteration budget");
  app->add_option("--time-budget", c.time_budget, "seconds per run (0 = none)");
  app->add_option("--line-search", c.line_search, "backtracking | none");
  app->add_option("--kappa", c.kappa, "prox step");
  app->add_option("--gamma", c.gamma, "quasi-Newton safeguard in (0, 1)");
  app->add_option("--root-finder", c.root_finder, "auto | exact | bisection | ssnewton | closed-form | group | nested");
  app->add_flag("!--no-timing", c.timing, "write 0 in the seconds column (deterministic traces)");
  app->add_option("--cache-dir", c.cache_dir, "reference cache (default $PROXQN_CACHE_DIR or .proxqn_cache)");
}

fs::path cache_of(const CliConfig& c) { return c.cache_dir.empty() ? default_cache_dir() : fs::path(c.cache_dir); }

ProblemInstance prepared(const ProblemRecipe& recipe, const CliConfig& c) {
  ProblemInstance inst = generate(recipe);
  const ReferenceSolution ref = reference_solution(inst, cache_of(c));
  if (ref.approximate) std::cerr << "warning: reference for " << recipe.id() << " is approximate\n";
  attach_reference(inst, ref);
  return inst;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6e", v);
  return buf;
}

int cmd_solve(const CliConfig& c) {
  ProblemInstance inst;
  try {
    inst = prepared(c.recipe, c);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  SolverResult result;
  try {
    result = run_solver(c.solver, inst.spec, c.solver_options());
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: solver failed: " << e.what() << "\n";
    return kExitSolver;
  }
  const fs::path out = c.output.empty() ? fs::path(trace_file_name(c.recipe, c.solver)) : fs::path(c.output);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_trace_csv(out, result.trace, c.timing);
  const double err = result.objective - *inst.spec.f_star;
  std::cout << "solver=" << c.solver << " recipe=" << c.recipe.id() << " termination=" << to_string(result.termination)
            << " iterations=" << result.iterations << " final_error=" << num(err) << " objective=" << num(result.objective)
            << " seconds=" << num(c.timing ? result.seconds : 0.0) << " trace=" << out.string() << std::endl;
  if (result.termination == Termination::Failed || result.termination == Termination::Diverged) {
    std::cerr << "error: " << result.message << "\n";
    return kExitSolver;
  }
  return 0;
}

int cmd_race(const CliConfig& c, const RecipeFlags& flags) {
  std::vector<ProblemInstance> problems;
  for (Family f : c.families.empty() ? kExperimentFamilies : c.families) problems.push_back(prepared(flags.recipe(f), c));
  RaceOptions options;
  options.solvers = c.solvers.empty() ? solver_ids() : c.solvers;
  options.budget = c.solver_options();
  options.jobs = c.jobs;

  const fs::path dir = c.output.empty() ? fs::path("race") : fs::path(c.output);
  fs::create_directories(dir);
  const auto entries = race(problems, options, [](const RaceEntry& e) {
    // One line per finished run, in completion order.
    std::cout << "done solver=" << e.solver << " recipe=" << e.recipe.id()
              << " termination=" << (e.failed ? "error" : to_string(e.result.termination))
              << " iterations=" << e.result.iterations << std::endl;
  });
  std::vector<std::string> files;
  int failed = 0;
  for (const RaceEntry& e : entries) {
    const std::string name = trace_file_name(e.recipe, e.solver);
    write_trace_csv(dir / name, e.result.trace, c.timing);
    files.push_back(name);
    if (e.failed) {
      ++failed;
      std::cerr << "error: " << e.solver << " on " << e.recipe.id() << ": " << e.error << "\n";
    }
  }
  nlohmann::json manifest = race_manifest(entries, options, files);
  if (!c.timing) {
    for (auto& run : manifest["runs"])
      if (run.contains("seconds")) run["seconds"] = 0.0;
  }
  std::ofstream(dir / "manifest.json") << manifest.dump(2) << "\n";
  if (c.gnuplot) {
    for (const ProblemInstance& p : problems) {
      std::vector<std::string> mine;
      for (const std::string& solver : options.solvers) mine.push_back(trace_file_name(p.recipe, solver));
      std::ofstream(dir / (p.recipe.id() + ".gp")) << gnuplot_script(mine, p.recipe.id());
    }
  }
  std::cout << "race runs=" << entries.size() << " failed=" << failed << " dir=" << dir.string() << std::endl;
  return failed == 0 ? 0 : kExitSolver;
}

int cmd_validate(const CliConfig& c) {
  validation::SuiteConfig config;
  config.max_n = c.max_n;
  config.jobs = c.jobs;
  config.cache_dir = c.cache_dir.empty() ? default_cache_dir() : fs::path(c.cache_dir);
  std::vector<const validation::Suite*> chosen;
  if (c.suite.empty()) {
    for (const auto& s : validation::suites()) chosen.push_back(&s);
  } else if (const auto* s = validation::find_suite(c.suite)) {
    chosen.push_back(s);
  } else {
    std::cerr << "error: unknown suite '" << c.suite << "'; available:";
    for (const auto& s : validation::suites()) std::cerr << " " << s.name;
    std::cerr << "\n";
    return kExitConfig;
  }
  int failed = 0;
  for (const auto* s : chosen) {
    validation::CheckResult r;
    try {
      r = s->run(config);
    } catch (const std::exception& e) {
      r.detail = std::string("exception: ") + e.what();
    }
    if (!r.passed) ++failed;
    std::cout << (r.passed ? "PASS " : "FAIL ") << s->name << ": " << r.detail << std::endl;
  }
  std::cout << "suites=" << chosen.size() << " failed=" << failed << std::endl;
  return failed == 0 ? 0 : kExitValidation;
}

int cmd_prox(const CliConfig& c) {
  const ProxInput in = read_prox_input(c.input);
  ScaledProxOptions options;
  options.finder = in.finder;
  ScaledProxResult r;
  try {
    r = scaled_prox(in.metric, *in.h, in.x, in.kappa, options);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitSolver;
  }
  std::printf("# prox\n");
  for (Index i = 0; i < r.point.size(); ++i) std::printf("%.17g\n", r.point[i]);
  // alpha relative to the factors in the file: the root itself for a direct
  // metric; for W = V^{-1} the multiplier form U^T W (p - x).
  const Vector alpha = in.inverse ? Vector(in.u.transpose() * in.metric.apply(r.point - in.x)) : r.report.alpha;
  std::printf("# alpha:");
  for (Index i = 0; i < alpha.size(); ++i) std::printf(" %.17g", alpha[i]);
  if (in.inverse) {
    std::printf("\n# root:");
    for (Index i = 0; i < r.report.alpha.size(); ++i) std::printf(" %.17g", r.report.alpha[i]);
  }
  std::printf("\n# residual: %.3e\n# method: %s\n# iterations: %d\n", r.report.residual,
              to_string(r.report.method).c_str(), r.report.iterations);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Proximal quasi-Newton solvers, benchmark races and validation suites"};
  app.set_version_flag("--version", std::string(version()));
  app.require_subcommand(1);
  CliConfig config;
  std::string config_file;
  bool print_config = false;
  app.add_option("--config", config_file, "JSON configuration; command-line flags override it");
  app.add_flag("--print-config", print_config, "print the resolved configuration as JSON and exit");

  RecipeFlags solve_recipe;
  auto* solve = app.add_subcommand("solve", "run one solver on one generated problem");
  solve_recipe.add(solve, true);
  solve->add_option("--solver", config.solver, "zero-sr1 | zero-bfgs | ista | fista-bb | spg | fista-restart");
  solve->add_option("--output", config.output, "trace CSV (default <recipe>__<solver>.csv)");
  add_solver_flags(solve, config);

  RecipeFlags race_recipe;
  std::vector<std::string> race_families;
  auto* race_cmd = app.add_subcommand("race", "run several solvers on the experiment families");
  race_recipe.add(race_cmd, false);
  race_cmd->add_option("--family", race_families, "families to race (repeatable; default: the three experiments)");
  race_cmd->add_option("--solvers", config.solvers, "solver ids (default: all)")->delimiter(',');
  race_cmd->add_option("--jobs", config.jobs, "worker threads (default: logical cores)");
  race_cmd->add_option("--output", config.output, "output directory (default ./race)");
  race_cmd->add_flag("--gnuplot", config.gnuplot, "also write one gnuplot script per problem");
  add_solver_flags(race_cmd, config);

  auto* validate = app.add_subcommand("validate", "run the invariant suites");
  validate->add_option("--suite", config.suite, "one suite (default: all)");
  validate->add_option("--n", config.max_n, "largest instance dimension of the prox suites");
  validate->add_option("--jobs", config.jobs, "worker threads for the desk races");
  validate->add_option("--cache-dir", config.cache_dir, "reference cache");

  auto* prox = app.add_subcommand("prox", "scaled prox of a vector read from a file");
  prox->add_option("--input", config.input, "input file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (!config_file.empty()) {
      std::ifstream in(config_file);
      if (!in) throw ConfigError("cannot open '" + config_file + "'");
      CliConfig from_file;
      try {
        from_json(nlohmann::json::parse(in), from_file);
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
      }
      // Flags given on the command line win; others come from the file.
      CliConfig defaults;
      auto merge = [&](auto CliConfig::*field) {
        if (config.*field == defaults.*field) config.*field = from_file.*field;
      };
      merge(&CliConfig::solver);
      merge(&CliConfig::solvers);
      merge(&CliConfig::tol);
      merge(&CliConfig::max_iter);
      merge(&CliConfig::time_budget);
      merge(&CliConfig::line_search);
      merge(&CliConfig::kappa);
      merge(&CliConfig::gamma);
      merge(&CliConfig::root_finder);
      merge(&CliConfig::output);
      merge(&CliConfig::timing);
      merge(&CliConfig::jobs);
      merge(&CliConfig::gnuplot);
      merge(&CliConfig::cache_dir);
      merge(&CliConfig::suite);
      merge(&CliConfig::max_n);
      merge(&CliConfig::input);
      config.recipe = from_file.recipe;
      config.families = from_file.families;
    }
    if (solve->parsed()) {
      config.command = Command::Solve;
      if (config_file.empty() || solve->get_option("--family")->count()) {
        config.recipe = solve_recipe.recipe(parse_family(solve_recipe.family));
      }
    } else if (race_cmd->parsed()) {
      config.command = Command::Race;
      if (!race_families.empty()) {
        config.families.clear();
        for (const auto& f : race_families) config.families.push_back(parse_family(f));
      }
    } else if (validate->parsed()) {
      config.command = Command::Validate;
    } else {
      config.command = Command::Prox;
    }
    config.validate();

    if (print_config) {
      std::cout << nlohmann::json(config).dump(2) << std::endl;
      return 0;
    }
    switch (config.command) {
      case Command::Solve: return cmd_solve(config);
      case Command::Race: return cmd_race(config, race_recipe);
      case Command::Validate: return cmd_validate(config);
      case Command::Prox: return cmd_prox(config);
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitSolver;
  }
  return 0;
}
