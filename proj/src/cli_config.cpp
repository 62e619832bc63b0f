#include "proxqn/cli_config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace proxqn {

std::string to_string(Command command) {
  switch (command) {
    case Command::Solve: return "solve";
    case Command::Race: return "race";
    case Command::Validate: return "validate";
    case Command::Prox: return "prox";
  }
  return "?";
}

Command parse_command(const std::string& name) {
  if (name == "solve") return Command::Solve;
  if (name == "race") return Command::Race;
  if (name == "validate") return Command::Validate;
  if (name == "prox") return Command::Prox;
  throw ConfigError("unknown command '" + name + "'");
}

namespace {

void check_solver(const std::string& id) {
  const auto& ids = solver_ids();
  if (id != "fista-restart" && std::find(ids.begin(), ids.end(), id) == ids.end()) {
    throw ConfigError("unknown solver '" + id + "'");
  }
}

}  // namespace

void CliConfig::validate() const {
  try {
    if (command == Command::Solve) {
      recipe.validate();
      check_solver(solver);
    }
    for (const auto& s : solvers) check_solver(s);
    if (!(tol >= 0.0)) throw ConfigError("tol must be non-negative");
    if (max_iter <= 0) throw ConfigError("max-iter must be positive");
    if (!(time_budget >= 0.0)) throw ConfigError("time budget must be non-negative");
    if (!(kappa > 0.0)) throw ConfigError("kappa must be positive");
    if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("gamma must lie in (0, 1)");
    parse_line_search(line_search);
    parse_root_finder(root_finder);
    if (max_n < 2) throw ConfigError("--n must be at least 2");
    if (command == Command::Prox && input.empty()) throw ConfigError("prox needs --input");
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
}

SolverOptions CliConfig::solver_options() const {
  SolverOptions o;
  o.tol = tol;
  o.max_iter = max_iter;
  if (time_budget > 0.0) o.time_budget = time_budget;
  o.line_search = parse_line_search(line_search);
  o.kappa = kappa;
  o.qn.gamma = gamma;
  o.prox.finder = parse_root_finder(root_finder);
  return o;
}

void to_json(nlohmann::json& j, const CliConfig& c) {
  std::vector<std::string> families;
  for (Family f : c.families) families.push_back(to_string(f));
  j = nlohmann::json{{"command", to_string(c.command)},
                     {"recipe", c.recipe},
                     {"families", families},
                     {"solver", c.solver},
                     {"solvers", c.solvers},
                     {"tol", c.tol},
                     {"max_iter", c.max_iter},
                     {"time_budget", c.time_budget},
                     {"line_search", c.line_search},
                     {"kappa", c.kappa},
                     {"gamma", c.gamma},
                     {"root_finder", c.root_finder},
                     {"output", c.output},
                     {"timing", c.timing},
                     {"jobs", c.jobs},
                     {"gnuplot", c.gnuplot},
                     {"cache_dir", c.cache_dir},
                     {"suite", c.suite},
                     {"max_n", c.max_n},
                     {"input", c.input}};
}

void from_json(const nlohmann::json& j, CliConfig& c) {
  try {
    if (j.contains("command")) c.command = parse_command(j.at("command").get<std::string>());
    if (j.contains("recipe")) c.recipe = j.at("recipe").get<ProblemRecipe>();
    if (j.contains("families")) {
      c.families.clear();
      for (const auto& f : j.at("families")) c.families.push_back(parse_family(f.get<std::string>()));
    }
    auto read = [&](const char* key, auto& field) {
      if (j.contains(key)) j.at(key).get_to(field);
    };
    read("solver", c.solver);
    read("solvers", c.solvers);
    read("tol", c.tol);
    read("max_iter", c.max_iter);
    read("time_budget", c.time_budget);
    read("line_search", c.line_search);
    read("kappa", c.kappa);
    read("gamma", c.gamma);
    read("root_finder", c.root_finder);
    read("output", c.output);
    read("timing", c.timing);
    read("jobs", c.jobs);
    read("gnuplot", c.gnuplot);
    read("cache_dir", c.cache_dir);
    read("suite", c.suite);
    read("max_n", c.max_n);
    read("input", c.input);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// prox input files

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double to_number(const std::string& text, int line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (trim(text.substr(used)).empty() && !std::isnan(v)) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError("line " + std::to_string(line) + ": not a number: '" + text + "'");
}

Vector to_vector(const std::vector<double>& values) {
  return Eigen::Map<const Vector>(values.data(), static_cast<Index>(values.size()));
}

}  // namespace

ProxInput parse_prox_input(std::istream& in) {
  std::map<std::string, std::string> meta;
  std::vector<std::pair<std::string, std::vector<double>>> vectors;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string text = trim(line);
    if (text.empty()) continue;
    if (text[0] == '#') {
      const std::string body = trim(text.substr(1));
      const auto colon = body.find(':');
      if (colon == std::string::npos) continue;  // plain comment
      const std::string key = trim(body.substr(0, colon));
      const std::string value = trim(body.substr(colon + 1));
      if (key == "vector") {
        if (value.empty()) throw ConfigError("line " + std::to_string(number) + ": vector without a name");
        vectors.emplace_back(value, std::vector<double>{});
      } else {
        meta[key] = value;
      }
      continue;
    }
    if (vectors.empty()) throw ConfigError("line " + std::to_string(number) + ": value outside a '# vector:' section");
    vectors.back().second.push_back(to_number(text, number));
  }

  auto get_all = [&](const std::string& name) {
    std::vector<Vector> out;
    for (const auto& [key, values] : vectors)
      if (key == name) out.push_back(to_vector(values));
    return out;
  };
  auto get_one = [&](const std::string& name) {
    const auto all = get_all(name);
    if (all.size() != 1) throw ConfigError("expected exactly one vector '" + name + "'");
    return all.front();
  };
  auto number_of = [&](const std::string& key, double fallback) {
    const auto it = meta.find(key);
    if (it == meta.end()) return fallback;
    try {
      return to_number(it->second, 0);
    } catch (const ConfigError&) {
      throw ConfigError("'" + key + "' is not a number: '" + it->second + "'");
    }
  };
  for (const auto& [key, values] : vectors) {
    if (key != "x" && key != "d" && key != "u" && key != "a" && key != "b") {
      throw ConfigError("unknown vector '" + key + "'");
    }
    if (values.empty()) throw ConfigError("vector '" + key + "' is empty");
  }

  try {
    const Vector x = get_one("x");
    const Index n = x.size();
    const Vector d = get_all("d").empty() ? Vector(Vector::Ones(n)) : get_one("d");
    if (d.size() != n) throw ConfigError("d has length " + std::to_string(d.size()) + ", x has " + std::to_string(n));

    const auto us = get_all("u");
    std::vector<int> signs;
    if (const auto it = meta.find("signs"); it != meta.end()) {
      std::istringstream tokens(it->second);
      std::string s;
      while (tokens >> s) {
        if (s == "+" || s == "+1") signs.push_back(1);
        else if (s == "-" || s == "-1") signs.push_back(-1);
        else throw ConfigError("signs: expected + or -, got '" + s + "'");
      }
    } else {
      signs.assign(us.size(), 1);
    }
    if (signs.size() != us.size()) throw ConfigError("signs lists " + std::to_string(signs.size()) +
                                                     " entries for " + std::to_string(us.size()) + " u vectors");
    Matrix factors(n, static_cast<Index>(us.size()));
    for (std::size_t k = 0; k < us.size(); ++k) {
      if (us[k].size() != n) throw ConfigError("u has the wrong length");
      factors.col(static_cast<Index>(k)) = us[k];
    }
    LowRankMetric metric = us.empty() ? LowRankMetric(d) : LowRankMetric(d, factors, signs);
    const std::string mode = meta.count("metric") ? meta.at("metric") : "direct";
    if (mode != "direct" && mode != "inverse") throw ConfigError("metric must be direct or inverse, got '" + mode + "'");
    const bool inverse = mode == "inverse";
    if (inverse) metric = metric.inverse().as_metric();

    const std::string kind = meta.count("h") ? meta.at("h") : "zero";
    const double lambda = number_of("lambda", 1.0);
    ProxPtr h;
    if (kind == "zero") h = std::make_shared<ZeroProx>();
    else if (kind == "l1") h = std::make_shared<L1Prox>(lambda);
    else if (kind == "nonneg") h = std::make_shared<NonNegProx>();
    else if (kind == "box") h = std::make_shared<BoxProx>(number_of("lo", -1.0), number_of("hi", 1.0));
    else if (kind == "hinge") h = std::make_shared<HingeProx>(lambda);
    else if (kind == "simplex") h = std::make_shared<SimplexProx>(number_of("radius", 1.0));
    else if (kind == "l1-ball") h = std::make_shared<L1BallProx>(number_of("radius", 1.0));
    else if (kind == "group") {
      std::vector<Index> blocks;
      std::istringstream tokens(meta.count("blocks") ? meta.at("blocks") : "");
      for (long size; tokens >> size;) blocks.push_back(size);
      if (blocks.empty()) throw ConfigError("group h needs '# blocks: <sizes>'");
      h = std::make_shared<GroupL2Prox>(lambda, blocks);
    } else if (kind == "affine") {
      const auto rows = get_all("a");
      if (rows.empty()) throw ConfigError("affine h needs at least one vector 'a'");
      Matrix a(static_cast<Index>(rows.size()), n);
      for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != n) throw ConfigError("a row has the wrong length");
        a.row(static_cast<Index>(i)) = rows[i].transpose();
      }
      const Vector b = get_one("b");
      if (b.size() != a.rows()) throw ConfigError("b must have one entry per row of a");
      h = std::make_shared<AffineProx>(a, b);
    } else {
      throw ConfigError("unknown h '" + kind + "'");
    }
    if (const auto dim = h->fixed_dim(); dim && *dim != n) throw ConfigError("h does not match the length of x");

    const double kappa = number_of("kappa", 1.0);
    if (!(kappa > 0.0)) throw ConfigError("kappa must be positive");
    const RootFinderChoice finder = parse_root_finder(meta.count("finder") ? meta.at("finder") : "auto");
    return ProxInput{std::move(metric), factors, inverse, std::move(h), x, kappa, finder};
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
}

ProxInput read_prox_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  return parse_prox_input(in);
}

}  // namespace proxqn
