#include "proxqn/trace_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace proxqn {

namespace {

std::string number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_number(const std::string& field) {
  if (field == "nan") return std::nan("");
  if (field == "inf") return INFINITY;
  if (field == "-inf") return -INFINITY;
  std::size_t used = 0;
  const double v = std::stod(field, &used);
  if (used != field.size()) throw std::invalid_argument("trace: bad number '" + field + "'");
  return v;
}

}  // namespace

void write_trace_csv(std::ostream& out, const std::vector<TraceRecord>& trace, bool timing) {
  out << kTraceHeader << '\n';
  for (const auto& r : trace) {
    out << r.iter << ',' << number(r.obj_err) << ',' << number(r.step_norm) << ','
        << (timing ? number(r.seconds) : "0") << '\n';
  }
}

void write_trace_csv(const std::filesystem::path& path, const std::vector<TraceRecord>& trace, bool timing) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write trace file " + path.string());
  write_trace_csv(out, trace, timing);
}

std::vector<TraceRecord> read_trace_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read trace file " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kTraceHeader) {
    throw std::invalid_argument("trace: missing header in " + path.string());
  }
  std::vector<TraceRecord> trace;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string f[4];
    for (auto& field : f) {
      if (!std::getline(ss, field, ',')) throw std::invalid_argument("trace: short row '" + line + "'");
    }
    TraceRecord r;
    r.iter = std::stoi(f[0]);
    r.obj_err = parse_number(f[1]);
    r.step_norm = parse_number(f[2]);
    r.seconds = parse_number(f[3]);
    trace.push_back(r);
  }
  return trace;
}

std::string trace_file_name(const ProblemRecipe& recipe, const std::string& solver) {
  return recipe.id() + "__" + solver + ".csv";
}

nlohmann::json solver_options_json(const SolverOptions& o) {
  nlohmann::json j;
  j["max_iter"] = o.max_iter;
  j["tol"] = o.tol;
  j["time_budget"] = std::isfinite(o.time_budget) ? nlohmann::json(o.time_budget) : nlohmann::json(nullptr);
  j["target_error"] = std::isfinite(o.target_error) ? nlohmann::json(o.target_error) : nlohmann::json(nullptr);
  j["line_search"] = to_string(o.line_search);
  j["ls_sigma"] = o.ls_sigma;
  j["ls_max_halvings"] = o.ls_max_halvings;
  j["kappa"] = o.kappa;
  j["gamma"] = o.qn.gamma;
  j["tau_min"] = o.qn.tau_min;
  j["tau_max"] = o.qn.tau_max;
  j["skip_tol"] = o.qn.skip_tol;
  j["root_finder"] = to_string(o.prox.finder);
  j["warm_start"] = o.warm_start;
  j["fista_restart"] = o.fista_restart;
  j["nonmonotone_memory"] = o.nonmonotone_memory;
  return j;
}

nlohmann::json race_manifest(const std::vector<RaceEntry>& entries, const RaceOptions& options,
                             const std::vector<std::string>& trace_files) {
  nlohmann::json j;
  j["version"] = version();
  j["solvers"] = options.solvers;
  j["options"] = solver_options_json(options.budget);
  nlohmann::json runs = nlohmann::json::array();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const RaceEntry& e = entries[i];
    nlohmann::json r;
    r["solver"] = e.solver;
    r["recipe"] = e.recipe;
    r["recipe_id"] = e.recipe.id();
    r["recipe_hash"] = e.recipe.hash_hex();
    r["termination"] = to_string(e.result.termination);
    r["iterations"] = e.result.iterations;
    r["objective"] = std::isfinite(e.result.objective) ? nlohmann::json(e.result.objective) : nlohmann::json(nullptr);
    const double err = e.result.trace.empty() ? NAN : e.result.trace.back().obj_err;
    r["final_obj_err"] = std::isfinite(err) ? nlohmann::json(err) : nlohmann::json(nullptr);
    r["seconds"] = e.result.seconds;
    r["failed"] = e.failed;
    if (e.failed) r["error"] = e.error;
    if (i < trace_files.size()) r["trace"] = trace_files[i];
    runs.push_back(std::move(r));
  }
  j["runs"] = std::move(runs);
  return j;
}

std::string gnuplot_script(const std::vector<std::string>& trace_files, const std::string& title) {
  std::ostringstream os;
  os << "set datafile separator ','\n"
     << "set logscale y\n"
     << "set format y '%.0e'\n"
     << "set xlabel 'iteration'\n"
     << "set ylabel 'F(x_k) - F*'\n"
     << "set key outside right\n"
     << "set title '" << title << "'\n"
     << "plot ";
  for (std::size_t i = 0; i < trace_files.size(); ++i) {
    if (i) os << ", \\\n     ";
    const std::string& f = trace_files[i];
    const auto sep = f.rfind("__");
    const std::string label = sep == std::string::npos ? f : f.substr(sep + 2, f.size() - sep - 6);
    os << "'" << f << "' using 1:($2 > 0 ? $2 : 1/0) every ::1 with lines title '" << label << "'";
  }
  os << "\n";
  return os.str();
}

}  // namespace proxqn
