#pragma once

// Convergence traces on disk: CSV per run, JSON manifest per race.

#include "proxqn/bench.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace proxqn {

inline constexpr const char* kTraceHeader = "iter,obj_err,step_norm,seconds";

/// Header plus one row per record, values at full precision. With
/// timing = false the seconds column is written as 0, which makes the file
/// a deterministic function of the run.
void write_trace_csv(std::ostream& out, const std::vector<TraceRecord>& trace, bool timing = true);
void write_trace_csv(const std::filesystem::path& path, const std::vector<TraceRecord>& trace, bool timing = true);

/// Parses a file written by write_trace_csv (objective column left at 0).
std::vector<TraceRecord> read_trace_csv(const std::filesystem::path& path);

/// "<recipe id>__<solver>.csv"
std::string trace_file_name(const ProblemRecipe& recipe, const std::string& solver);

nlohmann::json solver_options_json(const SolverOptions& options);

/// Recipe hashes, solver options, library version and one record per run.
nlohmann::json race_manifest(const std::vector<RaceEntry>& entries, const RaceOptions& options,
                             const std::vector<std::string>& trace_files);

/// A gnuplot script that draws obj_err against iteration for the given CSVs.
std::string gnuplot_script(const std::vector<std::string>& trace_files, const std::string& title);

}  // namespace proxqn
