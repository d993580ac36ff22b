#pragma once

#include <string>
#include <vector>

#include "rd3g/bench.hpp"
#include "rd3g/scenario.hpp"
#include "rd3g/solver.hpp"

namespace rd3g {

// Every wall-clock field in the emitted JSON and CSV has a name ending in
// "_ms"; everything else is a pure function of (config, seed).

std::string merge_report_json(const BenchmarkResult& result, const ConfigDocument& config);
std::string race_report_json(const RaceMatrix& matrix, const ConfigDocument& config);
std::string solve_report_json(const GameSpec& spec, const SolveResult& result,
                              const ConfigDocument& config);

/// One row per run.
std::string merge_runs_csv(const BenchmarkResult& result);
/// One row per race.
std::string race_runs_csv(const RaceMatrix& matrix);
/// One row per (agent, step) of a solved trajectory.
std::string trajectory_csv(const GameSpec& spec, const Trajectory& traj);

/// Parsed CSV: header plus rows of raw cells.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};
CsvTable parse_csv(const std::string& text);

/// One polyline per agent (k = 0..T), lane markings and a bounding viewBox.
std::string merge_svg(const GameSpec& spec, const Trajectory& traj, double lane_width = 0.0);
/// Track outline plus each car's path.
std::string race_svg(const StadiumTrack& track, const RaceResult& race);

/// Drops every "*_ms" member from a JSON document (recursively).
std::string without_timing_json(const std::string& json_text);
/// Drops every "*_ms" column from a CSV document.
std::string without_timing_csv(const std::string& csv_text);

/// Writes a file, creating parent directories; failures name the path.
void write_file(const std::string& path, const std::string& content);

/// Text form of a double that round-trips exactly.
std::string format_double(double v);

}  // namespace rd3g
