#include "rd3g/export.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "json.hpp"

namespace rd3g {

using nlohmann::json;
using nlohmann::ordered_json;

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_file(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  std::error_code ec;
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path(), ec);
  if (ec) throw Error("cannot create directory for '" + path + "': " + ec.message());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << content;
  out.flush();
  if (!out) throw Error("failed writing '" + path + "'");
}

namespace {

// NaN and infinity become null.
ordered_json num(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

ordered_json vec_json(const Vec& v) {
  ordered_json a = ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(num(v[i]));
  return a;
}

template <class T>
ordered_json list(const std::vector<T>& xs) {
  ordered_json a = ordered_json::array();
  for (const auto& x : xs) {
    if constexpr (std::is_floating_point_v<T>)
      a.push_back(num(x));
    else
      a.push_back(x);
  }
  return a;
}

ordered_json config_json(const ConfigDocument& config) {
  return ordered_json::parse(dump_config(config));
}

ordered_json trajectory_json(const GameSpec& spec, const Trajectory& traj) {
  ordered_json agents = ordered_json::array();
  for (int i = 0; i < spec.agent_count(); ++i) {
    ordered_json states = ordered_json::array();
    ordered_json controls = ordered_json::array();
    for (int k = 0; k <= spec.horizon; ++k) states.push_back(vec_json(agent_state(spec, traj, i, k)));
    for (int k = 0; k < spec.horizon; ++k) controls.push_back(vec_json(traj.control(i, k)));
    agents.push_back({{"states", states}, {"controls", controls}});
  }
  return agents;
}

ordered_json report_json(const SolverReport& r) {
  ordered_json timing = ordered_json::object();
  for (const auto& [k, v] : r.timing_ms) timing[k] = v;
  return {{"status", to_string(r.status)},
          {"iterations", r.iterations},
          {"final_residual", num(r.final_residual)},
          {"final_violation", num(r.final_violation)},
          {"message", r.message},
          {"residual_history", list(r.residual_history)},
          {"rho_history", list(r.rho_history)},
          {"violation_history", list(r.violation_history)},
          {"active_history", list(r.active_history)},
          {"step_sizes", list(r.step_sizes)},
          {"accepted_residuals", list(r.accepted_residuals)},
          {"solve_methods", list(r.solve_methods)},
          {"timing_ms", timing}};
}

std::string csv_line(const std::vector<std::string>& cells) {
  std::string s;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) s += ',';
    s += cells[i];
  }
  return s + '\n';
}

bool is_timing_key(const std::string& key) {
  return key.size() >= 3 && key.compare(key.size() - 3, 3, "_ms") == 0;
}

void strip_timing(ordered_json& j) {
  if (j.is_object()) {
    for (auto it = j.begin(); it != j.end();) {
      if (is_timing_key(it.key())) {
        it = j.erase(it);
      } else {
        strip_timing(*it);
        ++it;
      }
    }
  } else if (j.is_array()) {
    for (auto& x : j) strip_timing(x);
  }
}

}  // namespace

std::string merge_report_json(const BenchmarkResult& result, const ConfigDocument& config) {
  ordered_json summary = ordered_json::array();
  for (const auto& s : result.summary)
    summary.push_back({{"cars", s.cars},
                       {"runs", s.runs},
                       {"converged", s.converged},
                       {"convergence_rate", s.convergence_rate},
                       {"mean_ms", num(s.mean_ms)},
                       {"median_ms", num(s.median_ms)}});
  ordered_json runs = ordered_json::array();
  for (const auto& r : result.runs) {
    ordered_json timing = ordered_json::object();
    for (const auto& [k, v] : r.report.timing_ms) timing[k] = v;
    runs.push_back({{"cars", r.cars},
                    {"replicate", r.replicate},
                    {"seed", r.seed},
                    {"regenerations", r.regenerations},
                    {"converged", r.converged},
                    {"status", r.status},
                    {"iterations", r.iterations},
                    {"final_residual", num(r.final_residual)},
                    {"final_violation", num(r.final_violation)},
                    {"min_distance", num(r.min_distance)},
                    {"invariant_failures", list(r.invariant_failures)},
                    {"wall_ms", r.wall_ms},
                    {"timing_ms", timing}});
  }
  ordered_json j = {{"kind", "merge"},
                    {"seed", result.seed},
                    {"config", config_json(config)},
                    {"summary", summary},
                    {"runs", runs}};
  return j.dump(2) + "\n";
}

std::string race_report_json(const RaceMatrix& m, const ConfigDocument& config) {
  ordered_json cells = ordered_json::array();
  for (const auto& c : m.cells)
    cells.push_back({{"position", to_string(c.position)},
                     {"speed", to_string(c.speed)},
                     {"races", c.races},
                     {"wins", c.wins},
                     {"win_rate", c.win_rate}});
  ordered_json races = ordered_json::array();
  for (std::size_t i = 0; i < m.races.size(); ++i) {
    const auto& r = m.races[i];
    ordered_json solve_ms = ordered_json::array();
    for (const auto& s : r.history) solve_ms.push_back({s.solve_ms[0], s.solve_ms[1]});
    races.push_back({{"index", i},
                     {"position", to_string(r.position)},
                     {"speed", to_string(r.speed)},
                     {"seed", r.seed},
                     {"controllers", {to_string(r.controllers[0]), to_string(r.controllers[1])}},
                     {"winner", r.winner},
                     {"lap_time", {num(r.lap_time[0]), num(r.lap_time[1])}},
                     {"min_distance", num(r.min_distance)},
                     {"collision_steps", r.collision_steps},
                     {"failures", {r.failures[0], r.failures[1]}},
                     {"nonconverged", {r.nonconverged[0], r.nonconverged[1]}},
                     {"invariant_failures", r.invariant_failures},
                     {"steps", r.steps},
                     {"step_cap", r.step_cap},
                     {"initial_state", vec_json(r.initial_state)},
                     {"step_solve_ms", solve_ms}});
  }
  ordered_json j = {{"kind", "race"},
                    {"seed", m.seed},
                    {"config", config_json(config)},
                    {"controllers", {"rd3g", "mpc"}},
                    {"cells", cells},
                    {"races", races}};
  return j.dump(2) + "\n";
}

std::string solve_report_json(const GameSpec& spec, const SolveResult& result,
                              const ConfigDocument& config) {
  ordered_json j = {{"kind", "solve"},
                    {"config", config_json(config)},
                    {"report", report_json(result.report)},
                    {"min_distance", num(min_pairwise_distance(spec, result.solution.trajectory))},
                    {"trajectory", trajectory_json(spec, result.solution.trajectory)}};
  return j.dump(2) + "\n";
}

std::string merge_runs_csv(const BenchmarkResult& result) {
  std::string out = csv_line({"cars", "replicate", "seed", "regenerations", "converged", "status",
                              "iterations", "final_residual", "final_violation", "min_distance",
                              "invariant_failures", "wall_ms"});
  for (const auto& r : result.runs)
    out += csv_line({std::to_string(r.cars), std::to_string(r.replicate), std::to_string(r.seed),
                     std::to_string(r.regenerations), r.converged ? "1" : "0", r.status,
                     std::to_string(r.iterations), format_double(r.final_residual),
                     format_double(r.final_violation), format_double(r.min_distance),
                     std::to_string(r.invariant_failures.size()), format_double(r.wall_ms)});
  return out;
}

std::string race_runs_csv(const RaceMatrix& m) {
  std::string out = csv_line({"race", "position", "speed", "seed", "winner", "lap_time_0",
                              "lap_time_1", "min_distance", "collision_steps", "failures_0",
                              "failures_1", "nonconverged_0", "nonconverged_1",
                              "invariant_failures", "steps",
                              "mean_solve_0_ms", "mean_solve_1_ms"});
  for (std::size_t i = 0; i < m.races.size(); ++i) {
    const auto& r = m.races[i];
    double mean[2] = {0.0, 0.0};
    for (const auto& s : r.history)
      for (int c = 0; c < 2; ++c) mean[c] += s.solve_ms[c];
    for (double& v : mean) v = r.history.empty() ? 0.0 : v / r.history.size();
    out += csv_line({std::to_string(i), to_string(r.position), to_string(r.speed),
                     std::to_string(r.seed), std::to_string(r.winner),
                     format_double(r.lap_time[0]), format_double(r.lap_time[1]),
                     format_double(r.min_distance), std::to_string(r.collision_steps),
                     std::to_string(r.failures[0]), std::to_string(r.failures[1]),
                     std::to_string(r.nonconverged[0]), std::to_string(r.nonconverged[1]),
                     std::to_string(r.invariant_failures), std::to_string(r.steps),
                     format_double(mean[0]), format_double(mean[1])});
  }
  return out;
}

std::string trajectory_csv(const GameSpec& spec, const Trajectory& traj) {
  std::string out = csv_line({"agent", "step", "x", "y", "v", "theta", "accel", "steer"});
  const int m = spec.control_dim();
  for (int i = 0; i < spec.agent_count(); ++i)
    for (int k = 0; k <= spec.horizon; ++k) {
      const Vec s = agent_state(spec, traj, i, k);
      std::vector<std::string> cells{std::to_string(i), std::to_string(k)};
      for (Eigen::Index c = 0; c < s.size(); ++c) cells.push_back(format_double(s[c]));
      for (int c = 0; c < m; ++c)
        cells.push_back(k < spec.horizon ? format_double(traj.control(i, k)[c]) : "");
      out += csv_line(cells);
    }
  return out;
}

CsvTable parse_csv(const std::string& text) {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::size_t start = 0;
    for (;;) {
      const auto comma = line.find(',', start);
      cells.push_back(line.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (first)
      t.header = std::move(cells);
    else
      t.rows.push_back(std::move(cells));
    first = false;
  }
  return t;
}

std::string without_timing_json(const std::string& json_text) {
  ordered_json j = ordered_json::parse(json_text);
  strip_timing(j);
  return j.dump(2);
}

std::string without_timing_csv(const std::string& csv_text) {
  const CsvTable t = parse_csv(csv_text);
  std::vector<std::size_t> keep;
  for (std::size_t c = 0; c < t.header.size(); ++c)
    if (!is_timing_key(t.header[c])) keep.push_back(c);
  auto pick = [&](const std::vector<std::string>& row) {
    std::vector<std::string> out;
    for (auto c : keep) out.push_back(c < row.size() ? row[c] : "");
    return csv_line(out);
  };
  std::string out = pick(t.header);
  for (const auto& row : t.rows) out += pick(row);
  return out;
}

// -- svg ----------------------------------------------------------------------

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                          "#9467bd", "#8c564b", "#e377c2", "#17becf"};

struct Bounds {
  double x0 = std::numeric_limits<double>::infinity(), y0 = x0;
  double x1 = -x0, y1 = -x0;
  void add(double x, double y) {
    x0 = std::min(x0, x);
    x1 = std::max(x1, x);
    y0 = std::min(y0, y);
    y1 = std::max(y1, y);
  }
};

// SVG y grows downwards; world y is flipped.
std::string point(double x, double y) { return format_double(x) + "," + format_double(-y); }

std::string svg_open(const Bounds& b, double margin) {
  const double w = b.x1 - b.x0 + 2 * margin, h = b.y1 - b.y0 + 2 * margin;
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"" << format_double(b.x0 - margin)
     << " " << format_double(-b.y1 - margin) << " " << format_double(w) << " "
     << format_double(h) << "\" width=\"" << format_double(std::min(1600.0, 20.0 * w))
     << "\" height=\"" << format_double(std::min(1600.0, 20.0 * w) * h / w) << "\">\n";
  return os.str();
}

}  // namespace

std::string merge_svg(const GameSpec& spec, const Trajectory& traj, double lane_width) {
  const int n = spec.state_dim();
  std::vector<std::vector<std::pair<double, double>>> paths(spec.agent_count());
  Bounds b;
  for (int i = 0; i < spec.agent_count(); ++i)
    for (int k = 0; k <= spec.horizon; ++k) {
      const Vec s = agent_state(spec, traj, i, k);
      paths[i].emplace_back(s[0], n > 1 ? s[1] : 0.0);
      b.add(s[0], n > 1 ? s[1] : 0.0);
    }
  if (!std::isfinite(b.x0)) b = Bounds{0, 0, 1, 1};
  const double margin = 1.0 + 0.5 * lane_width;
  std::string out = svg_open(b, margin);
  out += "<rect x=\"" + format_double(b.x0 - margin) + "\" y=\"" + format_double(-b.y1 - margin) +
         "\" width=\"" + format_double(b.x1 - b.x0 + 2 * margin) + "\" height=\"" +
         format_double(b.y1 - b.y0 + 2 * margin) + "\" fill=\"#f4f4f4\"/>\n";
  if (lane_width > 0.0) {
    // Lane boundaries around the left (y = 0) and right (y = -w) lane centers.
    for (double y : {0.5 * lane_width, -0.5 * lane_width, -1.5 * lane_width})
      out += "<line x1=\"" + format_double(b.x0 - margin) + "\" y1=\"" + format_double(-y) +
             "\" x2=\"" + format_double(b.x1 + margin) + "\" y2=\"" + format_double(-y) +
             "\" stroke=\"#999\" stroke-width=\"0.05\" stroke-dasharray=\"0.5,0.5\"/>\n";
  }
  for (std::size_t i = 0; i < paths.size(); ++i) {
    std::string pts;
    for (const auto& [x, y] : paths[i]) pts += (pts.empty() ? "" : " ") + point(x, y);
    out += std::string("<polyline fill=\"none\" stroke=\"") + kPalette[i % 8] +
           "\" stroke-width=\"0.15\" points=\"" + pts + "\"/>\n";
  }
  return out + "</svg>\n";
}

std::string race_svg(const StadiumTrack& track, const RaceResult& race) {
  Bounds b;
  const double L = track.length();
  const int samples = 200;
  std::string edges[3];
  const double offsets[3] = {0.0, 0.5 * track.width(), -0.5 * track.width()};
  for (int e = 0; e < 3; ++e) {
    for (int s = 0; s <= samples; ++s) {
      const auto pose = track.pose_at(L * s / samples, offsets[e]);
      b.add(pose.position.x(), pose.position.y());
      edges[e] += (s ? " L " : "M ") + format_double(pose.position.x()) + " " +
                  format_double(-pose.position.y());
    }
  }
  std::vector<std::string> paths(2);
  auto add_state = [&](const Vec& x) {
    for (int c = 0; c < 2; ++c) {
      b.add(x[c * 4], x[c * 4 + 1]);
      paths[c] += (paths[c].empty() ? "" : " ") + point(x[c * 4], x[c * 4 + 1]);
    }
  };
  if (race.initial_state.size() == 8) add_state(race.initial_state);
  for (const auto& s : race.history) add_state(s.state);

  std::string out = svg_open(b, 2.0);
  out += "<path d=\"" + edges[1] + "\" fill=\"none\" stroke=\"#555\" stroke-width=\"0.2\"/>\n";
  out += "<path d=\"" + edges[2] + "\" fill=\"none\" stroke=\"#555\" stroke-width=\"0.2\"/>\n";
  out += "<path d=\"" + edges[0] +
         "\" fill=\"none\" stroke=\"#bbb\" stroke-width=\"0.1\" stroke-dasharray=\"1,1\"/>\n";
  for (int c = 0; c < 2; ++c)
    out += std::string("<polyline fill=\"none\" stroke=\"") + kPalette[c] +
           "\" stroke-width=\"0.25\" points=\"" + paths[c] + "\"/>\n";
  return out + "</svg>\n";
}

}  // namespace rd3g
