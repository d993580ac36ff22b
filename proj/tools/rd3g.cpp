// Command-line front end: merge benchmarks, race matrices, derivative checks
// and single solves.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rd3g/bench.hpp"
#include "rd3g/diagnostics.hpp"
#include "rd3g/export.hpp"
#include "rd3g/scenario.hpp"

namespace fs = std::filesystem;
using namespace rd3g;

namespace {

ConfigDocument load_or_default(const std::string& path) {
  return path.empty() ? ConfigDocument{} : load_config(path);
}

std::string out_file(const std::string& dir, const char* name) {
  return (fs::path(dir) / name).string();
}

int cmd_merge(const std::vector<int>& cars, int replicates, std::optional<std::uint64_t> seed,
              const std::string& out, const std::string& config, int workers) {
  ConfigDocument doc = load_or_default(config);
  doc.scenario.kind = ScenarioKind::Merge;
  if (seed) doc.scenario.seed = *seed;
  doc.scenario.car_count = cars.front();
  doc.scenario.validate();

  const BenchmarkResult result =
      run_merge_bench(cars, replicates, doc.scenario, doc.solver, workers);
  write_file(out_file(out, "report.json"), merge_report_json(result, doc));
  write_file(out_file(out, "runs.csv"), merge_runs_csv(result));

  const MergeRun* shown = &result.runs.front();
  for (const auto& r : result.runs)
    if (r.converged) {
      shown = &r;
      break;
    }
  if (shown->spec.agent_count() > 0)
    write_file(out_file(out, "trajectory.svg"),
               merge_svg(shown->spec, shown->solution.trajectory, doc.scenario.lane_width));

  std::printf("%6s %6s %10s %12s %12s\n", "cars", "runs", "converged", "mean ms", "median ms");
  for (const auto& s : result.summary)
    std::printf("%6d %6d %10.3f %12.2f %12.2f\n", s.cars, s.runs, s.convergence_rate, s.mean_ms,
                s.median_ms);
  return 0;
}

int cmd_race(bool matrix, int replicates, std::optional<std::uint64_t> seed,
             const std::string& out, const std::string& config, const std::string& position,
             const std::string& speed, int workers) {
  ConfigDocument doc = load_or_default(config);
  doc.scenario.kind = ScenarioKind::Race;
  doc.scenario.car_count = 2;
  if (seed) doc.scenario.seed = *seed;
  doc.scenario.validate();

  RaceMatrix m;
  if (matrix) {
    m = run_race_matrix(doc.scenario, doc.solver, replicates, workers);
  } else {
    const auto pos = position == "front" ? StartPosition::Front : StartPosition::Rear;
    const auto spd = speed == "fast" ? StartSpeed::Fast : StartSpeed::Slow;
    m.seed = doc.scenario.seed;
    m.cells.push_back({pos, spd, 0, 0, 0.0});
    m.races.resize(replicates);
    parallel_for(replicates, workers, [&](int r) {
      ScenarioConfig sc = doc.scenario;
      sc.seed = derive_seed(doc.scenario.seed, static_cast<std::uint64_t>(r));
      m.races[r] = run_race(sc, doc.solver, Controller::Game, Controller::Mpc, pos, spd);
    });
    for (const auto& r : m.races) {
      ++m.cells[0].races;
      if (r.winner == 0) ++m.cells[0].wins;
    }
    m.cells[0].win_rate = static_cast<double>(m.cells[0].wins) / m.cells[0].races;
  }
  write_file(out_file(out, "report.json"), race_report_json(m, doc));
  write_file(out_file(out, "runs.csv"), race_runs_csv(m));
  const RaceSetup setup = gen_race(doc.scenario, m.races.front().position, m.races.front().speed);
  write_file(out_file(out, "trajectory.svg"), race_svg(*setup.track, m.races.front()));

  std::printf("RD3G win rate against the naive MPC\n");
  for (const auto& c : m.cells)
    std::printf("  %-5s %-4s  %3d/%-3d  %.3f\n", to_string(c.position), to_string(c.speed), c.wins,
                c.races, c.win_rate);
  return 0;
}

int cmd_check_derivatives(int points, std::uint64_t seed, double tol) {
  const DerivativeSuite suite = run_derivative_suite(points, seed);
  bool ok = true;
  for (const auto& e : suite.entries) {
    const bool pass = e.max_error <= tol;
    ok = ok && pass;
    std::printf("%-4s %-26s points=%-4d max_rel_err=%.3e\n", pass ? "ok" : "FAIL", e.name.c_str(),
                e.points, e.max_error);
  }
  std::printf("%s (tolerance %.1e)\n", ok ? "all derivative checks passed" : "derivative checks failed",
              tol);
  return ok ? 0 : 1;
}

int cmd_solve(const std::string& config, const std::string& out) {
  const ConfigDocument doc = load_config(config);
  GameSpec spec;
  double lane_width = 0.0;
  switch (doc.scenario.kind) {
    case ScenarioKind::Merge:
      spec = gen_merge(doc.scenario).spec;
      lane_width = doc.scenario.lane_width;
      break;
    case ScenarioKind::Custom:
      spec = build_custom(doc.scenario);
      break;
    case ScenarioKind::Race: {
      const RaceSetup setup = gen_race(doc.scenario, StartPosition::Front, StartSpeed::Fast);
      spec = setup.spec;
      break;
    }
  }
  const SolveResult result = solve(spec, doc.solver);
  write_file(out_file(out, "report.json"), solve_report_json(spec, result, doc));
  write_file(out_file(out, "runs.csv"), trajectory_csv(spec, result.solution.trajectory));
  write_file(out_file(out, "trajectory.svg"),
             merge_svg(spec, result.solution.trajectory, lane_width));
  const auto& r = result.report;
  std::printf("status=%s iterations=%d residual=%.3e violation=%.3e time=%.2f ms\n",
              to_string(r.status), r.iterations, r.final_residual, r.final_violation,
              r.timing_ms.at("total"));
  return r.converged() ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rd3g: residual-descent solver for differential dynamic games"};
  app.require_subcommand(1);

  std::vector<int> cars{3};
  int replicates = 1;
  std::optional<std::uint64_t> seed;
  std::string out, config;
  int workers = 0;

  auto* merge = app.add_subcommand("merge", "seeded lane-merge benchmark");
  merge->add_option("--cars", cars, "car count(s)")->check(CLI::PositiveNumber);
  merge->add_option("--replicates", replicates, "runs per car count")->check(CLI::PositiveNumber);
  merge->add_option("--seed", seed, "master seed");
  merge->add_option("--out", out, "output directory")->required();
  merge->add_option("--config", config, "config document (JSON)");
  merge->add_option("--workers", workers, "worker threads (0: all cores)");

  bool matrix = false;
  std::string position = "front", speed = "fast";
  auto* race = app.add_subcommand("race", "RD3G against the naive MPC on the oval");
  race->add_flag("--matrix", matrix, "run every start slot and speed class");
  race->add_option("--replicates", replicates, "races per cell")->check(CLI::PositiveNumber);
  race->add_option("--seed", seed, "master seed");
  race->add_option("--out", out, "output directory")->required();
  race->add_option("--config", config, "config document (JSON)");
  race->add_option("--position", position, "RD3G start slot without --matrix")
      ->check(CLI::IsMember({"front", "rear"}));
  race->add_option("--speed", speed, "RD3G speed class without --matrix")
      ->check(CLI::IsMember({"fast", "slow"}));
  race->add_option("--workers", workers, "worker threads (0: all cores)");

  int points = 50;
  std::uint64_t check_seed = 7;
  double tol = 1e-5;
  auto* check = app.add_subcommand("check-derivatives", "finite-difference checks of every model");
  check->add_option("--points", points, "random points per check")->check(CLI::PositiveNumber);
  check->add_option("--seed", check_seed, "sampling seed");
  check->add_option("--tol", tol, "relative error tolerance");

  auto* solve_cmd = app.add_subcommand("solve", "solve one configured game");
  solve_cmd->add_option("--config", config, "config document (JSON)")->required();
  solve_cmd->add_option("--out", out, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*merge) return cmd_merge(cars, replicates, seed, out, config, workers);
    if (*race) return cmd_race(matrix, replicates, seed, out, config, position, speed, workers);
    if (*check) return cmd_check_derivatives(points, check_seed, tol);
    if (*solve_cmd) return cmd_solve(config, out);
  } catch (const std::exception& e) {
    std::cerr << "rd3g: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
