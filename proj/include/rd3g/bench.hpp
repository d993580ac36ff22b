#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "rd3g/scenario.hpp"
#include "rd3g/solver.hpp"

namespace rd3g {

/// Runs task(0..count-1) on up to `workers` threads (0: hardware threads).
/// Each index runs exactly once; the first exception is rethrown.
void parallel_for(int count, int workers, const std::function<void(int)>& task);

struct MergeRun {
  int cars = 0;
  int replicate = 0;
  std::uint64_t seed = 0;
  int regenerations = 0;
  bool converged = false;
  std::string status;
  int iterations = 0;
  double wall_ms = 0.0;
  double final_residual = 0.0;
  double final_violation = 0.0;
  double min_distance = 0.0;  // over k = 0..T of the returned trajectory
  std::vector<std::string> invariant_failures;
  GameSpec spec;
  Iterate solution;
  SolverReport report;
};

struct MergeSummary {
  int cars = 0;
  int runs = 0;
  int converged = 0;
  double convergence_rate = 0.0;
  double mean_ms = 0.0;    // converged runs only, NaN if none
  double median_ms = 0.0;  // converged runs only, NaN if none
};

struct BenchmarkResult {
  std::uint64_t seed = 0;
  std::vector<MergeRun> runs;  // ordered by (count index, replicate)
  std::vector<MergeSummary> summary;
};

/// Recomputes the per-count aggregates from the rows.
std::vector<MergeSummary> summarize(const std::vector<MergeRun>& runs);

/// Seeded from-scratch solves per car count. Replicate r of count K uses
/// scenario seed derive_seed(base.seed, K, r).
BenchmarkResult run_merge_bench(const std::vector<int>& counts, int replicates,
                                const ScenarioConfig& base, const SolverConfig& cfg,
                                int workers = 0);

enum class Controller { Game, Mpc };
const char* to_string(Controller c);

struct RaceStep {
  double time = 0.0;
  Vec state;                     // joint state after the step
  std::array<double, 2> solve_ms{};
  std::array<bool, 2> converged{};
  std::array<bool, 2> failed{};  // controller failure, coasted
};

struct RaceResult {
  std::uint64_t seed = 0;
  StartPosition position = StartPosition::Front;  // of car 0
  StartSpeed speed = StartSpeed::Fast;            // of car 0
  std::array<Controller, 2> controllers{Controller::Game, Controller::Mpc};
  int winner = -1;  // -1 when nobody finished within the step cap
  std::array<double, 2> lap_time{};  // NaN if not finished
  double min_distance = 0.0;
  int collision_steps = 0;  // simulated states with distance < d_min
  std::array<int, 2> failures{};
  std::array<int, 2> nonconverged{};
  int invariant_failures = 0;  // summed over every solve that returned
  int steps = 0;
  int step_cap = 0;
  Vec initial_state;
  std::vector<RaceStep> history;
};

/// Receding-horizon race: both controllers plan from the true state every
/// step, the first (clamped) control is applied, and the race ends at the
/// first completed lap or the step cap.
RaceResult run_race(const ScenarioConfig& cfg, const SolverConfig& solver, Controller car0,
                    Controller car1, StartPosition car0_position, StartSpeed car0_speed);

struct RaceCell {
  StartPosition position;
  StartSpeed speed;
  int races = 0;
  int wins = 0;
  double win_rate = 0.0;
};

struct RaceMatrix {
  std::uint64_t seed = 0;
  std::vector<RaceCell> cells;  // front/fast, front/slow, rear/fast, rear/slow
  std::vector<RaceResult> races;
  const RaceCell& cell(StartPosition p, StartSpeed s) const;
};

/// RD3G (car 0) against the naive MPC (car 1) for every start slot and speed
/// class. Race r uses seed derive_seed(cfg.seed, r) in every cell, so the
/// cells see the same start draws.
RaceMatrix run_race_matrix(const ScenarioConfig& cfg, const SolverConfig& solver,
                           int replicates, int workers = 0);

}  // namespace rd3g
