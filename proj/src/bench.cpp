#include "rd3g/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <optional>
#include <thread>

#include "rd3g/vehicles.hpp"

namespace rd3g {

void parallel_for(int count, int workers, const std::function<void(int)>& task) {
  if (count <= 0) return;
  if (workers <= 0) workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  workers = std::min(workers, count);
  if (workers == 1) {
    for (int i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto body = [&] {
    for (int i = next++; i < count; i = next++) {
      try {
        task(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::jthread> pool;
  for (int w = 0; w < workers; ++w) pool.emplace_back(body);
  pool.clear();
  if (error) std::rethrow_exception(error);
}

// -- merge -------------------------------------------------------------------

std::vector<MergeSummary> summarize(const std::vector<MergeRun>& runs) {
  std::vector<MergeSummary> out;
  for (const auto& run : runs) {
    auto it = std::find_if(out.begin(), out.end(),
                           [&](const MergeSummary& s) { return s.cars == run.cars; });
    if (it == out.end()) {
      out.push_back({});
      it = out.end() - 1;
      it->cars = run.cars;
    }
    ++it->runs;
    if (run.converged) ++it->converged;
  }
  for (auto& s : out) {
    std::vector<double> times;
    for (const auto& run : runs)
      if (run.cars == s.cars && run.converged) times.push_back(run.wall_ms);
    s.convergence_rate = s.runs ? static_cast<double>(s.converged) / s.runs : 0.0;
    if (times.empty()) {
      s.mean_ms = s.median_ms = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    std::sort(times.begin(), times.end());
    double sum = 0.0;
    for (double t : times) sum += t;
    s.mean_ms = sum / times.size();
    const std::size_t m = times.size() / 2;
    s.median_ms = times.size() % 2 ? times[m] : 0.5 * (times[m - 1] + times[m]);
  }
  return out;
}

BenchmarkResult run_merge_bench(const std::vector<int>& counts, int replicates,
                                const ScenarioConfig& base, const SolverConfig& cfg,
                                int workers) {
  if (replicates < 1) throw ConfigError("replicates must be >= 1");
  cfg.validate();
  BenchmarkResult result;
  result.seed = base.seed;
  const int total = static_cast<int>(counts.size()) * replicates;
  result.runs.resize(total);

  parallel_for(total, workers, [&](int index) {
    const int K = counts[index / replicates];
    const int r = index % replicates;
    MergeRun& run = result.runs[index];
    ScenarioConfig sc = base;
    sc.kind = ScenarioKind::Merge;
    sc.car_count = K;
    sc.seed = derive_seed(base.seed, static_cast<std::uint64_t>(K), static_cast<std::uint64_t>(r));
    run.cars = K;
    run.replicate = r;
    run.seed = sc.seed;
    MergeInstance inst;
    try {
      inst = gen_merge(sc);
    } catch (const ConfigError& e) {
      run.status = "generation-failed";
      return;
    }
    run.regenerations = inst.regenerations;
    auto [solution, report] = solve(inst.spec, cfg);
    run.converged = report.converged();
    run.status = to_string(report.status);
    run.iterations = report.iterations;
    run.wall_ms = report.timing_ms.at("total");
    run.final_residual = report.final_residual;
    run.final_violation = report.final_violation;
    run.min_distance = min_pairwise_distance(inst.spec, solution.trajectory);
    run.invariant_failures = check_report_invariants(report, cfg);
    run.spec = std::move(inst.spec);
    run.solution = std::move(solution);
    run.report = std::move(report);
  });
  result.summary = summarize(result.runs);
  return result;
}

// -- race --------------------------------------------------------------------

const char* to_string(Controller c) { return c == Controller::Game ? "rd3g" : "mpc"; }

namespace {

struct Plan {
  Vec control;
  bool converged = false;
  int invariant_failures = 0;
};

class RaceController {
 public:
  RaceController(Controller kind, int car, const SolverConfig& cfg)
      : kind_(kind), car_(car), cfg_(cfg) {}

  Plan plan(const GameSpec& game) {
    const GameSpec spec = kind_ == Controller::Game ? game : mpc_game(car_, game);
    std::optional<Iterate> warm;
    if (previous_) warm = shift_warm_start(*previous_, spec);
    SolveResult r = solve(spec, cfg_, warm);
    const int own = kind_ == Controller::Game ? car_ : 0;
    Plan p{r.solution.trajectory.control(own, 0), r.report.converged(),
           static_cast<int>(check_report_invariants(r.report, cfg_).size())};
    // A failed solve is a poor seed for the next step.
    if (p.converged)
      previous_ = std::move(r.solution);
    else
      previous_.reset();
    return p;
  }

  void reset() { previous_.reset(); }

 private:
  Controller kind_;
  int car_;
  SolverConfig cfg_;
  std::optional<Iterate> previous_;
};

using Clock = std::chrono::steady_clock;

}  // namespace

RaceResult run_race(const ScenarioConfig& cfg, const SolverConfig& solver, Controller car0,
                    Controller car1, StartPosition car0_position, StartSpeed car0_speed) {
  const RaceSetup setup = gen_race(cfg, car0_position, car0_speed);
  const StadiumTrack& track = *setup.track;
  const double L = track.length();
  const double dt = cfg.dt;

  RaceResult res;
  res.seed = cfg.seed;
  res.position = car0_position;
  res.speed = car0_speed;
  res.controllers = {car0, car1};
  res.step_cap = setup.step_cap;
  res.lap_time = {std::numeric_limits<double>::quiet_NaN(),
                  std::numeric_limits<double>::quiet_NaN()};
  res.initial_state = setup.spec.initial_state;

  Vec x = setup.spec.initial_state;
  const auto& agent0 = *setup.spec.agents[0];
  std::array<double, 2> progress{setup.progress[0], setup.progress[1]};
  std::array<double, 2> arc{};
  for (int c = 0; c < 2; ++c) arc[c] = track.progress(x.segment<2>(c * 4));
  RaceController controllers[2] = {RaceController(car0, 0, solver),
                                   RaceController(car1, 1, solver)};
  auto distance = [](const Vec& s) { return (s.segment<2>(0) - s.segment<2>(4)).norm(); };
  res.min_distance = distance(x);
  if (res.min_distance < cfg.d_min) ++res.collision_steps;

  for (int step = 0; step < setup.step_cap; ++step) {
    const GameSpec game = race_game(setup, x);
    RaceStep rec;
    Vec u = Vec::Zero(4);
    for (int c = 0; c < 2; ++c) {
      const auto t0 = Clock::now();
      bool ok = false;
      try {
        Plan p = controllers[c].plan(game);
        rec.converged[c] = p.converged;
        res.invariant_failures += p.invariant_failures;
        if (p.control.allFinite()) {
          u.segment<2>(c * 2) = p.control;
          ok = true;
        }
      } catch (const Error&) {
        controllers[c].reset();
      }
      rec.solve_ms[c] = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
      if (!ok) {
        rec.failed[c] = true;
        ++res.failures[c];
        u.segment<2>(c * 2).setZero();
      }
      if (!rec.converged[c]) ++res.nonconverged[c];
      u[c * 2 + bicycle::kAccel] = std::clamp(u[c * 2 + bicycle::kAccel], -cfg.accel_limit, cfg.accel_limit);
      u[c * 2 + bicycle::kSteer] =
          std::clamp(u[c * 2 + bicycle::kSteer], -cfg.steering_limit, cfg.steering_limit);
    }

    Vec next(8);
    for (int c = 0; c < 2; ++c)
      next.segment<4>(c * 4) = agent0.step(x.segment<4>(c * 4), u.segment<2>(c * 2));
    if (!next.allFinite()) throw RolloutDivergence(step + 1, next.head<4>().allFinite() ? 1 : 0);
    x = next;
    ++res.steps;
    rec.time = res.steps * dt;
    rec.state = x;
    res.history.push_back(rec);

    const double d = distance(x);
    res.min_distance = std::min(res.min_distance, d);
    if (d < cfg.d_min) ++res.collision_steps;

    for (int c = 0; c < 2; ++c) {
      const double s = track.progress(x.segment<2>(c * 4));
      const double before = progress[c];
      progress[c] += track.signed_gap(s, arc[c]);
      arc[c] = s;
      if (std::isnan(res.lap_time[c]) && progress[c] >= L) {
        const double frac = (L - before) / (progress[c] - before);
        res.lap_time[c] = (step + frac) * dt;
      }
    }
    const bool done0 = !std::isnan(res.lap_time[0]);
    const bool done1 = !std::isnan(res.lap_time[1]);
    if (done0 || done1) {
      if (done0 && done1)
        res.winner = res.lap_time[0] <= res.lap_time[1] ? 0 : 1;
      else
        res.winner = done0 ? 0 : 1;
      break;
    }
  }
  return res;
}

const RaceCell& RaceMatrix::cell(StartPosition p, StartSpeed s) const {
  for (const auto& c : cells)
    if (c.position == p && c.speed == s) return c;
  throw std::out_of_range("race matrix cell missing");
}

RaceMatrix run_race_matrix(const ScenarioConfig& cfg, const SolverConfig& solver,
                           int replicates, int workers) {
  if (replicates < 1) throw ConfigError("replicates must be >= 1");
  ScenarioConfig base = cfg;
  base.kind = ScenarioKind::Race;
  base.car_count = 2;
  base.validate();
  solver.validate();

  RaceMatrix m;
  m.seed = cfg.seed;
  const StartPosition positions[] = {StartPosition::Front, StartPosition::Rear};
  const StartSpeed speeds[] = {StartSpeed::Fast, StartSpeed::Slow};
  for (auto p : positions)
    for (auto s : speeds) m.cells.push_back({p, s, 0, 0, 0.0});

  const int total = 4 * replicates;
  m.races.resize(total);
  parallel_for(total, workers, [&](int index) {
    const RaceCell& cell = m.cells[index / replicates];
    ScenarioConfig sc = base;
    sc.seed = derive_seed(base.seed, static_cast<std::uint64_t>(index % replicates));
    m.races[index] =
        run_race(sc, solver, Controller::Game, Controller::Mpc, cell.position, cell.speed);
  });
  for (int index = 0; index < total; ++index) {
    RaceCell& cell = m.cells[index / replicates];
    ++cell.races;
    if (m.races[index].winner == 0) ++cell.wins;
  }
  for (auto& c : m.cells) c.win_rate = c.races ? static_cast<double>(c.wins) / c.races : 0.0;
  return m;
}

}  // namespace rd3g
