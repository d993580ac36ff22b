#include <atomic>
#include <cmath>
#include <regex>
#include <set>

#include <gtest/gtest.h>

#include "json.hpp"
#include "rd3g/bench.hpp"
#include "rd3g/export.hpp"

using namespace rd3g;

namespace {

ScenarioConfig race_config() {
  ScenarioConfig cfg;
  cfg.kind = ScenarioKind::Race;
  cfg.car_count = 2;
  return cfg;
}

}  // namespace

TEST(ParallelFor, RunsEveryIndexOnce) {
  std::vector<std::atomic<int>> hits(37);
  parallel_for(37, 4, [&](int i) { ++hits[i]; });
  for (auto& h : hits) EXPECT_EQ(h.load(), 1);
}

TEST(ParallelFor, RethrowsFirstError) {
  EXPECT_THROW(parallel_for(10, 3, [](int i) {
                 if (i == 6) throw Error("boom");
               }),
               Error);
}

TEST(MergeBench, Bookkeeping) {
  ScenarioConfig base;
  base.horizon = 10;
  const BenchmarkResult res = run_merge_bench({2, 3}, 5, base, SolverConfig{}, 1);
  ASSERT_EQ(res.runs.size(), 10u);
  ASSERT_EQ(res.summary.size(), 2u);
  for (int i = 0; i < 10; ++i) {
    EXPECT_EQ(res.runs[i].cars, i < 5 ? 2 : 3);
    EXPECT_EQ(res.runs[i].replicate, i % 5);
    EXPECT_EQ(res.runs[i].seed, derive_seed(base.seed, res.runs[i].cars, i % 5));
  }
  for (const auto& s : res.summary) {
    EXPECT_EQ(s.runs, 5);
    EXPECT_DOUBLE_EQ(s.convergence_rate, s.converged / 5.0);
  }
  const auto again = summarize(res.runs);
  EXPECT_EQ(again[1].converged, res.summary[1].converged);
}

TEST(MergeBench, DeterministicApartFromTiming) {
  ScenarioConfig base;
  base.horizon = 10;
  base.seed = 77;
  const ConfigDocument doc{base, SolverConfig{}};
  const BenchmarkResult a = run_merge_bench({2}, 3, base, SolverConfig{}, 1);
  const BenchmarkResult b = run_merge_bench({2}, 3, base, SolverConfig{}, 2);
  EXPECT_EQ(without_timing_json(merge_report_json(a, doc)),
            without_timing_json(merge_report_json(b, doc)));
  EXPECT_EQ(without_timing_csv(merge_runs_csv(a)), without_timing_csv(merge_runs_csv(b)));
}

TEST(Race, MatrixWithOneReplicate) {
  const RaceMatrix m = run_race_matrix(race_config(), SolverConfig{}, 1, 1);
  ASSERT_EQ(m.cells.size(), 4u);
  ASSERT_EQ(m.races.size(), 4u);
  for (const auto& c : m.cells) {
    EXPECT_EQ(c.races, 1);
    EXPECT_TRUE(c.win_rate == 0.0 || c.win_rate == 1.0);
  }
  for (const auto& r : m.races) {
    EXPECT_LE(r.steps, r.step_cap);
    EXPECT_GE(r.min_distance, 0.0);
    ASSERT_NE(r.winner, -1);
    // lap completion lands inside the final step
    const double t = r.lap_time[r.winner];
    EXPECT_GT(t, (r.steps - 1) * 0.1 - 1e-9);
    EXPECT_LE(t, r.steps * 0.1 + 1e-9);
  }
}

TEST(Race, IdenticalControllersAreReproducible) {
  ScenarioConfig cfg = race_config();
  cfg.seed = 12;
  cfg.race_step_cap = 40;
  const RaceResult a =
      run_race(cfg, SolverConfig{}, Controller::Mpc, Controller::Mpc, StartPosition::Front,
               StartSpeed::Fast);
  const RaceResult b =
      run_race(cfg, SolverConfig{}, Controller::Mpc, Controller::Mpc, StartPosition::Front,
               StartSpeed::Fast);
  ASSERT_EQ(a.history.size(), b.history.size());
  EXPECT_EQ(a.history.back().state, b.history.back().state);
  EXPECT_EQ(a.winner, b.winner);
  EXPECT_EQ(a.steps, 40);  // capped before a lap
}

TEST(Export, EmptyMergeReportIsSchemaComplete) {
  const BenchmarkResult empty;
  const auto j = nlohmann::json::parse(merge_report_json(empty, ConfigDocument{}));
  EXPECT_TRUE(j.contains("config"));
  EXPECT_TRUE(j["runs"].is_array());
  EXPECT_TRUE(j["summary"].is_array());
  EXPECT_TRUE(j["runs"].empty());
  const CsvTable t = parse_csv(merge_runs_csv(empty));
  EXPECT_FALSE(t.header.empty());
  EXPECT_TRUE(t.rows.empty());
}

TEST(Export, CsvRoundTrip) {
  ScenarioConfig base;
  base.horizon = 10;
  const BenchmarkResult res = run_merge_bench({2}, 3, base, SolverConfig{}, 1);
  const CsvTable t = parse_csv(merge_runs_csv(res));
  ASSERT_EQ(t.rows.size(), res.runs.size());
  const auto col = [&](const std::string& name) {
    return static_cast<std::size_t>(
        std::find(t.header.begin(), t.header.end(), name) - t.header.begin());
  };
  for (std::size_t i = 0; i < res.runs.size(); ++i) {
    const auto& run = res.runs[i];
    const auto& row = t.rows[i];
    EXPECT_EQ(std::stoull(row[col("seed")]), run.seed);
    EXPECT_EQ(std::stoi(row[col("iterations")]), run.iterations);
    EXPECT_EQ(row[col("status")], run.status);
    EXPECT_EQ(std::stod(row[col("final_residual")]), run.final_residual);
    EXPECT_EQ(std::stod(row[col("wall_ms")]), run.wall_ms);
  }
}

TEST(Export, MergeSvgHasPolylinePerCar) {
  ScenarioConfig cfg;
  cfg.car_count = 3;
  const MergeInstance m = gen_merge(cfg);
  const SolveResult res = solve(m.spec);
  const std::string svg = merge_svg(m.spec, res.solution.trajectory, cfg.lane_width);
  const std::regex poly("<polyline[^>]*points=\"([^\"]*)\"");
  int count = 0;
  double xmin = 1e9, xmax = -1e9, ymin = 1e9, ymax = -1e9;
  for (auto it = std::sregex_iterator(svg.begin(), svg.end(), poly); it != std::sregex_iterator();
       ++it) {
    ++count;
    std::stringstream pts((*it)[1].str());
    std::string pair;
    while (pts >> pair) {
      const auto comma = pair.find(',');
      const double x = std::stod(pair.substr(0, comma)), y = std::stod(pair.substr(comma + 1));
      xmin = std::min(xmin, x), xmax = std::max(xmax, x);
      ymin = std::min(ymin, y), ymax = std::max(ymax, y);
    }
  }
  EXPECT_EQ(count, 3);
  std::smatch vb;
  ASSERT_TRUE(std::regex_search(svg, vb, std::regex("viewBox=\"([^\"]*)\"")));
  std::stringstream box(vb[1].str());
  double bx, by, bw, bh;
  box >> bx >> by >> bw >> bh;
  EXPECT_LE(bx, xmin);
  EXPECT_LE(by, ymin);
  EXPECT_GE(bx + bw, xmax);
  EXPECT_GE(by + bh, ymax);
}

TEST(Export, TimingStripDropsOnlyMsFields) {
  const std::string j = R"({"a_ms": 1, "b": {"c_ms": 2, "d": 3}, "e": [{"f_ms": 4, "g": 5}]})";
  EXPECT_EQ(nlohmann::json::parse(without_timing_json(j)),
            nlohmann::json::parse(R"({"b": {"d": 3}, "e": [{"g": 5}]})"));
  EXPECT_EQ(without_timing_csv("x,y_ms,z\n1,2,3\n"), "x,z\n1,3\n");
}

TEST(Export, FormatDoubleRoundTrips) {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, 12345.678, -2.5})
    EXPECT_EQ(std::stod(format_double(v)), v);
  EXPECT_EQ(format_double(std::nan("")), "nan");
}
