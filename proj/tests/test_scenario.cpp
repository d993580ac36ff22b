#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "rd3g/scenario.hpp"
#include "rd3g/vehicles.hpp"

using namespace rd3g;

TEST(Config, DefaultsRoundTrip) {
  const ConfigDocument doc;
  const ConfigDocument back = parse_config(dump_config(doc));
  EXPECT_EQ(dump_config(back), dump_config(doc));
}

TEST(Config, PartialDocumentOverridesOnlyGivenKeys) {
  const ConfigDocument doc = parse_config(R"({
    "scenario": {"car_count": 5, "merge": {"weights": {"r": [3, 4]}}},
    "solver": {"eps_tol": 1e-3}
  })");
  EXPECT_EQ(doc.scenario.car_count, 5);
  EXPECT_EQ(doc.scenario.merge_weights.r, Eigen::Vector2d(3, 4));
  EXPECT_EQ(doc.scenario.merge_weights.q_state, MergeCostWeights{}.q_state);
  EXPECT_EQ(doc.solver.eps_tol, 1e-3);
  EXPECT_EQ(doc.solver.rho0, SolverConfig{}.rho0);
}

TEST(Config, UnknownKeysRejected) {
  EXPECT_THROW(parse_config(R"({"scenario": {"cars_count": 3}})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"solver": {"tolerance": 1}})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"extra": {}})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"scenario": {"race": {"track": {"len": 3}}}})"), ConfigError);
}

TEST(Config, MalformedValuesRejected) {
  EXPECT_THROW(parse_config("{"), ConfigError);
  EXPECT_THROW(parse_config(R"({"scenario": {"horizon": "twenty"}})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"scenario": {"kind": "drift"}})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"scenario": {"merge": {"weights": {"r": [1]}}}})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"scenario": {"dt": -0.1}})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"solver": {"kappa": 1.5}})"), ConfigError);
}

TEST(Config, CustomCars) {
  const ConfigDocument doc = parse_config(R"({"scenario": {"kind": "custom", "car_count": 2,
    "cars": [{"initial_state": [0, 0, 5, 0], "reference": [0, 0, 5, 0]},
             {"initial_state": [-6, -3.5, 5, 0], "reference": [0, 0, 5, 0]}]}})");
  const GameSpec spec = build_custom(doc.scenario);
  EXPECT_EQ(spec.agent_count(), 2);
  EXPECT_EQ(spec.initial_state[4], -6.0);
  EXPECT_THROW(parse_config(R"({"scenario": {"kind": "custom", "car_count": 3,
    "cars": [{"initial_state": [0, 0, 5, 0], "reference": [0, 0, 5, 0]}]}})"),
               ConfigError);
}

TEST(Seeds, DeriveIsStableAndSpreads) {
  EXPECT_EQ(derive_seed(1, 3, 0), derive_seed(1, 3, 0));
  std::set<std::uint64_t> seen;
  for (std::uint64_t a = 0; a < 20; ++a)
    for (std::uint64_t b = 0; b < 20; ++b) seen.insert(derive_seed(7, a, b));
  EXPECT_EQ(seen.size(), 400u);
}

TEST(Seeds, RngInRangeAndRepeatable) {
  Rng a(5, 1), b(5, 1), c(5, 2);
  bool differs = false;
  for (int i = 0; i < 1000; ++i) {
    const double x = a.uniform(2.0, 3.0);
    EXPECT_GE(x, 2.0);
    EXPECT_LT(x, 3.0);
    EXPECT_EQ(x, b.uniform(2.0, 3.0));
    differs = differs || x != c.uniform(2.0, 3.0);
  }
  EXPECT_TRUE(differs);
}

TEST(GenMerge, Deterministic) {
  ScenarioConfig cfg;
  cfg.seed = 42;
  const MergeInstance a = gen_merge(cfg);
  const MergeInstance b = gen_merge(cfg);
  EXPECT_EQ(a.spec.initial_state, b.spec.initial_state);
  EXPECT_EQ(a.lane, b.lane);
  EXPECT_EQ(a.regenerations, b.regenerations);
  for (int i = 0; i < a.spec.agent_count(); ++i) {
    const auto& wa = static_cast<const MergeAgent&>(*a.spec.agents[i]).weights();
    const auto& wb = static_cast<const MergeAgent&>(*b.spec.agents[i]).weights();
    EXPECT_EQ(wa.reference, wb.reference);
  }
}

TEST(GenMerge, ThreeCarsTargetLeftLane) {
  ScenarioConfig cfg;
  cfg.car_count = 3;
  const MergeInstance m = gen_merge(cfg);
  ASSERT_EQ(m.spec.agent_count(), 3);
  EXPECT_EQ(m.spec.horizon, 20);
  EXPECT_EQ(std::count(m.lane.begin(), m.lane.end(), 0), 2);
  for (int i = 0; i < 3; ++i) {
    const auto& w = static_cast<const MergeAgent&>(*m.spec.agents[i]).weights();
    EXPECT_EQ(w.reference[bicycle::kY], 0.0);
    EXPECT_GE(w.reference[bicycle::kV], cfg.target_speed.lo);
    EXPECT_LT(w.reference[bicycle::kV], cfg.target_speed.hi);
    const double y0 = m.spec.initial_state[4 * i + bicycle::kY];
    EXPECT_EQ(y0, m.lane[i] == 0 ? 0.0 : -cfg.lane_width);
  }
}

TEST(GenMerge, InitialStatesRespectClearance) {
  ScenarioConfig cfg;
  for (int K : {2, 3, 5, 8}) {
    cfg.car_count = K;
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
      cfg.seed = seed;
      const MergeInstance m = gen_merge(cfg);
      const DistanceConstraint h(cfg.d_min);
      for (int i = 0; i < K; ++i)
        for (int j = i + 1; j < K; ++j)
          EXPECT_LE(h.value(m.spec.initial_state.segment(4 * i, 4),
                            m.spec.initial_state.segment(4 * j, 4)),
                    0.0);
    }
  }
}

TEST(GenMerge, ImpossibleSpacingExhaustsRetries) {
  ScenarioConfig cfg;
  cfg.spacing = {0.5, 0.6};
  cfg.lane_width = 0.5;
  cfg.max_regenerations = 3;
  EXPECT_THROW(gen_merge(cfg), ConfigError);
}

TEST(GenRace, SlotsAndSpeeds) {
  ScenarioConfig cfg;
  cfg.kind = ScenarioKind::Race;
  cfg.car_count = 2;
  const RaceSetup front_fast = gen_race(cfg, StartPosition::Front, StartSpeed::Fast);
  EXPECT_GT(front_fast.progress[0], front_fast.progress[1]);
  EXPECT_GE(front_fast.spec.initial_state[2], cfg.fast_speed.lo);
  EXPECT_LT(front_fast.spec.initial_state[6], cfg.slow_speed.hi);
  const RaceSetup rear_slow = gen_race(cfg, StartPosition::Rear, StartSpeed::Slow);
  EXPECT_LT(rear_slow.progress[0], rear_slow.progress[1]);
  EXPECT_LT(rear_slow.spec.initial_state[2], cfg.slow_speed.hi);
  EXPECT_EQ(front_fast.progress[0], rear_slow.progress[1]);  // same draws, mirrored
  EXPECT_GT(front_fast.step_cap, 0);
}

TEST(GenRace, RelaxesClearanceWhenAlreadyTooClose) {
  ScenarioConfig cfg;
  cfg.kind = ScenarioKind::Race;
  cfg.car_count = 2;
  const RaceSetup setup = gen_race(cfg, StartPosition::Front, StartSpeed::Fast);
  Vec joint = setup.spec.initial_state;
  const GameSpec apart = race_game(setup, joint);
  EXPECT_EQ(static_cast<const DistanceConstraint&>(*apart.constraint).d_min(), cfg.d_min);
  joint.segment<2>(4) = joint.segment<2>(0) + Eigen::Vector2d(0.0, 1.0);
  joint[6] = joint[2];
  joint[7] = joint[3];
  const GameSpec close = race_game(setup, joint);
  const double relaxed = static_cast<const DistanceConstraint&>(*close.constraint).d_min();
  EXPECT_NEAR(relaxed, 0.99, 1e-9);
}
