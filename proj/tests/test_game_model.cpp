#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "rd3g/game_model.hpp"
#include "rd3g/vehicles.hpp"
#include "test_util.hpp"

using namespace rd3g;
using rd3g::testing::scalar_agent;
using rd3g::testing::vec;

namespace {

// Delegates to an LQ agent but reports the stage gradient with its sign flipped.
class FlippedGradient : public LinearQuadraticAgent {
 public:
  using LinearQuadraticAgent::LinearQuadraticAgent;
  CostGradient stage_cost_gradient(int k, const Vec& joint, const Vec& u) const override {
    CostGradient g = LinearQuadraticAgent::stage_cost_gradient(k, joint, u);
    g.state = -g.state;
    g.control = -g.control;
    return g;
  }
};

class Exploding : public LinearQuadraticAgent {
 public:
  using LinearQuadraticAgent::LinearQuadraticAgent;
  Vec step(const Vec& x, const Vec& u) const override {
    Vec next = LinearQuadraticAgent::step(x, u);
    if (next[0] > 2.5) next[0] = std::numeric_limits<double>::infinity();
    return next;
  }
};

GameSpec integrator_game(int horizon, double x0) {
  GameSpec spec;
  spec.horizon = horizon;
  spec.agents.push_back(scalar_agent());
  spec.initial_state = Vec::Constant(1, x0);
  return spec;
}

}  // namespace

TEST(Rollout, ZeroControlKeepsState) {
  const GameSpec spec = integrator_game(2, 1.0);
  Trajectory traj = Trajectory::zeros_like(spec);
  rollout(spec, traj);
  EXPECT_EQ(traj.state(0, 1)[0], 1.0);
  EXPECT_EQ(traj.state(0, 2)[0], 1.0);
}

TEST(Rollout, OneStep) {
  const GameSpec spec = integrator_game(1, 1.0);
  Trajectory traj = Trajectory::zeros_like(spec);
  traj.control(0, 0)[0] = -0.5;
  rollout(spec, traj);
  EXPECT_EQ(traj.state(0, 1)[0], 0.5);
}

TEST(Rollout, BicycleStep) {
  GameSpec spec;
  spec.horizon = 1;
  spec.agents.push_back(std::make_shared<MergeAgent>(0, 0.1, 2.5, MergeCostWeights{}));
  spec.initial_state = vec({0, 0, 1, 0});
  Trajectory traj = Trajectory::zeros_like(spec);
  traj.control(0, 0) = vec({1, 0});
  rollout(spec, traj);
  const Vec expected = vec({0.1, 0, 1.1, 0});
  EXPECT_LT((traj.state(0, 1) - expected).norm(), 1e-15);
}

TEST(Rollout, DivergenceNamesStepAndAgent) {
  LinearQuadraticAgent::Params p = scalar_agent()->params();
  p.owner = 1;
  GameSpec spec;
  spec.horizon = 4;
  spec.agents.push_back(scalar_agent(0));
  spec.agents.push_back(std::make_shared<Exploding>(p));
  spec.initial_state = vec({0.0, 0.0});
  Trajectory traj = Trajectory::zeros_like(spec);
  for (int k = 0; k < 4; ++k) traj.control(1, k)[0] = 1.0;
  try {
    rollout(spec, traj);
    FAIL() << "expected RolloutDivergence";
  } catch (const RolloutDivergence& e) {
    EXPECT_EQ(e.step(), 3);
    EXPECT_EQ(e.agent(), 1);
  }
}

TEST(DerivativeCheck, QuadraticControlCost) {
  const auto agent = scalar_agent(0, 0.0, 3.0);
  const auto report = check_stage_cost(*agent, 0, vec({0.7}), vec({-1.3}));
  EXPECT_LE(report.max_error(), 1e-6);
}

TEST(DerivativeCheck, DistanceConstraint) {
  const DistanceConstraint h(1.5);
  const auto report = check_constraint(h, vec({0.3, -0.2, 4, 0.1}), vec({1.1, 0.9, 3, -0.4}));
  EXPECT_LE(report.max_error(), 1e-6);
}

TEST(DerivativeCheck, SignFlipDoublesError) {
  const FlippedGradient agent(scalar_agent(0, 0.0, 3.0)->params());
  // |2 R u| = 7.8, well above the unit floor of the relative error.
  const auto report = check_stage_cost(agent, 0, vec({0.0}), vec({-1.3}));
  EXPECT_NEAR(report.max_error(), 2.0, 1e-6);
}

TEST(DerivativeCheck, RelativeErrorFloor) {
  Mat a(1, 1), b(1, 1);
  a << 1e-3;
  b << 2e-3;
  EXPECT_DOUBLE_EQ(relative_error(a, b), 1e-3);
  a << 10.0;
  b << 11.0;
  EXPECT_DOUBLE_EQ(relative_error(a, b), 1.0 / 11.0);
}

TEST(GameSpec, ValidateRejectsBadInitialState) {
  GameSpec spec = integrator_game(2, 1.0);
  spec.initial_state = Vec::Zero(3);
  EXPECT_THROW(spec.validate(), ConfigError);
}

TEST(Cost, AgentCostSumsStagesAndTerminal) {
  const GameSpec spec = integrator_game(2, 1.0);
  Trajectory traj = Trajectory::zeros_like(spec);
  traj.control(0, 0)[0] = -0.5;
  traj.control(0, 1)[0] = 0.25;
  rollout(spec, traj);
  // 0.25 + 0.0625 + 0.75^2
  EXPECT_DOUBLE_EQ(agent_cost(spec, traj, 0), 0.25 + 0.0625 + 0.5625);
}
