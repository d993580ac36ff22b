#include <cmath>

#include <gtest/gtest.h>

#include "rd3g/partition.hpp"
#include "rd3g/vehicles.hpp"
#include "test_util.hpp"

using namespace rd3g;
using rd3g::testing::planar_agent;

namespace {

// N planar agents; states are set directly, never rolled out.
struct Scene {
  GameSpec spec;
  Trajectory traj;
};

Scene planar(int agents, int horizon, double d_min) {
  Scene s;
  s.spec.horizon = horizon;
  for (int i = 0; i < agents; ++i) s.spec.agents.push_back(planar_agent(i, {0, 0}));
  s.spec.constraint = std::make_shared<DistanceConstraint>(d_min);
  s.spec.initial_state = Vec::Zero(2 * agents);
  for (int i = 0; i < agents; ++i) s.spec.initial_state[2 * i] = 10.0 * i;
  s.traj = Trajectory::zeros_like(s.spec);
  for (int i = 0; i < agents; ++i)
    for (int k = 1; k <= horizon; ++k) s.traj.state(i, k) = Eigen::Vector2d(10.0 * i, 0.0);
  return s;
}

// Brute force over every ordered (i, j, k).
double violation_oracle(const GameSpec& spec, const Trajectory& traj) {
  double sum = 0.0;
  for (int i = 0; i < spec.agent_count(); ++i)
    for (int j = 0; j < spec.participant_count(); ++j) {
      if (i == j) continue;
      for (int k = 1; k <= spec.horizon; ++k) {
        const double h = spec.constraint->value(participant_state(spec, traj, i, k),
                                                participant_state(spec, traj, j, k));
        if (h > 0.0) sum += h;
      }
    }
  return sum;
}

}  // namespace

TEST(Partition, AllInactiveWhenApart) {
  Scene s = planar(2, 3, 1.0);
  // h = 1 - 1.2 = -0.2
  for (int k = 1; k <= 3; ++k) s.traj.state(1, k) = Eigen::Vector2d(std::sqrt(1.2), 0.0);
  s.traj.state(0, 1).setZero();
  s.traj.state(0, 2).setZero();
  s.traj.state(0, 3).setZero();
  const Partition p = partition_constraints(s.spec, s.traj);
  for (int i = 0; i < 2; ++i)
    for (int k = 1; k <= 3; ++k) {
      EXPECT_TRUE(p.active(i, k).empty());
      ASSERT_EQ(p.inactive(i, k).size(), 1u);
      EXPECT_EQ(p.inactive(i, k)[0], 1 - i);
    }
  EXPECT_EQ(p.active_count(), 0);
}

TEST(Partition, BoundaryIsActive) {
  Scene s = planar(2, 3, 5.0);
  s.traj.state(0, 2) = Eigen::Vector2d(0.0, 0.0);
  s.traj.state(1, 2) = Eigen::Vector2d(3.0, 4.0);  // h = 25 - 25 = 0 exactly
  const Partition p = partition_constraints(s.spec, s.traj);
  ASSERT_EQ(p.active(0, 2).size(), 1u);
  EXPECT_EQ(p.active(0, 2)[0], 1);
  EXPECT_EQ(p.active(1, 2)[0], 0);
  EXPECT_TRUE(p.active(0, 1).empty());
  EXPECT_TRUE(p.active(0, 3).empty());
}

TEST(Partition, OnlyViolatedPairIsActive) {
  Scene s = planar(3, 4, 1.0);
  // agents 1 and 2 (0-based) meet at step 3
  s.traj.state(1, 3) = Eigen::Vector2d(50.0, 0.0);
  s.traj.state(2, 3) = Eigen::Vector2d(50.5, 0.0);
  const Partition p = partition_constraints(s.spec, s.traj);
  EXPECT_EQ(p.active(1, 3), std::vector<int>{2});
  EXPECT_EQ(p.active(2, 3), std::vector<int>{1});
  EXPECT_TRUE(p.active(0, 3).empty());
  EXPECT_EQ(p.active_count(), 2);
  const auto triplets = p.active_triplets();
  ASSERT_EQ(triplets.size(), 2u);
  EXPECT_EQ(triplets[0], (ConstraintTriplet{1, 3, 2}));
  EXPECT_EQ(triplets[1], (ConstraintTriplet{2, 3, 1}));
}

TEST(SyncDuals, RetentionRules) {
  Scene s = planar(2, 2, 1.0);
  s.traj.state(1, 1) = Eigen::Vector2d(0.5, 0.0);  // active at k = 1
  const Partition p1 = partition_constraints(s.spec, s.traj);

  DualMap duals{{{0, 1, 1}, 0.7}, {{1, 1, 0}, 0.3}, {{0, 2, 1}, 0.9}};
  const DualMap synced = sync_duals(p1, duals);
  EXPECT_EQ(synced.size(), 2u);
  EXPECT_EQ(synced.count({0, 2, 1}), 0u);  // left H+
  EXPECT_EQ(synced.at({0, 1, 1}), 0.7);

  s.traj.state(1, 2) = Eigen::Vector2d(0.2, 0.0);  // enters at k = 2
  const Partition p2 = partition_constraints(s.spec, s.traj);
  const DualMap entered = sync_duals(p2, synced);
  EXPECT_EQ(entered.at({0, 2, 1}), 0.0);
  EXPECT_EQ(entered.at({1, 2, 0}), 0.0);
  EXPECT_EQ(entered.at({0, 1, 1}), 0.7);

  EXPECT_EQ(sync_duals(p2, entered), entered);
}

TEST(ViolationSum, FeasibleIsZero) {
  const Scene s = planar(3, 3, 1.0);
  EXPECT_EQ(violation_sum(s.spec, s.traj), 0.0);
}

TEST(ViolationSum, SymmetricPairCountedTwice) {
  Scene s = planar(2, 3, 1.0);
  s.traj.state(1, 2) = Eigen::Vector2d(std::sqrt(0.7), 0.0);  // h = 0.3
  const double v = violation_sum(s.spec, s.traj);
  EXPECT_NEAR(v, 0.6, 1e-12);
  EXPECT_DOUBLE_EQ(v, violation_oracle(s.spec, s.traj));
}

TEST(ViolationSum, MatchesBruteForceWithFixedAgent) {
  Scene s = planar(2, 3, 1.0);
  FixedAgent obstacle;
  for (int k = 0; k <= 3; ++k) obstacle.states.push_back(Eigen::Vector2d(10.0, 0.3));
  s.spec.fixed_agents.push_back(obstacle);
  s.traj.state(0, 1) = Eigen::Vector2d(10.0, 0.0);
  s.traj.state(0, 3) = Eigen::Vector2d(9.9, 0.0);
  s.traj.state(1, 2) = Eigen::Vector2d(10.2, 0.1);
  const double v = violation_sum(s.spec, s.traj);
  EXPECT_GT(v, 0.0);
  EXPECT_DOUBLE_EQ(v, violation_oracle(s.spec, s.traj));
}

TEST(Margin, SmallestSlack) {
  Scene s = planar(2, 2, 1.0);
  s.traj.state(1, 1) = Eigen::Vector2d(2.0, 0.0);
  EXPECT_DOUBLE_EQ(min_constraint_margin(s.spec, s.traj), 3.0);
}
