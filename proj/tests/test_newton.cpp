#include <random>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "rd3g/diagnostics.hpp"
#include "rd3g/newton.hpp"
#include "rd3g/vehicles.hpp"
#include "test_util.hpp"

using namespace rd3g;
using rd3g::testing::planar_agent;
using rd3g::testing::scalar_lq_game;
using rd3g::testing::vec;

namespace {

SparseSystem system_from(const Mat& J, const Vec& r) {
  SparseSystem s;
  s.jacobian = J.sparseView();
  s.rhs = -r;
  return s;
}

}  // namespace

TEST(Jacobian, ScalarCostateColumn) {
  const GameSpec spec = scalar_lq_game();
  Iterate it = Iterate::zeros_like(spec);
  it.trajectory.state(0, 1)[0] = 1.0;
  const Partition p = partition_constraints(spec, it.trajectory);
  const SparseSystem s = assemble_jacobian(it, p, 0.1, spec);
  const Mat J = Mat(s.jacobian);
  ASSERT_EQ(J.rows(), 3);
  ASSERT_EQ(J.cols(), 3);
  // columns: x1, u0, lambda0; rows: dL/dx1, dL/du0, F0
  const KktLayout layout(spec, p);
  const int lam = layout.costate_col(0, 0);
  EXPECT_EQ(J(layout.stationarity_state_row(0, 1), lam), -1.0);
  EXPECT_EQ(J(layout.stationarity_control_row(0, 0), lam), 1.0);
  EXPECT_EQ(J(layout.dynamics_row(0, 0), lam), 0.0);
  Mat expected(3, 3);
  expected << 2, 0, -1,
              0, 2, 1,
              -1, 1, 0;
  EXPECT_EQ(J, expected);
}

TEST(Jacobian, MatchesFiniteDifferencesForLinearDynamics) {
  GameSpec spec;
  spec.horizon = 6;
  auto a = planar_agent(0, {2, 0})->params();
  a.coupled_with = 1;
  a.coupling_weight = 0.3;
  a.coupling_selector = Mat::Identity(2, 2);
  spec.agents = {std::make_shared<LinearQuadraticAgent>(a), planar_agent(1, {0, 0})};
  spec.constraint = std::make_shared<DistanceConstraint>(1.0);
  spec.initial_state = vec({0, 0, 0.5, 0.2});

  std::mt19937_64 gen(5);
  std::normal_distribution<double> N(0.0, 1.0);
  int checked = 0;
  for (int point = 0; point < 20; ++point) {
    Iterate it = Iterate::zeros_like(spec);
    for (int i = 0; i < it.trajectory.states().size(); ++i) it.trajectory.states()[i] = N(gen);
    for (int i = 0; i < it.trajectory.controls().size(); ++i) it.trajectory.controls()[i] = N(gen);
    for (int i = 0; i < it.costates.size(); ++i) it.costates[i] = N(gen);
    const Partition p = partition_constraints(spec, it.trajectory);
    if (min_constraint_margin(spec, it.trajectory) > -0.3 &&
        min_constraint_margin(spec, it.trajectory) < 0.3)
      continue;  // too close to the boundary for central differences
    sync_duals(p, it);
    for (auto& [key, mu] : it.duals) mu = std::abs(N(gen));
    EXPECT_LE(jacobian_fd_error(it, p, 0.05, spec), 1e-4);
    ++checked;
  }
  EXPECT_GE(checked, 10);
}

TEST(Jacobian, NoActiveConstraintsNoDualColumns) {
  GameSpec spec;
  spec.horizon = 3;
  spec.agents = {planar_agent(0, {0, 0}), planar_agent(1, {0, 0})};
  spec.constraint = std::make_shared<DistanceConstraint>(1.0);
  spec.initial_state = vec({0, 0, 5, 0});
  Iterate it = Iterate::zeros_like(spec);
  rollout(spec, it.trajectory);
  const Partition p = partition_constraints(spec, it.trajectory);
  const SparseSystem s = assemble_jacobian(it, p, 0.1, spec);
  const int primal = 2 * 3 * (2 + 2 + 2);
  EXPECT_EQ(s.jacobian.rows(), primal);
  EXPECT_EQ(s.jacobian.cols(), primal);
  for (const auto& tag : s.column_map) EXPECT_NE(tag.kind, ColumnKind::Dual);
  for (const auto& tag : s.row_map) EXPECT_NE(tag.kind, RowKind::ActiveConstraint);
}

TEST(Jacobian, ActiveConstraintAddsSquareBlock) {
  GameSpec spec;
  spec.horizon = 3;
  spec.agents = {planar_agent(0, {0, 0}), planar_agent(1, {0, 0})};
  spec.constraint = std::make_shared<DistanceConstraint>(1.0);
  spec.initial_state = vec({0, 0, 0.5, 0});
  Iterate it = Iterate::zeros_like(spec);
  rollout(spec, it.trajectory);
  const Partition p = partition_constraints(spec, it.trajectory);
  ASSERT_EQ(p.active_count(), 6);
  sync_duals(p, it);
  const SparseSystem s = assemble_jacobian(it, p, 0.1, spec);
  EXPECT_EQ(s.jacobian.rows(), s.jacobian.cols());
  EXPECT_EQ(s.jacobian.cols(), 2 * 3 * 6 + 6);
}

TEST(SolveDescent, Identity) {
  const Descent d = solve_descent(system_from(Mat::Identity(2, 2), vec({1, 2})));
  EXPECT_LT((d.step - vec({-1, -2})).norm(), 1e-12);
}

TEST(SolveDescent, Diagonal) {
  Mat J = Mat::Zero(2, 2);
  J.diagonal() << 2, 4;
  const Descent d = solve_descent(system_from(J, vec({2, 4})));
  EXPECT_LT((d.step - vec({-1, -1})).norm(), 1e-12);
}

TEST(SolveDescent, RandomSparseAgainstDenseSolve) {
  std::mt19937_64 gen(17);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  std::bernoulli_distribution keep(0.1);
  Mat J = Mat::Zero(50, 50);
  for (int i = 0; i < 50; ++i) {
    for (int j = 0; j < 50; ++j)
      if (keep(gen)) J(i, j) = U(gen);
    J(i, i) = 6.0 + U(gen);
  }
  Vec r(50);
  for (int i = 0; i < 50; ++i) r[i] = U(gen);
  const double tol = 1e-10;
  const Descent d = solve_descent(system_from(J, r), tol);
  EXPECT_LE((J * d.step + r).norm() / r.norm(), tol);
  const Vec oracle = J.partialPivLu().solve(-r);
  EXPECT_LE((d.step - oracle).norm() / oracle.norm(), 1e-8);
}

TEST(SolveDescent, FallsBackToQrWhenCgCannotFinish) {
  std::mt19937_64 gen(2);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  Mat J(30, 30);
  for (int i = 0; i < J.size(); ++i) J.data()[i] = U(gen);
  Vec r(30);
  for (int i = 0; i < 30; ++i) r[i] = U(gen);
  const Descent d = solve_descent(system_from(J, r), 1e-14, 1);
  EXPECT_EQ(d.method, SolveMethod::SparseQr);
  EXPECT_LE((J * d.step + r).norm() / r.norm(), 1e-9);
}

TEST(SolveDescent, NonFiniteSystemThrows) {
  Mat J = Mat::Identity(2, 2);
  J(0, 0) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(solve_descent(system_from(J, vec({1, 1}))), LinearSolveError);
}
