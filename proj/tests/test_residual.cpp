#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "rd3g/residual.hpp"
#include "rd3g/vehicles.hpp"
#include "test_util.hpp"

using namespace rd3g;
using rd3g::testing::planar_agent;
using rd3g::testing::scalar_lq_game;
using rd3g::testing::vec;

namespace {

Iterate scalar_point(const GameSpec& spec, double u, double x1, double lambda) {
  Iterate it = Iterate::zeros_like(spec);
  it.trajectory.control(0, 0)[0] = u;
  it.trajectory.state(0, 1)[0] = x1;
  it.costate(0, 0)[0] = lambda;
  return it;
}

}  // namespace

TEST(Barrier, Values) {
  EXPECT_DOUBLE_EQ(barrier(-1.0, 0.5), 0.0);
  EXPECT_NEAR(barrier(-std::exp(-1.0), 1.0), 1.0, 1e-15);
  EXPECT_NEAR(barrier(-0.1, 0.1), 0.1 * std::log(10.0), 1e-15);
}

TEST(Barrier, DomainError) {
  EXPECT_THROW(barrier(0.0, 0.1), BarrierDomainError);
  EXPECT_THROW(barrier(0.3, 0.1), BarrierDomainError);
  EXPECT_THROW(barrier_chain(0.0, vec({1}), Mat::Zero(1, 1), 0.1), BarrierDomainError);
}

TEST(BarrierChain, ZeroGradient) {
  Mat d2h(2, 2);
  d2h << 1.0, 0.5, 0.5, 3.0;
  const auto d = barrier_chain(-0.5, Vec::Zero(2), d2h, 0.2);
  EXPECT_EQ(d.gradient.norm(), 0.0);
  EXPECT_LT((d.hessian - (0.2 / 0.5) * d2h).norm(), 1e-15);
}

TEST(BarrierChain, ScalarSymbolic) {
  // h(x) = x - 1 at x = 0; B = -log(1 - x): B' = 1/(1 - x) = 1, B'' = 1/(1 - x)^2 = 1
  const auto d = barrier_chain(-1.0, vec({1.0}), Mat::Zero(1, 1), 1.0);
  EXPECT_DOUBLE_EQ(d.gradient[0], 1.0);
  EXPECT_DOUBLE_EQ(d.hessian(0, 0), 1.0);
}

TEST(BarrierChain, MatchesFiniteDifferences) {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    // h(z) = z' A z + b' z - c, kept negative near z
    Mat A(3, 3);
    for (int i = 0; i < 9; ++i) A.data()[i] = U(gen);
    A = 0.5 * (A + A.transpose()).eval();
    Vec b(3), z(3);
    for (int i = 0; i < 3; ++i) b[i] = U(gen), z[i] = 0.3 * U(gen);
    const double c = 4.0;
    const double rho = 0.3;
    auto h = [&](const Vec& p) { return p.dot(A * p) + b.dot(p) - c; };
    auto B = [&](const Vec& p) { return barrier(h(p), rho); };
    const Vec dh = 2.0 * A * z + b;
    const auto d = barrier_chain(h(z), dh, 2.0 * A, rho);

    const double eps = 1e-5;
    Vec g_fd(3);
    Mat H_fd(3, 3);
    for (int i = 0; i < 3; ++i) {
      Vec e = Vec::Zero(3);
      e[i] = eps;
      g_fd[i] = (B(z + e) - B(z - e)) / (2 * eps);
      for (int j = 0; j < 3; ++j) {
        Vec f = Vec::Zero(3);
        f[j] = eps;
        H_fd(i, j) = (B(z + e + f) - B(z + e - f) - B(z - e + f) + B(z - e - f)) / (4 * eps * eps);
      }
    }
    EXPECT_LE(relative_error(d.gradient, g_fd), 1e-5);
    EXPECT_LE(relative_error(d.hessian, H_fd), 1e-5);
  }
}

TEST(Residual, ScalarOptimumIsZero) {
  const GameSpec spec = scalar_lq_game();
  Iterate it = scalar_point(spec, -0.5, 0.5, 1.0);
  const Partition p = partition_constraints(spec, it.trajectory);
  const ResidualVector r = assemble_residual(it, p, 0.1, spec);
  ASSERT_EQ(r.values.size(), 3);
  EXPECT_EQ(r.values.norm(), 0.0);
}

TEST(Residual, ScalarHandValues) {
  const GameSpec spec = scalar_lq_game();
  Iterate it = scalar_point(spec, 0.0, 1.0, 0.0);
  const Partition p = partition_constraints(spec, it.trajectory);
  const ResidualVector r = assemble_residual(it, p, 0.1, spec);
  ASSERT_EQ(r.values.size(), 3);
  // (dL/dx1, dL/du, F)
  EXPECT_EQ(r.values[0], 2.0);
  EXPECT_EQ(r.values[1], 0.0);
  EXPECT_EQ(r.values[2], 0.0);
  EXPECT_EQ(r.index_map[0].kind, RowKind::StationarityState);
  EXPECT_EQ(r.index_map[1].kind, RowKind::StationarityControl);
  EXPECT_EQ(r.index_map[2].kind, RowKind::Dynamics);
}

TEST(Residual, RolloutHasZeroDefects) {
  GameSpec spec;
  spec.horizon = 8;
  MergeCostWeights w;
  w.reference = Eigen::Vector4d(0, 0, 5, 0);
  for (int i = 0; i < 2; ++i) spec.agents.push_back(std::make_shared<MergeAgent>(i, 0.1, 2.5, w));
  spec.constraint = std::make_shared<DistanceConstraint>(2.5);
  spec.initial_state = vec({0, 0, 5, 0, -8, -3.5, 5, 0.1});

  Iterate it = Iterate::zeros_like(spec);
  std::mt19937_64 gen(3);
  std::normal_distribution<double> N(0.0, 0.3);
  for (int i = 0; i < it.trajectory.controls().size(); ++i) it.trajectory.controls()[i] = N(gen);
  for (int i = 0; i < it.costates.size(); ++i) it.costates[i] = N(gen);
  rollout(spec, it.trajectory);
  const Partition p = partition_constraints(spec, it.trajectory);
  sync_duals(p, it);
  const ResidualVector r = assemble_residual(it, p, 0.05, spec);
  int dynamics_rows = 0;
  for (std::size_t row = 0; row < r.index_map.size(); ++row)
    if (r.index_map[row].kind == RowKind::Dynamics) {
      ++dynamics_rows;
      EXPECT_EQ(r.values[row], 0.0);
    }
  EXPECT_EQ(dynamics_rows, 2 * 8 * 4);
}

TEST(Residual, FarApartMatchesUnconstrained) {
  GameSpec with;
  with.horizon = 5;
  with.agents = {planar_agent(0, {1, 0}), planar_agent(1, {-1, 0})};
  with.initial_state = vec({0, 0, 500, 0});
  GameSpec without = with;
  with.constraint = std::make_shared<DistanceConstraint>(1.0);

  Iterate it = Iterate::zeros_like(with);
  it.trajectory.controls().setConstant(0.4);
  it.costates.setConstant(-0.2);
  rollout(with, it.trajectory);
  const Partition p = partition_constraints(with, it.trajectory);
  ASSERT_EQ(p.active_count(), 0);
  const Vec a = assemble_residual(it, p, 1e-12, with).values;
  const Vec b =
      assemble_residual(it, partition_constraints(without, it.trajectory), 1e-12, without).values;
  ASSERT_EQ(a.size(), b.size());
  EXPECT_LE((a - b).lpNorm<Eigen::Infinity>(), 1e-12);
}

TEST(Residual, DimensionMismatchIsAssemblyError) {
  const GameSpec spec = scalar_lq_game();
  Iterate it = scalar_point(spec, 0.0, 1.0, 0.0);
  const Partition p = partition_constraints(spec, it.trajectory);
  it.costates = Vec::Zero(4);
  EXPECT_THROW(assemble_residual(it, p, 0.1, spec), AssemblyError);
}

TEST(Residual, ViolatedInactiveConstraintHitsBarrierDomain) {
  GameSpec spec;
  spec.horizon = 2;
  spec.agents = {planar_agent(0, {0, 0}), planar_agent(1, {0, 0})};
  spec.constraint = std::make_shared<DistanceConstraint>(1.0);
  spec.initial_state = vec({0, 0, 3, 0});
  Iterate it = Iterate::zeros_like(spec);
  rollout(spec, it.trajectory);
  const Partition feasible = partition_constraints(spec, it.trajectory);
  it.trajectory.state(1, 2) = Eigen::Vector2d(0.5, 0.0);
  EXPECT_THROW(assemble_residual(it, feasible, 0.1, spec), BarrierDomainError);
}
