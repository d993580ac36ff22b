#include "rd3g/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>

#include "rd3g/newton.hpp"
#include "rd3g/residual.hpp"
#include "rd3g/scenario.hpp"
#include "rd3g/vehicles.hpp"

namespace rd3g {

double DerivativeSuite::max_error() const {
  double e = 0.0;
  for (const auto& s : entries) e = std::max(e, s.max_error);
  return e;
}

double residual_gradient_error(const Iterate& iterate, const Partition& partition, double rho,
                               const GameSpec& spec, double eps) {
  const KktLayout layout(spec, partition);
  const Vec r = residual_values(iterate, partition, rho, spec, layout);
  const int N = spec.agent_count(), T = spec.horizon;
  const int n = spec.state_dim(), m = spec.control_dim();

  Vec analytic(layout.rows()), fd(layout.rows());
  int row = 0;
  auto probe = [&](int i, int col, int res_row) {
    Vec e = Vec::Zero(layout.cols());
    e[col] = 1.0;
    const double up = agent_lagrangian(step_iterate(iterate, e, eps, layout), partition, rho, spec, i);
    const double dn = agent_lagrangian(step_iterate(iterate, e, -eps, layout), partition, rho, spec, i);
    analytic[row] = r[res_row];
    fd[row] = (up - dn) / (2.0 * eps);
    ++row;
  };
  for (int i = 0; i < N; ++i) {
    for (int k = 1; k <= T; ++k)
      for (int c = 0; c < n; ++c)
        probe(i, layout.state_col(i, k) + c, layout.stationarity_state_row(i, k) + c);
    for (int k = 0; k < T; ++k)
      for (int c = 0; c < m; ++c)
        probe(i, layout.control_col(i, k) + c, layout.stationarity_control_row(i, k) + c);
    for (int k = 0; k < T; ++k)
      for (int c = 0; c < n; ++c)
        probe(i, layout.costate_col(i, k) + c, layout.dynamics_row(i, k) + c);
  }
  for (const auto& t : layout.active()) probe(t.agent, layout.dual_col(t), layout.constraint_row(t));
  return relative_error(analytic.head(row), fd.head(row));
}

double jacobian_fd_error(const Iterate& iterate, const Partition& partition, double rho,
                         const GameSpec& spec, double eps) {
  const KktLayout layout(spec, partition);
  const Mat J = Mat(assemble_jacobian(iterate, partition, rho, spec).jacobian);
  Mat fd(layout.rows(), layout.cols());
  for (int c = 0; c < layout.cols(); ++c) {
    Vec e = Vec::Zero(layout.cols());
    e[c] = 1.0;
    const Vec up = residual_values(step_iterate(iterate, e, eps, layout), partition, rho, spec, layout);
    const Vec dn = residual_values(step_iterate(iterate, e, -eps, layout), partition, rho, spec, layout);
    fd.col(c) = (up - dn) / (2.0 * eps);
  }
  return relative_error(J, fd);
}

namespace {

constexpr double kPi = std::numbers::pi;

Vec uniform_vec(Rng& rng, const Vec& lo, const Vec& hi) {
  Vec v(lo.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = rng.uniform(lo[i], hi[i]);
  return v;
}

Vec bicycle_state(Rng& rng) {
  Vec x(4);
  x << rng.uniform(-10, 10), rng.uniform(-5, 5), rng.uniform(0.5, 8.0), rng.uniform(-kPi, kPi);
  return x;
}

Vec bicycle_control(Rng& rng) {
  Vec u(2);
  u << rng.uniform(-3, 3), rng.uniform(-0.45, 0.45);
  return u;
}

Vec track_state(Rng& rng, const StadiumTrack& track) {
  const auto pose = track.pose_at(rng.uniform(0.0, track.length()), rng.uniform(-3.0, 3.0));
  Vec x(4);
  x << pose.position.x(), pose.position.y(), rng.uniform(0.5, 8.0),
      pose.heading + rng.uniform(-0.8, 0.8);
  return x;
}

// Random primal-dual point: every pairwise |h| stays >= margin so the barrier
// stays smooth across the finite-difference probes.
using StateSampler = std::function<Vec(Rng&, int agent, int k)>;

Iterate random_iterate(const GameSpec& spec, Rng& rng, const StateSampler& sample,
                       double margin) {
  Iterate it = Iterate::zeros_like(spec);
  const int N = spec.agent_count(), T = spec.horizon;
  const int n = spec.state_dim(), m = spec.control_dim();
  for (int k = 1; k <= T; ++k)
    for (int i = 0; i < N; ++i) {
      for (int tries = 0;; ++tries) {
        it.trajectory.state(i, k) = sample(rng, i, k);
        bool ok = true;
        if (spec.constraint) {
          const Vec xi = it.trajectory.state(i, k);
          for (int j = 0; j < spec.participant_count() && ok; ++j) {
            if (j == i || (j > i && j < N)) continue;
            const double h = spec.constraint->value(xi, participant_state(spec, it.trajectory, j, k));
            ok = std::abs(h) >= margin;
          }
        }
        if (ok) break;
        if (tries > 1000) throw Error("could not sample a well-separated derivative point");
      }
    }
  for (int i = 0; i < N; ++i)
    for (int k = 0; k < T; ++k) {
      for (int c = 0; c < m; ++c) it.trajectory.control(i, k)[c] = rng.uniform(-1.0, 1.0);
      if (n == 4 && m == 2) it.trajectory.control(i, k)[1] = rng.uniform(-0.4, 0.4);
      for (int c = 0; c < n; ++c) it.costate(i, k)[c] = rng.uniform(-2.0, 2.0);
    }
  sync_duals(partition_constraints(spec, it.trajectory), it);
  for (auto& [key, mu] : it.duals) mu = rng.uniform(0.1, 2.0);
  return it;
}

std::shared_ptr<LinearQuadraticAgent> lq_agent(Rng& rng, int owner, int other, double dt) {
  LinearQuadraticAgent::Params p;
  p.A = Mat::Identity(4, 4);
  p.A(0, 2) = p.A(1, 3) = dt;
  p.B = Mat::Zero(4, 2);
  p.B(2, 0) = p.B(3, 1) = dt;
  p.Q = uniform_vec(rng, Vec::Constant(4, 0.1), Vec::Constant(4, 2.0)).asDiagonal();
  p.R = uniform_vec(rng, Vec::Constant(2, 0.1), Vec::Constant(2, 2.0)).asDiagonal();
  p.Qf = uniform_vec(rng, Vec::Constant(4, 0.1), Vec::Constant(4, 2.0)).asDiagonal();
  p.reference = uniform_vec(rng, Vec::Constant(4, -2.0), Vec::Constant(4, 2.0));
  p.owner = owner;
  p.coupled_with = other;
  p.coupling_weight = rng.uniform(0.1, 1.0);
  p.coupling_selector = Mat::Zero(1, 4);
  p.coupling_selector(0, 0) = 1.0;
  return std::make_shared<LinearQuadraticAgent>(std::move(p));
}

void record(DerivativeSuite& suite, const std::string& name, double err) {
  auto it = std::find_if(suite.entries.begin(), suite.entries.end(),
                         [&](const SuiteEntry& e) { return e.name == name; });
  if (it == suite.entries.end()) {
    suite.entries.push_back({name, 0, 0.0});
    it = suite.entries.end() - 1;
  }
  ++it->points;
  it->max_error = std::max(it->max_error, err);
}

}  // namespace

DerivativeSuite run_derivative_suite(int points, std::uint64_t seed, double eps) {
  DerivativeSuite suite;
  Rng rng(seed, 0);
  const double dt = 0.1, L = 2.5;
  auto track = std::make_shared<StadiumTrack>(30.0, 12.0, 8.0);
  const MergeCostWeights merge_w{{0.0, 1.3, 0.7, 0.0}, {0.0, 0.0, 0.0, 2.0}, {0.5, 3.0}, 4.0,
                                 {0.0, -1.0, 5.0, 0.0}};
  RaceCostWeights race_w;
  race_w.q_lead = 0.8;
  race_w.q_lateral = 0.6;
  race_w.q_speed = 1.1;
  race_w.q_heading = 1.7;
  race_w.target_speed = 5.0;
  race_w.terminal_scale = 3.0;
  const DistanceConstraint collision(2.5);

  for (int p = 0; p < points; ++p) {
    // Models at a random point: three merge participants, two race cars.
    const MergeAgent merge(1, dt, L, merge_w);
    Vec joint(12);
    for (int i = 0; i < 3; ++i) joint.segment(i * 4, 4) = bicycle_state(rng);
    const Vec u = bicycle_control(rng);
    const Vec own = joint.segment(4, 4);
    record(suite, "bicycle dynamics", check_dynamics(merge, own, u, eps).max_error());
    record(suite, "merge cost", check_stage_cost(merge, p % 20, joint, u, eps).max_error());
    record(suite, "merge terminal cost", check_terminal_cost(merge, joint, eps).max_error());

    const RaceAgent race(0, 1, dt, L, track, race_w);
    Vec rjoint(8);
    rjoint << track_state(rng, *track), track_state(rng, *track);
    record(suite, "race cost", check_stage_cost(race, 0, rjoint, u, eps).max_error());
    record(suite, "race terminal cost", check_terminal_cost(race, rjoint, eps).max_error());

    record(suite, "distance constraint",
           check_constraint(collision, bicycle_state(rng), bicycle_state(rng), eps).max_error());

    auto lq = lq_agent(rng, 0, 1, dt);
    Vec lq_joint = uniform_vec(rng, Vec::Constant(8, -3.0), Vec::Constant(8, 3.0));
    const Vec lq_u = uniform_vec(rng, Vec::Constant(2, -1.0), Vec::Constant(2, 1.0));
    record(suite, "linear-quadratic agent",
           check_derivatives(*lq, 0, lq_joint, lq_joint.head(4), lq_u, eps).max_error());
  }

  // Assembled residual and Jacobian on small games.
  for (int p = 0; p < points; ++p) {
    const double rho = rng.uniform(0.01, 0.5);

    GameSpec merge_game;
    merge_game.horizon = 3;
    merge_game.step_dt = dt;
    merge_game.constraint = std::make_shared<DistanceConstraint>(2.5);
    merge_game.initial_state = Vec(12);
    for (int i = 0; i < 3; ++i) {
      merge_game.initial_state.segment(i * 4, 4) = bicycle_state(rng);
      merge_game.agents.push_back(std::make_shared<MergeAgent>(i, dt, L, merge_w));
    }
    const auto near_box = [](Rng& r, int, int) {
      Vec x(4);
      x << r.uniform(0, 6), r.uniform(-4, 1), r.uniform(0.5, 8.0), r.uniform(-1.0, 1.0);
      return x;
    };
    const Iterate mi = random_iterate(merge_game, rng, near_box, 0.3);
    const Partition mp = partition_constraints(merge_game, mi.trajectory);
    record(suite, "merge game residual", residual_gradient_error(mi, mp, rho, merge_game, eps));

    GameSpec race_game;
    race_game.horizon = 3;
    race_game.step_dt = dt;
    race_game.constraint = merge_game.constraint;
    race_game.initial_state = Vec(8);
    race_game.initial_state << track_state(rng, *track), track_state(rng, *track);
    for (int c = 0; c < 2; ++c)
      race_game.agents.push_back(std::make_shared<RaceAgent>(c, 1 - c, dt, L, track, race_w));
    const double base_s = rng.uniform(0.0, track->length());
    const auto on_track = [&](Rng& r, int, int) {
      const auto pose = track->pose_at(base_s + r.uniform(-4.0, 4.0), r.uniform(-3.0, 3.0));
      Vec x(4);
      x << pose.position.x(), pose.position.y(), r.uniform(0.5, 8.0),
          pose.heading + r.uniform(-0.8, 0.8);
      return x;
    };
    const Iterate ri = random_iterate(race_game, rng, on_track, 0.3);
    const Partition rp = partition_constraints(race_game, ri.trajectory);
    record(suite, "race game residual", residual_gradient_error(ri, rp, rho, race_game, eps));

    // Linear dynamics: the dropped dynamics curvature is zero, so the
    // Jacobian is exact. One fixed participant exercises the frozen path.
    GameSpec lq_game;
    lq_game.horizon = 3;
    lq_game.step_dt = dt;
    lq_game.constraint = std::make_shared<DistanceConstraint>(1.5, std::vector<int>{0, 1});
    lq_game.initial_state = uniform_vec(rng, Vec::Constant(8, -2.0), Vec::Constant(8, 2.0));
    lq_game.agents.push_back(lq_agent(rng, 0, 1, dt));
    lq_game.agents.push_back(lq_agent(rng, 1, 2, dt));
    FixedAgent fixed;
    for (int k = 0; k <= lq_game.horizon; ++k)
      fixed.states.push_back(uniform_vec(rng, Vec::Constant(4, -2.0), Vec::Constant(4, 2.0)));
    lq_game.fixed_agents.push_back(fixed);
    const auto lq_box = [](Rng& r, int, int) {
      return uniform_vec(r, Vec::Constant(4, -2.0), Vec::Constant(4, 2.0));
    };
    const Iterate li = random_iterate(lq_game, rng, lq_box, 0.3);
    const Partition lp = partition_constraints(lq_game, li.trajectory);
    record(suite, "linear game residual", residual_gradient_error(li, lp, rho, lq_game, eps));
    record(suite, "linear game jacobian", jacobian_fd_error(li, lp, rho, lq_game, eps));
  }
  return suite;
}

}  // namespace rd3g
