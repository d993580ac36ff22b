#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "rd3g/game_model.hpp"
#include "rd3g/solver.hpp"
#include "rd3g/track.hpp"

namespace rd3g {

/// Kinematic bicycle, forward-Euler discretized.
///   state   [x, y, v, theta]
///   control [accel, steer]
///   x' = v cos(theta), y' = v sin(theta), v' = accel,
///   theta' = v / wheelbase * tan(steer)
struct BicycleStep {
  Vec next;
  Mat A;  // n x n
  Mat B;  // n x m
};
BicycleStep bicycle_step(const Vec& state, const Vec& control, double dt,
                         double wheelbase);

namespace bicycle {
constexpr int kX = 0, kY = 1, kV = 2, kTheta = 3;
constexpr int kAccel = 0, kSteer = 1;
constexpr int kStateDim = 4, kControlDim = 2;
}  // namespace bicycle

/// Squared-distance collision constraint on selected position components:
///   h(a, b) = d_min^2 - |P (a - b)|^2.
class DistanceConstraint : public ConstraintModel {
 public:
  DistanceConstraint(double d_min, std::vector<int> position_indices = {0, 1});
  double value(const Vec& a, const Vec& b) const override;
  ConstraintDerivatives derivatives(const Vec& a, const Vec& b) const override;
  double d_min() const { return d_min_; }

 private:
  double d_min_;
  std::vector<int> idx_;
};

/// Diagonal weights for the tracking cost
///   J_k = (x - x_ref)' Qr (x - x_ref) + x' Q x + u' R u,
/// phi = terminal_scale * ((x - x_ref)' Qr (x - x_ref) + x' Q x).
struct MergeCostWeights {
  Eigen::Vector4d q_ref{0.0, 0.05, 0.5, 0.0};  // lateral position and speed
  Eigen::Vector4d q_state{0.0, 0.0, 0.0, 2.0};  // heading
  Eigen::Vector2d r{1.0, 2.0};
  double terminal_scale = 1.0;
  Eigen::Vector4d reference{0.0, 0.0, 0.0, 0.0};  // x_ref (lane center, target speed)
};

/// Common bicycle-dynamics plumbing for the shipped vehicle agents.
class BicycleAgent : public AgentModel {
 public:
  BicycleAgent(int owner, double dt, double wheelbase)
      : owner_(owner), dt_(dt), wheelbase_(wheelbase) {}
  int state_dim() const override { return bicycle::kStateDim; }
  int control_dim() const override { return bicycle::kControlDim; }
  Vec step(const Vec& x, const Vec& u) const override;
  DynamicsJacobian step_jacobian(const Vec& x, const Vec& u) const override;

  int owner() const { return owner_; }
  double dt() const { return dt_; }
  double wheelbase() const { return wheelbase_; }

  /// Copy whose participant indices are remapped: participant order[p] of the
  /// old numbering becomes participant p.
  virtual std::shared_ptr<BicycleAgent> reindexed(const std::vector<int>& order) const = 0;

 protected:
  static int remap(int old_index, const std::vector<int>& order);
  int owner_;
  double dt_;
  double wheelbase_;
};

class MergeAgent : public BicycleAgent {
 public:
  MergeAgent(int owner, double dt, double wheelbase, MergeCostWeights weights);

  double stage_cost(int k, const Vec& joint, const Vec& u) const override;
  CostGradient stage_cost_gradient(int k, const Vec& joint, const Vec& u) const override;
  CostHessian stage_cost_hessian(int k, const Vec& joint, const Vec& u) const override;
  double terminal_cost(const Vec& joint) const override;
  CostGradient terminal_cost_gradient(const Vec& joint) const override;
  CostHessian terminal_cost_hessian(const Vec& joint) const override;
  std::shared_ptr<BicycleAgent> reindexed(const std::vector<int>& order) const override;

  const MergeCostWeights& weights() const { return w_; }

 private:
  double state_part(const Vec& joint) const;
  Vec state_gradient(const Vec& joint) const;
  Mat state_hessian(int joint_dim) const;
  MergeCostWeights w_;
};

/// Track-frame racing cost
///   J_k = q_lead * gap(s_opp, s_own) + q_lateral e^2 + q_speed (v - v_ref)^2
///         + q_heading psi^2 + u' R u,
/// with s the nearest-centerline arc length, e the lateral offset, psi the
/// heading error, and gap the signed shorter arc.
struct RaceCostWeights {
  double q_lead = 0.1;
  double q_lateral = 0.05;
  double q_speed = 0.5;
  double q_heading = 2.0;
  Eigen::Vector2d r{1.0, 2.0};
  double target_speed = 5.0;
  double terminal_scale = 1.0;
};

class RaceAgent : public BicycleAgent {
 public:
  RaceAgent(int owner, int opponent, double dt, double wheelbase,
            std::shared_ptr<const StadiumTrack> track, RaceCostWeights weights);

  double stage_cost(int k, const Vec& joint, const Vec& u) const override;
  CostGradient stage_cost_gradient(int k, const Vec& joint, const Vec& u) const override;
  CostHessian stage_cost_hessian(int k, const Vec& joint, const Vec& u) const override;
  double terminal_cost(const Vec& joint) const override;
  CostGradient terminal_cost_gradient(const Vec& joint) const override;
  CostHessian terminal_cost_hessian(const Vec& joint) const override;
  std::shared_ptr<BicycleAgent> reindexed(const std::vector<int>& order) const override;

  int opponent() const { return opponent_; }
  const RaceCostWeights& weights() const { return w_; }
  const StadiumTrack& track() const { return *track_; }

 private:
  double state_part(const Vec& joint) const;
  Vec state_gradient(const Vec& joint) const;
  Mat state_hessian(const Vec& joint) const;
  int opponent_;
  std::shared_ptr<const StadiumTrack> track_;
  RaceCostWeights w_;
};

/// Zero-control prediction of a bicycle agent from x0 (T+1 states).
std::vector<Vec> constant_velocity_prediction(const AgentModel& model,
                                              const Vec& x0, int horizon);

struct MpcPlan {
  Trajectory trajectory;  // single-agent trajectory (agent 0 is the ego)
  SolveResult result;
  GameSpec reduced;       // the single-agent problem that was solved
};

/// The ego's single-agent problem: the ego becomes participant 0, other
/// decision agents become fixed zero-control predictions from their current
/// states, existing fixed agents follow.
GameSpec mpc_game(int ego, const GameSpec& game);

/// Interaction-ignorant MPC: every other participant is predicted by a
/// zero-control rollout and frozen; the ego alone is solved with the same
/// residual-descent machinery. `game.initial_state` is the current state.
/// Agent models must derive from BicycleAgent or LinearQuadraticAgent so
/// they can be re-indexed.
MpcPlan naive_mpc_plan(int ego, const GameSpec& game, const SolverConfig& cfg,
                       const std::optional<Iterate>& warm = std::nullopt);

}  // namespace rd3g
