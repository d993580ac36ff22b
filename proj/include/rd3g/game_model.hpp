#pragma once

#include <compare>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace rd3g {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A forward simulation produced a non-finite state.
class RolloutDivergence : public Error {
 public:
  RolloutDivergence(int step, int agent);
  int step() const { return step_; }
  int agent() const { return agent_; }

 private:
  int step_;
  int agent_;
};

/// A log barrier was evaluated at h >= 0.
class BarrierDomainError : public Error {
 public:
  using Error::Error;
};

class AssemblyError : public Error {
 public:
  using Error::Error;
};

class LinearSolveError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

struct DynamicsJacobian {
  Mat state;    // df/dx, n x n
  Mat control;  // df/du, n x m
};

/// Value and gradient of a cost term. `state` is taken with respect to the
/// joint state of every participant at one step (length P*n, participant
/// blocks in order); `control` with respect to the owner's control (length m,
/// empty for terminal costs).
struct CostGradient {
  double value = 0.0;
  Vec state;
  Vec control;
};

struct CostHessian {
  Mat state_state;      // P*n x P*n
  Mat state_control;    // P*n x m
  Mat control_control;  // m x m
};

/// One player's dynamics and costs. Step k's cost J_k may read the joint
/// state of all participants but only the owner's control.
class AgentModel {
 public:
  virtual ~AgentModel() = default;

  virtual int state_dim() const = 0;
  virtual int control_dim() const = 0;

  virtual Vec step(const Vec& x, const Vec& u) const = 0;
  virtual DynamicsJacobian step_jacobian(const Vec& x, const Vec& u) const = 0;

  virtual double stage_cost(int k, const Vec& joint, const Vec& u) const = 0;
  virtual CostGradient stage_cost_gradient(int k, const Vec& joint,
                                           const Vec& u) const = 0;
  virtual CostHessian stage_cost_hessian(int k, const Vec& joint,
                                         const Vec& u) const = 0;

  virtual double terminal_cost(const Vec& joint) const = 0;
  virtual CostGradient terminal_cost_gradient(const Vec& joint) const = 0;
  virtual CostHessian terminal_cost_hessian(const Vec& joint) const = 0;
};

struct ConstraintDerivatives {
  double value = 0.0;
  Vec first;   // dh/da
  Vec second;  // dh/db
  Mat first_first;
  Mat first_second;
  Mat second_second;
};

/// Pairwise interaction constraint h(a, b) <= 0, symmetric in its arguments.
class ConstraintModel {
 public:
  virtual ~ConstraintModel() = default;
  virtual double value(const Vec& a, const Vec& b) const = 0;
  virtual ConstraintDerivatives derivatives(const Vec& a,
                                            const Vec& b) const = 0;
};

/// A non-deciding participant whose states are a frozen prediction.
struct FixedAgent {
  std::vector<Vec> states;  // k = 0..T
};

/// The full game. Decision agents come first in every joint-state vector,
/// followed by fixed agents.
struct GameSpec {
  int horizon = 0;
  double step_dt = 0.1;
  std::vector<std::shared_ptr<const AgentModel>> agents;
  std::shared_ptr<const ConstraintModel> constraint;  // may be null
  Vec initial_state;                                  // N*n
  std::vector<FixedAgent> fixed_agents;

  int agent_count() const { return static_cast<int>(agents.size()); }
  int participant_count() const {
    return agent_count() + static_cast<int>(fixed_agents.size());
  }
  int state_dim() const;
  int control_dim() const;

  /// Throws ConfigError when any structural invariant is broken.
  void validate() const;
};

/// States x_k^i for k in [1..T] and controls u_k^i for k in [0..T-1], stored
/// agent-major.
class Trajectory {
 public:
  Trajectory() = default;
  Trajectory(int agents, int horizon, int state_dim, int control_dim);
  static Trajectory zeros_like(const GameSpec& spec);

  int agents() const { return agents_; }
  int horizon() const { return horizon_; }
  int state_dim() const { return n_; }
  int control_dim() const { return m_; }

  /// k in [1..T]
  auto state(int i, int k) { return states_.segment(state_offset(i, k), n_); }
  auto state(int i, int k) const {
    return states_.segment(state_offset(i, k), n_);
  }
  /// k in [0..T-1]
  auto control(int i, int k) {
    return controls_.segment(control_offset(i, k), m_);
  }
  auto control(int i, int k) const {
    return controls_.segment(control_offset(i, k), m_);
  }

  Vec& states() { return states_; }
  const Vec& states() const { return states_; }
  Vec& controls() { return controls_; }
  const Vec& controls() const { return controls_; }

  bool all_finite() const;

 private:
  int state_offset(int i, int k) const { return (i * horizon_ + k - 1) * n_; }
  int control_offset(int i, int k) const { return (i * horizon_ + k) * m_; }

  int agents_ = 0;
  int horizon_ = 0;
  int n_ = 0;
  int m_ = 0;
  Vec states_;
  Vec controls_;
};

/// Ordered (i, j, k) constraint index; sorts by agent, then step, then other.
struct ConstraintTriplet {
  int agent = 0;
  int step = 0;
  int other = 0;
  auto operator<=>(const ConstraintTriplet&) const = default;
};

using DualMap = std::map<ConstraintTriplet, double>;

/// Primal-dual point y = (x, u, lambda, mu+).
struct Iterate {
  Trajectory trajectory;
  Vec costates;  // lambda_k^i for k in [0..T-1], agent-major
  DualMap duals;

  static Iterate zeros_like(const GameSpec& spec);

  auto costate(int i, int k) {
    const int n = trajectory.state_dim();
    return costates.segment((i * trajectory.horizon() + k) * n, n);
  }
  auto costate(int i, int k) const {
    const int n = trajectory.state_dim();
    return costates.segment((i * trajectory.horizon() + k) * n, n);
  }
};

/// State of agent i at step k (k = 0 reads the initial state).
Vec agent_state(const GameSpec& spec, const Trajectory& traj, int i, int k);

/// Participant p's state at step k, including fixed agents.
Vec participant_state(const GameSpec& spec, const Trajectory& traj, int p,
                      int k);

/// Concatenated states of every participant at step k.
Vec joint_state(const GameSpec& spec, const Trajectory& traj, int k);

/// Recomputes every agent's states from its controls.
void rollout(const GameSpec& spec, Trajectory& traj);

/// Recomputes only agent i's states, leaving the others untouched.
void rollout_agent(const GameSpec& spec, Trajectory& traj, int i);

/// J^i(x, u^i) = sum_k J_k^i + phi^i(x_T).
double agent_cost(const GameSpec& spec, const Trajectory& traj, int i);

// -- derivative checking ----------------------------------------------------

struct DerivativeBlockError {
  std::string block;
  double error = 0.0;
};

/// Per-block max relative error ||analytic - fd||_inf / max(||analytic||_inf,
/// ||fd||_inf, 1) against central differences.
struct DerivativeReport {
  std::vector<DerivativeBlockError> blocks;
  double max_error() const;
  void merge(const DerivativeReport& other, const std::string& prefix = "");
};

DerivativeReport check_dynamics(const AgentModel& model, const Vec& x,
                                const Vec& u, double eps = 1e-6);
DerivativeReport check_stage_cost(const AgentModel& model, int k,
                                  const Vec& joint, const Vec& u,
                                  double eps = 1e-6);
DerivativeReport check_terminal_cost(const AgentModel& model, const Vec& joint,
                                     double eps = 1e-6);
DerivativeReport check_constraint(const ConstraintModel& model, const Vec& a,
                                  const Vec& b, double eps = 1e-6);

/// Dynamics, stage cost and terminal cost checks at one point.
DerivativeReport check_derivatives(const AgentModel& model, int k,
                                   const Vec& joint, const Vec& x,
                                   const Vec& u, double eps = 1e-6);
DerivativeReport check_derivatives(const ConstraintModel& model, const Vec& a,
                                   const Vec& b, double eps = 1e-6);

double relative_error(const Mat& analytic, const Mat& reference);

// -- linear-quadratic reference model ---------------------------------------

/// Linear dynamics with quadratic tracking cost and an optional quadratic
/// attraction to another participant:
///   x+ = A x + B u
///   J_k = (x - r)' Q (x - r) + u' R u + w |S (x - x_o)|^2
///   phi = (x - r)' Qf (x - r) + w |S (x - x_o)|^2
class LinearQuadraticAgent : public AgentModel {
 public:
  struct Params {
    Mat A, B, Q, R, Qf;
    Vec reference;
    int owner = 0;
    int coupled_with = -1;  // participant index, -1 for none
    double coupling_weight = 0.0;
    Mat coupling_selector;  // rows select compared components
  };

  explicit LinearQuadraticAgent(Params params);

  int state_dim() const override { return static_cast<int>(p_.A.rows()); }
  int control_dim() const override { return static_cast<int>(p_.B.cols()); }

  Vec step(const Vec& x, const Vec& u) const override;
  DynamicsJacobian step_jacobian(const Vec& x, const Vec& u) const override;

  double stage_cost(int k, const Vec& joint, const Vec& u) const override;
  CostGradient stage_cost_gradient(int k, const Vec& joint,
                                   const Vec& u) const override;
  CostHessian stage_cost_hessian(int k, const Vec& joint,
                                 const Vec& u) const override;

  double terminal_cost(const Vec& joint) const override;
  CostGradient terminal_cost_gradient(const Vec& joint) const override;
  CostHessian terminal_cost_hessian(const Vec& joint) const override;

  const Params& params() const { return p_; }

 private:
  double state_cost(const Vec& joint, const Mat& weight) const;
  void add_state_gradient(const Vec& joint, const Mat& weight,
                          Vec& grad) const;
  void add_state_hessian(int joint_dim, const Mat& weight, Mat& hess) const;

  Params p_;
};

}  // namespace rd3g
