#include "rd3g/vehicles.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rd3g {

using namespace bicycle;

BicycleStep bicycle_step(const Vec& s, const Vec& u, double dt, double L) {
  const double v = s[kV], th = s[kTheta], steer = u[kSteer];
  const double c = std::cos(th), sn = std::sin(th), t = std::tan(steer);
  BicycleStep out;
  out.next = s;
  out.next[kX] += dt * v * c;
  out.next[kY] += dt * v * sn;
  out.next[kV] += dt * u[kAccel];
  out.next[kTheta] += dt * v / L * t;

  out.A = Mat::Identity(kStateDim, kStateDim);
  out.A(kX, kV) = dt * c;
  out.A(kX, kTheta) = -dt * v * sn;
  out.A(kY, kV) = dt * sn;
  out.A(kY, kTheta) = dt * v * c;
  out.A(kTheta, kV) = dt * t / L;

  const double cs = std::cos(steer);
  out.B = Mat::Zero(kStateDim, kControlDim);
  out.B(kV, kAccel) = dt;
  out.B(kTheta, kSteer) = dt * v / (L * cs * cs);
  return out;
}

// -- collision ---------------------------------------------------------------

DistanceConstraint::DistanceConstraint(double d_min, std::vector<int> idx)
    : d_min_(d_min), idx_(std::move(idx)) {
  if (!(d_min > 0.0)) throw ConfigError("d_min must be positive");
  if (idx_.empty()) throw ConfigError("distance constraint needs position indices");
}

double DistanceConstraint::value(const Vec& a, const Vec& b) const {
  double d2 = 0.0;
  for (int i : idx_) d2 += (a[i] - b[i]) * (a[i] - b[i]);
  return d_min_ * d_min_ - d2;
}

ConstraintDerivatives DistanceConstraint::derivatives(const Vec& a, const Vec& b) const {
  const auto n = a.size();
  ConstraintDerivatives d;
  d.value = value(a, b);
  d.first = Vec::Zero(n);
  d.second = Vec::Zero(n);
  d.first_first = Mat::Zero(n, n);
  d.first_second = Mat::Zero(n, n);
  d.second_second = Mat::Zero(n, n);
  for (int i : idx_) {
    const double diff = a[i] - b[i];
    d.first[i] = -2.0 * diff;
    d.second[i] = 2.0 * diff;
    d.first_first(i, i) = -2.0;
    d.second_second(i, i) = -2.0;
    d.first_second(i, i) = 2.0;
  }
  return d;
}

// -- bicycle agents ----------------------------------------------------------

Vec BicycleAgent::step(const Vec& x, const Vec& u) const {
  return bicycle_step(x, u, dt_, wheelbase_).next;
}

DynamicsJacobian BicycleAgent::step_jacobian(const Vec& x, const Vec& u) const {
  auto s = bicycle_step(x, u, dt_, wheelbase_);
  return {std::move(s.A), std::move(s.B)};
}

int BicycleAgent::remap(int old_index, const std::vector<int>& order) {
  const auto it = std::find(order.begin(), order.end(), old_index);
  if (it == order.end()) throw ConfigError("participant missing from re-index order");
  return static_cast<int>(it - order.begin());
}

MergeAgent::MergeAgent(int owner, double dt, double wheelbase, MergeCostWeights w)
    : BicycleAgent(owner, dt, wheelbase), w_(std::move(w)) {
  if ((w_.q_ref.array() < 0).any() || (w_.q_state.array() < 0).any())
    throw ConfigError("merge state weights must be non-negative");
  if (!(w_.r.array() > 0).all()) throw ConfigError("control weights must be positive");
}

double MergeAgent::state_part(const Vec& joint) const {
  const Eigen::Vector4d x = joint.segment<4>(owner_ * kStateDim);
  const Eigen::Vector4d e = x - w_.reference;
  return (w_.q_ref.array() * e.array().square()).sum() +
         (w_.q_state.array() * x.array().square()).sum();
}

Vec MergeAgent::state_gradient(const Vec& joint) const {
  Vec g = Vec::Zero(joint.size());
  const Eigen::Vector4d x = joint.segment<4>(owner_ * kStateDim);
  g.segment<4>(owner_ * kStateDim) =
      2.0 * (w_.q_ref.array() * (x - w_.reference).array() + w_.q_state.array() * x.array())
                .matrix();
  return g;
}

Mat MergeAgent::state_hessian(int dim) const {
  Mat h = Mat::Zero(dim, dim);
  h.block<4, 4>(owner_ * kStateDim, owner_ * kStateDim) =
      (2.0 * (w_.q_ref + w_.q_state)).asDiagonal();
  return h;
}

double MergeAgent::stage_cost(int, const Vec& joint, const Vec& u) const {
  return state_part(joint) + (w_.r.array() * u.array().square()).sum();
}

CostGradient MergeAgent::stage_cost_gradient(int k, const Vec& joint, const Vec& u) const {
  return {stage_cost(k, joint, u), state_gradient(joint),
          (2.0 * w_.r.array() * u.array()).matrix()};
}

CostHessian MergeAgent::stage_cost_hessian(int, const Vec& joint, const Vec&) const {
  const auto dim = static_cast<int>(joint.size());
  return {state_hessian(dim), Mat::Zero(dim, kControlDim),
          Mat((2.0 * w_.r).asDiagonal())};
}

double MergeAgent::terminal_cost(const Vec& joint) const {
  return w_.terminal_scale * state_part(joint);
}

CostGradient MergeAgent::terminal_cost_gradient(const Vec& joint) const {
  return {terminal_cost(joint), w_.terminal_scale * state_gradient(joint), Vec()};
}

CostHessian MergeAgent::terminal_cost_hessian(const Vec& joint) const {
  return {w_.terminal_scale * state_hessian(static_cast<int>(joint.size())), Mat(), Mat()};
}

std::shared_ptr<BicycleAgent> MergeAgent::reindexed(const std::vector<int>& order) const {
  return std::make_shared<MergeAgent>(remap(owner_, order), dt_, wheelbase_, w_);
}

// -- racing ------------------------------------------------------------------

RaceAgent::RaceAgent(int owner, int opponent, double dt, double wheelbase,
                     std::shared_ptr<const StadiumTrack> track, RaceCostWeights w)
    : BicycleAgent(owner, dt, wheelbase),
      opponent_(opponent),
      track_(std::move(track)),
      w_(std::move(w)) {
  if (!track_) throw ConfigError("race agent needs a track");
  if (owner == opponent) throw ConfigError("race opponent must differ from the owner");
  if (w_.q_lead < 0 || w_.q_lateral < 0 || w_.q_speed < 0 || w_.q_heading < 0)
    throw ConfigError("race weights must be non-negative");
  if (!(w_.r.array() > 0).all()) throw ConfigError("control weights must be positive");
}

double RaceAgent::state_part(const Vec& joint) const {
  const auto x = joint.segment<4>(owner_ * kStateDim);
  const auto o = joint.segment<4>(opponent_ * kStateDim);
  const auto f = track_->frame(x.head<2>());
  const double s_opp = track_->progress(o.head<2>());
  const double psi = wrap_angle(x[kTheta] - f.heading);
  const double dv = x[kV] - w_.target_speed;
  return w_.q_lead * track_->signed_gap(s_opp, f.s) + w_.q_lateral * f.lateral * f.lateral +
         w_.q_speed * dv * dv + w_.q_heading * psi * psi;
}

Vec RaceAgent::state_gradient(const Vec& joint) const {
  const int io = owner_ * kStateDim, jo = opponent_ * kStateDim;
  const auto x = joint.segment<4>(io);
  const auto f = track_->frame(x.head<2>());
  const auto fo = track_->frame(joint.segment<2>(jo));
  const double psi = wrap_angle(x[kTheta] - f.heading);
  Vec g = Vec::Zero(joint.size());
  g.segment<2>(io) = -w_.q_lead * f.ds + 2.0 * w_.q_lateral * f.lateral * f.dlateral -
                     2.0 * w_.q_heading * psi * f.dheading;
  g[io + kV] = 2.0 * w_.q_speed * (x[kV] - w_.target_speed);
  g[io + kTheta] = 2.0 * w_.q_heading * psi;
  g.segment<2>(jo) = w_.q_lead * fo.ds;
  return g;
}

Mat RaceAgent::state_hessian(const Vec& joint) const {
  const int io = owner_ * kStateDim, jo = opponent_ * kStateDim;
  const auto x = joint.segment<4>(io);
  const auto f = track_->frame(x.head<2>());
  const auto fo = track_->frame(joint.segment<2>(jo));
  const double psi = wrap_angle(x[kTheta] - f.heading);
  Mat h = Mat::Zero(joint.size(), joint.size());
  // psi = theta - heading(p): dpsi/dp = -dheading, d2psi/dp2 = -d2heading.
  h.block<2, 2>(io, io) =
      -w_.q_lead * f.d2s +
      2.0 * w_.q_lateral * (f.dlateral * f.dlateral.transpose() + f.lateral * f.d2lateral) +
      2.0 * w_.q_heading * (f.dheading * f.dheading.transpose() - psi * f.d2heading);
  h.block<2, 1>(io, io + kTheta) = -2.0 * w_.q_heading * f.dheading;
  h.block<1, 2>(io + kTheta, io) = -2.0 * w_.q_heading * f.dheading.transpose();
  h(io + kTheta, io + kTheta) = 2.0 * w_.q_heading;
  h(io + kV, io + kV) = 2.0 * w_.q_speed;
  h.block<2, 2>(jo, jo) = w_.q_lead * fo.d2s;
  return h;
}

double RaceAgent::stage_cost(int, const Vec& joint, const Vec& u) const {
  return state_part(joint) + (w_.r.array() * u.array().square()).sum();
}

CostGradient RaceAgent::stage_cost_gradient(int k, const Vec& joint, const Vec& u) const {
  return {stage_cost(k, joint, u), state_gradient(joint),
          (2.0 * w_.r.array() * u.array()).matrix()};
}

CostHessian RaceAgent::stage_cost_hessian(int, const Vec& joint, const Vec&) const {
  return {state_hessian(joint), Mat::Zero(joint.size(), kControlDim),
          Mat((2.0 * w_.r).asDiagonal())};
}

double RaceAgent::terminal_cost(const Vec& joint) const {
  return w_.terminal_scale * state_part(joint);
}

CostGradient RaceAgent::terminal_cost_gradient(const Vec& joint) const {
  return {terminal_cost(joint), w_.terminal_scale * state_gradient(joint), Vec()};
}

CostHessian RaceAgent::terminal_cost_hessian(const Vec& joint) const {
  return {w_.terminal_scale * state_hessian(joint), Mat(), Mat()};
}

std::shared_ptr<BicycleAgent> RaceAgent::reindexed(const std::vector<int>& order) const {
  return std::make_shared<RaceAgent>(remap(owner_, order), remap(opponent_, order), dt_,
                                     wheelbase_, track_, w_);
}

// -- interaction-ignorant MPC -----------------------------------------------

std::vector<Vec> constant_velocity_prediction(const AgentModel& model, const Vec& x0,
                                              int horizon) {
  std::vector<Vec> states{x0};
  const Vec u = Vec::Zero(model.control_dim());
  for (int k = 0; k < horizon; ++k) states.push_back(model.step(states.back(), u));
  return states;
}

namespace {

std::shared_ptr<const AgentModel> reindex_agent(const AgentModel& model,
                                                const std::vector<int>& order) {
  if (const auto* b = dynamic_cast<const BicycleAgent*>(&model)) return b->reindexed(order);
  if (const auto* lq = dynamic_cast<const LinearQuadraticAgent*>(&model)) {
    auto p = lq->params();
    const auto pos = [&](int old) {
      const auto it = std::find(order.begin(), order.end(), old);
      if (it == order.end()) throw ConfigError("participant missing from re-index order");
      return static_cast<int>(it - order.begin());
    };
    p.owner = pos(p.owner);
    if (p.coupled_with >= 0) p.coupled_with = pos(p.coupled_with);
    return std::make_shared<LinearQuadraticAgent>(std::move(p));
  }
  throw ConfigError("agent model cannot be re-indexed for single-agent planning");
}

}  // namespace

GameSpec mpc_game(int ego, const GameSpec& game) {
  game.validate();
  const int N = game.agent_count();
  const int P = game.participant_count();
  const int n = game.state_dim();
  if (ego < 0 || ego >= N) throw std::out_of_range("ego agent index out of range");

  std::vector<int> order{ego};
  for (int p = 0; p < P; ++p)
    if (p != ego) order.push_back(p);

  GameSpec r;
  r.horizon = game.horizon;
  r.step_dt = game.step_dt;
  r.constraint = game.constraint;
  r.initial_state = game.initial_state.segment(ego * n, n);
  r.agents.push_back(reindex_agent(*game.agents[ego], order));
  for (int p = 1; p < P; ++p) {
    const int old = order[p];
    if (old < N) {
      r.fixed_agents.push_back({constant_velocity_prediction(
          *game.agents[old], game.initial_state.segment(old * n, n), game.horizon)});
    } else {
      r.fixed_agents.push_back(game.fixed_agents[old - N]);
    }
  }
  return r;
}

MpcPlan naive_mpc_plan(int ego, const GameSpec& game, const SolverConfig& cfg,
                       const std::optional<Iterate>& warm) {
  MpcPlan plan;
  plan.reduced = mpc_game(ego, game);
  plan.result = solve(plan.reduced, cfg, warm);
  plan.trajectory = plan.result.solution.trajectory;
  return plan;
}

}  // namespace rd3g
