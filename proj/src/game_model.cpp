#include "rd3g/game_model.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

namespace rd3g {

RolloutDivergence::RolloutDivergence(int step, int agent)
    : Error([&] {
        std::ostringstream os;
        os << "rollout diverged: non-finite state at step " << step
           << " for agent " << agent;
        return os.str();
      }()),
      step_(step),
      agent_(agent) {}

int GameSpec::state_dim() const {
  return agents.empty() ? 0 : agents.front()->state_dim();
}

int GameSpec::control_dim() const {
  return agents.empty() ? 0 : agents.front()->control_dim();
}

void GameSpec::validate() const {
  if (agents.empty()) throw ConfigError("game needs at least one agent");
  if (horizon < 1) throw ConfigError("horizon must be >= 1");
  if (!(step_dt > 0.0)) throw ConfigError("step_dt must be positive");
  const int n = state_dim();
  const int m = control_dim();
  if (n < 1 || m < 1) throw ConfigError("state and control dims must be >= 1");
  for (const auto& a : agents) {
    if (!a) throw ConfigError("null agent model");
    if (a->state_dim() != n || a->control_dim() != m)
      throw ConfigError("agent models disagree on (n, m)");
  }
  if (initial_state.size() != agent_count() * n)
    throw ConfigError("initial state length must equal N*n");
  if (!initial_state.allFinite())
    throw ConfigError("initial state is not finite");
  for (const auto& f : fixed_agents) {
    if (static_cast<int>(f.states.size()) != horizon + 1)
      throw ConfigError("fixed agent prediction must hold T+1 states");
    for (const auto& s : f.states)
      if (s.size() != n) throw ConfigError("fixed agent state has wrong size");
  }
}

Trajectory::Trajectory(int agents, int horizon, int state_dim, int control_dim)
    : agents_(agents),
      horizon_(horizon),
      n_(state_dim),
      m_(control_dim),
      states_(Vec::Zero(agents * horizon * state_dim)),
      controls_(Vec::Zero(agents * horizon * control_dim)) {}

Trajectory Trajectory::zeros_like(const GameSpec& spec) {
  return Trajectory(spec.agent_count(), spec.horizon, spec.state_dim(),
                    spec.control_dim());
}

bool Trajectory::all_finite() const {
  return states_.allFinite() && controls_.allFinite();
}

Iterate Iterate::zeros_like(const GameSpec& spec) {
  Iterate it;
  it.trajectory = Trajectory::zeros_like(spec);
  it.costates = Vec::Zero(spec.agent_count() * spec.horizon * spec.state_dim());
  return it;
}

Vec agent_state(const GameSpec& spec, const Trajectory& traj, int i, int k) {
  const int n = spec.state_dim();
  if (k == 0) return spec.initial_state.segment(i * n, n);
  return traj.state(i, k);
}

Vec participant_state(const GameSpec& spec, const Trajectory& traj, int p,
                      int k) {
  if (p < spec.agent_count()) return agent_state(spec, traj, p, k);
  return spec.fixed_agents[p - spec.agent_count()].states[k];
}

Vec joint_state(const GameSpec& spec, const Trajectory& traj, int k) {
  const int n = spec.state_dim();
  const int participants = spec.participant_count();
  Vec joint(participants * n);
  for (int p = 0; p < participants; ++p)
    joint.segment(p * n, n) = participant_state(spec, traj, p, k);
  return joint;
}

void rollout_agent(const GameSpec& spec, Trajectory& traj, int i) {
  const auto& model = *spec.agents[i];
  Vec x = agent_state(spec, traj, i, 0);
  for (int k = 0; k < spec.horizon; ++k) {
    x = model.step(x, traj.control(i, k));
    if (!x.allFinite()) throw RolloutDivergence(k + 1, i);
    traj.state(i, k + 1) = x;
  }
}

void rollout(const GameSpec& spec, Trajectory& traj) {
  if (!traj.controls().allFinite())
    throw Error("rollout requires finite controls");
  for (int i = 0; i < spec.agent_count(); ++i) rollout_agent(spec, traj, i);
}

double agent_cost(const GameSpec& spec, const Trajectory& traj, int i) {
  const auto& model = *spec.agents[i];
  double total = 0.0;
  for (int k = 0; k < spec.horizon; ++k)
    total += model.stage_cost(k, joint_state(spec, traj, k), traj.control(i, k));
  total += model.terminal_cost(joint_state(spec, traj, spec.horizon));
  return total;
}

// -- derivative checking ----------------------------------------------------

double relative_error(const Mat& analytic, const Mat& reference) {
  if (analytic.size() == 0 && reference.size() == 0) return 0.0;
  const double a = analytic.cwiseAbs().maxCoeff();
  const double r = reference.cwiseAbs().maxCoeff();
  const double diff = (analytic - reference).cwiseAbs().maxCoeff();
  return diff / std::max({a, r, 1.0});
}

double DerivativeReport::max_error() const {
  double e = 0.0;
  for (const auto& b : blocks) e = std::max(e, b.error);
  return e;
}

void DerivativeReport::merge(const DerivativeReport& other,
                             const std::string& prefix) {
  for (const auto& b : other.blocks)
    blocks.push_back({prefix + b.block, b.error});
}

namespace {

void check_eps(double eps) {
  if (!(eps >= 1e-8 && eps <= 1e-4))
    throw std::invalid_argument("finite-difference eps must be in [1e-8, 1e-4]");
}

// Central-difference Jacobian of a vector function.
Mat fd_jacobian(const std::function<Vec(const Vec&)>& f, const Vec& at,
                double eps) {
  const Vec f0 = f(at);
  Mat jac(f0.size(), at.size());
  Vec p = at;
  for (int c = 0; c < at.size(); ++c) {
    const double h = eps * std::max(1.0, std::abs(at[c]));
    p[c] = at[c] + h;
    const Vec fp = f(p);
    p[c] = at[c] - h;
    const Vec fm = f(p);
    p[c] = at[c];
    jac.col(c) = (fp - fm) / (2.0 * h);
  }
  return jac;
}

Vec fd_gradient(const std::function<double(const Vec&)>& f, const Vec& at,
                double eps) {
  Mat j = fd_jacobian([&](const Vec& p) { return Vec::Constant(1, f(p)); }, at,
                      eps);
  return j.row(0).transpose();
}

double symmetry_error(const Mat& m) { return relative_error(m, m.transpose()); }

}  // namespace

DerivativeReport check_dynamics(const AgentModel& model, const Vec& x,
                                const Vec& u, double eps) {
  check_eps(eps);
  DerivativeReport rep;
  const DynamicsJacobian jac = model.step_jacobian(x, u);
  const Mat fx =
      fd_jacobian([&](const Vec& p) { return model.step(p, u); }, x, eps);
  const Mat fu =
      fd_jacobian([&](const Vec& p) { return model.step(x, p); }, u, eps);
  rep.blocks.push_back({"df/dx", relative_error(jac.state, fx)});
  rep.blocks.push_back({"df/du", relative_error(jac.control, fu)});
  return rep;
}

DerivativeReport check_stage_cost(const AgentModel& model, int k,
                                  const Vec& joint, const Vec& u, double eps) {
  check_eps(eps);
  DerivativeReport rep;
  const CostGradient g = model.stage_cost_gradient(k, joint, u);
  const CostHessian h = model.stage_cost_hessian(k, joint, u);
  rep.blocks.push_back(
      {"J value", relative_error(Vec::Constant(1, g.value),
                                 Vec::Constant(1, model.stage_cost(k, joint, u)))});
  rep.blocks.push_back(
      {"dJ/dx", relative_error(g.state,
                               fd_gradient([&](const Vec& p) {
                                 return model.stage_cost(k, p, u);
                               }, joint, eps))});
  rep.blocks.push_back(
      {"dJ/du", relative_error(g.control,
                               fd_gradient([&](const Vec& p) {
                                 return model.stage_cost(k, joint, p);
                               }, u, eps))});
  const Mat hxx = fd_jacobian(
      [&](const Vec& p) { return model.stage_cost_gradient(k, p, u).state; },
      joint, eps);
  const Mat hxu = fd_jacobian(
      [&](const Vec& p) { return model.stage_cost_gradient(k, joint, p).state; },
      u, eps);
  const Mat huu = fd_jacobian(
      [&](const Vec& p) { return model.stage_cost_gradient(k, joint, p).control; },
      u, eps);
  rep.blocks.push_back({"d2J/dxdx", relative_error(h.state_state, hxx)});
  rep.blocks.push_back({"d2J/dxdu", relative_error(h.state_control, hxu)});
  rep.blocks.push_back({"d2J/dudu", relative_error(h.control_control, huu)});
  rep.blocks.push_back({"d2J/dxdx symmetry", symmetry_error(h.state_state)});
  rep.blocks.push_back({"d2J/dudu symmetry", symmetry_error(h.control_control)});
  return rep;
}

DerivativeReport check_terminal_cost(const AgentModel& model, const Vec& joint,
                                     double eps) {
  check_eps(eps);
  DerivativeReport rep;
  const CostGradient g = model.terminal_cost_gradient(joint);
  const CostHessian h = model.terminal_cost_hessian(joint);
  rep.blocks.push_back(
      {"phi value", relative_error(Vec::Constant(1, g.value),
                                   Vec::Constant(1, model.terminal_cost(joint)))});
  rep.blocks.push_back(
      {"dphi/dx",
       relative_error(g.state, fd_gradient([&](const Vec& p) {
                        return model.terminal_cost(p);
                      }, joint, eps))});
  const Mat hxx = fd_jacobian(
      [&](const Vec& p) { return model.terminal_cost_gradient(p).state; },
      joint, eps);
  rep.blocks.push_back({"d2phi/dxdx", relative_error(h.state_state, hxx)});
  rep.blocks.push_back({"d2phi/dxdx symmetry", symmetry_error(h.state_state)});
  return rep;
}

DerivativeReport check_constraint(const ConstraintModel& model, const Vec& a,
                                  const Vec& b, double eps) {
  check_eps(eps);
  DerivativeReport rep;
  const ConstraintDerivatives d = model.derivatives(a, b);
  rep.blocks.push_back(
      {"h value", relative_error(Vec::Constant(1, d.value),
                                 Vec::Constant(1, model.value(a, b)))});
  rep.blocks.push_back(
      {"dh/da", relative_error(d.first, fd_gradient([&](const Vec& p) {
                                 return model.value(p, b);
                               }, a, eps))});
  rep.blocks.push_back(
      {"dh/db", relative_error(d.second, fd_gradient([&](const Vec& p) {
                                 return model.value(a, p);
                               }, b, eps))});
  const Mat haa = fd_jacobian(
      [&](const Vec& p) { return model.derivatives(p, b).first; }, a, eps);
  const Mat hab = fd_jacobian(
      [&](const Vec& p) { return model.derivatives(a, p).first; }, b, eps);
  const Mat hbb = fd_jacobian(
      [&](const Vec& p) { return model.derivatives(a, p).second; }, b, eps);
  rep.blocks.push_back({"d2h/dada", relative_error(d.first_first, haa)});
  rep.blocks.push_back({"d2h/dadb", relative_error(d.first_second, hab)});
  rep.blocks.push_back({"d2h/dbdb", relative_error(d.second_second, hbb)});
  rep.blocks.push_back({"d2h/dada symmetry", symmetry_error(d.first_first)});
  rep.blocks.push_back({"d2h/dbdb symmetry", symmetry_error(d.second_second)});
  return rep;
}

DerivativeReport check_derivatives(const AgentModel& model, int k,
                                   const Vec& joint, const Vec& x,
                                   const Vec& u, double eps) {
  DerivativeReport rep;
  rep.merge(check_dynamics(model, x, u, eps));
  rep.merge(check_stage_cost(model, k, joint, u, eps));
  rep.merge(check_terminal_cost(model, joint, eps));
  return rep;
}

DerivativeReport check_derivatives(const ConstraintModel& model, const Vec& a,
                                   const Vec& b, double eps) {
  return check_constraint(model, a, b, eps);
}

// -- LinearQuadraticAgent ---------------------------------------------------

LinearQuadraticAgent::LinearQuadraticAgent(Params params) : p_(std::move(params)) {
  const auto n = p_.A.rows();
  if (p_.A.cols() != n || p_.B.rows() != n || p_.Q.rows() != n ||
      p_.Qf.rows() != n || p_.R.rows() != p_.B.cols() ||
      p_.reference.size() != n)
    throw ConfigError("LinearQuadraticAgent: inconsistent dimensions");
  if (p_.coupled_with >= 0 && p_.coupling_selector.cols() != n)
    throw ConfigError("LinearQuadraticAgent: coupling selector width != n");
}

Vec LinearQuadraticAgent::step(const Vec& x, const Vec& u) const {
  return p_.A * x + p_.B * u;
}

DynamicsJacobian LinearQuadraticAgent::step_jacobian(const Vec&,
                                                     const Vec&) const {
  return {p_.A, p_.B};
}

double LinearQuadraticAgent::state_cost(const Vec& joint,
                                        const Mat& weight) const {
  const int n = state_dim();
  const Vec e = joint.segment(p_.owner * n, n) - p_.reference;
  double c = e.dot(weight * e);
  if (p_.coupled_with >= 0) {
    const Vec d = p_.coupling_selector *
                  (joint.segment(p_.owner * n, n) -
                   joint.segment(p_.coupled_with * n, n));
    c += p_.coupling_weight * d.squaredNorm();
  }
  return c;
}

void LinearQuadraticAgent::add_state_gradient(const Vec& joint,
                                              const Mat& weight,
                                              Vec& grad) const {
  const int n = state_dim();
  const Vec e = joint.segment(p_.owner * n, n) - p_.reference;
  grad.segment(p_.owner * n, n) += (weight + weight.transpose()) * e;
  if (p_.coupled_with >= 0) {
    const Mat& S = p_.coupling_selector;
    const Vec g = 2.0 * p_.coupling_weight * S.transpose() * S *
                  (joint.segment(p_.owner * n, n) -
                   joint.segment(p_.coupled_with * n, n));
    grad.segment(p_.owner * n, n) += g;
    grad.segment(p_.coupled_with * n, n) -= g;
  }
}

void LinearQuadraticAgent::add_state_hessian(int, const Mat& weight,
                                             Mat& hess) const {
  const int n = state_dim();
  const int o = p_.owner * n;
  hess.block(o, o, n, n) += weight + weight.transpose();
  if (p_.coupled_with >= 0) {
    const Mat& S = p_.coupling_selector;
    const Mat W = 2.0 * p_.coupling_weight * S.transpose() * S;
    const int c = p_.coupled_with * n;
    hess.block(o, o, n, n) += W;
    hess.block(c, c, n, n) += W;
    hess.block(o, c, n, n) -= W;
    hess.block(c, o, n, n) -= W;
  }
}

double LinearQuadraticAgent::stage_cost(int, const Vec& joint,
                                        const Vec& u) const {
  return state_cost(joint, p_.Q) + u.dot(p_.R * u);
}

CostGradient LinearQuadraticAgent::stage_cost_gradient(int k, const Vec& joint,
                                                       const Vec& u) const {
  CostGradient g;
  g.value = stage_cost(k, joint, u);
  g.state = Vec::Zero(joint.size());
  add_state_gradient(joint, p_.Q, g.state);
  g.control = (p_.R + p_.R.transpose()) * u;
  return g;
}

CostHessian LinearQuadraticAgent::stage_cost_hessian(int, const Vec& joint,
                                                     const Vec& u) const {
  CostHessian h;
  const auto d = joint.size();
  h.state_state = Mat::Zero(d, d);
  add_state_hessian(static_cast<int>(d), p_.Q, h.state_state);
  h.state_control = Mat::Zero(d, u.size());
  h.control_control = p_.R + p_.R.transpose();
  return h;
}

double LinearQuadraticAgent::terminal_cost(const Vec& joint) const {
  return state_cost(joint, p_.Qf);
}

CostGradient LinearQuadraticAgent::terminal_cost_gradient(const Vec& joint) const {
  CostGradient g;
  g.value = terminal_cost(joint);
  g.state = Vec::Zero(joint.size());
  add_state_gradient(joint, p_.Qf, g.state);
  return g;
}

CostHessian LinearQuadraticAgent::terminal_cost_hessian(const Vec& joint) const {
  CostHessian h;
  const auto d = joint.size();
  h.state_state = Mat::Zero(d, d);
  add_state_hessian(static_cast<int>(d), p_.Qf, h.state_state);
  h.state_control = Mat::Zero(d, 0);
  h.control_control = Mat::Zero(0, 0);
  return h;
}

}  // namespace rd3g
