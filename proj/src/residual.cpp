#include "rd3g/residual.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace rd3g {

double barrier(double h, double rho) {
  if (!(h < 0.0)) {
    std::ostringstream os;
    os << "barrier evaluated outside its domain (h = " << h << ")";
    throw BarrierDomainError(os.str());
  }
  return -rho * std::log(-h);
}

BarrierDerivatives barrier_chain(double h, const Vec& dh, const Mat& d2h,
                                 double rho) {
  if (!(h < 0.0)) throw BarrierDomainError("barrier derivative at h >= 0");
  const double s1 = -rho / h;
  const double s2 = rho / (h * h);
  return {s1 * dh, s1 * d2h + s2 * dh * dh.transpose()};
}

// -- layout -------------------------------------------------------------------

KktLayout::KktLayout(const GameSpec& spec, const Partition& partition)
    : agents_(spec.agent_count()),
      horizon_(spec.horizon),
      n_(spec.state_dim()),
      m_(spec.control_dim()),
      block_(2 * spec.horizon * spec.state_dim() +
             spec.horizon * spec.control_dim()),
      active_(partition.active_triplets()) {
  if (partition.agents() != agents_ || partition.horizon() != horizon_)
    throw AssemblyError("partition dimensions do not match the game");
  row_offset_.resize(agents_);
  active_offset_.resize(agents_ + 1);
  int row = 0;
  int act = 0;
  for (int i = 0; i < agents_; ++i) {
    row_offset_[i] = row;
    active_offset_[i] = act;
    const int c = partition.active_count(i);
    row += block_ + c;
    act += c;
  }
  active_offset_[agents_] = act;
  rows_ = row;
  cols_ = agents_ * block_ + act;
}

int KktLayout::active_index(const ConstraintTriplet& t) const {
  const auto it = std::lower_bound(active_.begin(), active_.end(), t);
  if (it == active_.end() || *it != t)
    throw AssemblyError("triplet is not in the active set");
  return static_cast<int>(it - active_.begin());
}

std::vector<RowTag> KktLayout::row_tags() const {
  std::vector<RowTag> tags(rows_);
  for (int i = 0; i < agents_; ++i) {
    for (int k = 1; k <= horizon_; ++k)
      for (int c = 0; c < n_; ++c)
        tags[stationarity_state_row(i, k) + c] = {RowKind::StationarityState, i, k, c};
    for (int k = 0; k < horizon_; ++k) {
      for (int c = 0; c < m_; ++c)
        tags[stationarity_control_row(i, k) + c] = {RowKind::StationarityControl, i, k, c};
      for (int c = 0; c < n_; ++c)
        tags[dynamics_row(i, k) + c] = {RowKind::Dynamics, i, k, c};
    }
  }
  for (const auto& t : active_)
    tags[constraint_row(t)] = {RowKind::ActiveConstraint, t.agent, t.step, t.other};
  return tags;
}

std::vector<ColumnTag> KktLayout::column_tags() const {
  std::vector<ColumnTag> tags(cols_);
  for (int i = 0; i < agents_; ++i) {
    for (int k = 1; k <= horizon_; ++k)
      for (int c = 0; c < n_; ++c)
        tags[state_col(i, k) + c] = {ColumnKind::State, i, k, c};
    for (int k = 0; k < horizon_; ++k) {
      for (int c = 0; c < m_; ++c)
        tags[control_col(i, k) + c] = {ColumnKind::Control, i, k, c};
      for (int c = 0; c < n_; ++c)
        tags[costate_col(i, k) + c] = {ColumnKind::Costate, i, k, c};
    }
  }
  for (const auto& t : active_)
    tags[dual_col(t)] = {ColumnKind::Dual, t.agent, t.step, t.other};
  return tags;
}

Vec pack_iterate(const Iterate& iterate, const KktLayout& layout) {
  Vec y(layout.cols());
  const auto& traj = iterate.trajectory;
  const int n = layout.state_dim();
  const int m = layout.control_dim();
  for (int i = 0; i < layout.agents(); ++i)
    for (int k = 0; k < layout.horizon(); ++k) {
      y.segment(layout.state_col(i, k + 1), n) = traj.state(i, k + 1);
      y.segment(layout.control_col(i, k), m) = traj.control(i, k);
      y.segment(layout.costate_col(i, k), n) = iterate.costate(i, k);
    }
  for (const auto& t : layout.active()) {
    const auto it = iterate.duals.find(t);
    y[layout.dual_col(t)] = it == iterate.duals.end() ? 0.0 : it->second;
  }
  return y;
}

Iterate step_iterate(const Iterate& iterate, const Vec& dy, double t,
                     const KktLayout& layout) {
  if (dy.size() != layout.cols())
    throw AssemblyError("step length does not match the layout");
  Iterate out = iterate;
  auto& traj = out.trajectory;
  const int n = layout.state_dim();
  const int m = layout.control_dim();
  for (int i = 0; i < layout.agents(); ++i)
    for (int k = 0; k < layout.horizon(); ++k) {
      traj.state(i, k + 1) += t * dy.segment(layout.state_col(i, k + 1), n);
      traj.control(i, k) += t * dy.segment(layout.control_col(i, k), m);
      out.costate(i, k) += t * dy.segment(layout.costate_col(i, k), n);
    }
  out.duals.clear();
  for (const auto& tr : layout.active()) {
    const auto it = iterate.duals.find(tr);
    const double base = it == iterate.duals.end() ? 0.0 : it->second;
    out.duals.emplace_hint(out.duals.end(), tr, base + t * dy[layout.dual_col(tr)]);
  }
  return out;
}

// -- residual -----------------------------------------------------------------

namespace detail {

void check_consistent(const Iterate& iterate, const Partition& partition,
                      const GameSpec& spec) {
  const auto& traj = iterate.trajectory;
  if (traj.agents() != spec.agent_count() || traj.horizon() != spec.horizon ||
      traj.state_dim() != spec.state_dim() ||
      traj.control_dim() != spec.control_dim())
    throw AssemblyError("trajectory dimensions do not match the game");
  if (iterate.costates.size() !=
      spec.agent_count() * spec.horizon * spec.state_dim())
    throw AssemblyError("costate length does not match the game");
  if (partition.agents() != spec.agent_count() ||
      partition.horizon() != spec.horizon)
    throw AssemblyError("partition dimensions do not match the game");
  if (static_cast<int>(iterate.duals.size()) != partition.active_count())
    throw AssemblyError("duals are not synced to the partition");
  for (const auto& t : partition.active_triplets())
    if (!iterate.duals.contains(t))
      throw AssemblyError("duals are not synced to the partition");
}

}  // namespace detail

namespace {

// Participant states for k = 0..T, indexed [k][p].
std::vector<std::vector<Vec>> all_participant_states(const GameSpec& spec,
                                                     const Trajectory& traj) {
  std::vector<std::vector<Vec>> s(spec.horizon + 1);
  for (int k = 0; k <= spec.horizon; ++k) {
    s[k].resize(spec.participant_count());
    for (int p = 0; p < spec.participant_count(); ++p)
      s[k][p] = participant_state(spec, traj, p, k);
  }
  return s;
}

Vec concat(const std::vector<Vec>& parts, int n) {
  Vec out(static_cast<int>(parts.size()) * n);
  for (std::size_t p = 0; p < parts.size(); ++p)
    out.segment(static_cast<int>(p) * n, n) = parts[p];
  return out;
}

}  // namespace

Vec residual_values(const Iterate& iterate, const Partition& partition,
                    double rho, const GameSpec& spec, const KktLayout& layout) {
  detail::check_consistent(iterate, partition, spec);
  const auto& traj = iterate.trajectory;
  const int N = spec.agent_count();
  const int T = spec.horizon;
  const int n = spec.state_dim();
  const int m = spec.control_dim();
  const auto states = all_participant_states(spec, traj);
  std::vector<Vec> joints(T + 1);
  for (int k = 0; k <= T; ++k) joints[k] = concat(states[k], n);

  Vec r = Vec::Zero(layout.rows());
  for (int i = 0; i < N; ++i) {
    const auto& model = *spec.agents[i];
    for (int k = 0; k < T; ++k) {
      const Vec& xk = states[k][i];
      const Vec u = traj.control(i, k);
      const Vec lam = iterate.costate(i, k);
      const CostGradient g = model.stage_cost_gradient(k, joints[k], u);
      const DynamicsJacobian jac = model.step_jacobian(xk, u);

      r.segment(layout.stationarity_control_row(i, k), m) =
          g.control + jac.control.transpose() * lam;
      r.segment(layout.dynamics_row(i, k), n) = model.step(xk, u) - states[k + 1][i];
      if (k >= 1)
        r.segment(layout.stationarity_state_row(i, k), n) +=
            g.state.segment(i * n, n) + jac.state.transpose() * lam;
      r.segment(layout.stationarity_state_row(i, k + 1), n) -= lam;
    }
    const CostGradient gt = model.terminal_cost_gradient(joints[T]);
    r.segment(layout.stationarity_state_row(i, T), n) += gt.state.segment(i * n, n);

    if (!spec.constraint) continue;
    const auto& h = *spec.constraint;
    for (int k = 1; k <= T; ++k) {
      auto row = r.segment(layout.stationarity_state_row(i, k), n);
      for (int j : partition.active(i, k)) {
        const ConstraintDerivatives d = h.derivatives(states[k][i], states[k][j]);
        const ConstraintTriplet t{i, k, j};
        row += iterate.duals.at(t) * d.first;
        r[layout.constraint_row(t)] = d.value;
      }
      for (int j : partition.inactive(i, k)) {
        const ConstraintDerivatives d = h.derivatives(states[k][i], states[k][j]);
        if (!(d.value < 0.0))
          throw BarrierDomainError("inactive constraint reached h >= 0");
        row += (-rho / d.value) * d.first;
      }
    }
  }
  return r;
}

ResidualVector assemble_residual(const Iterate& iterate,
                                 const Partition& partition, double rho,
                                 const GameSpec& spec) {
  const KktLayout layout(spec, partition);
  return {residual_values(iterate, partition, rho, spec, layout),
          layout.row_tags()};
}

double agent_lagrangian(const Iterate& iterate, const Partition& partition,
                        double rho, const GameSpec& spec, int i) {
  const auto& traj = iterate.trajectory;
  const auto& model = *spec.agents[i];
  const int T = spec.horizon;
  double L = 0.0;
  for (int k = 0; k < T; ++k) {
    const Vec xk = agent_state(spec, traj, i, k);
    const Vec u = traj.control(i, k);
    L += model.stage_cost(k, joint_state(spec, traj, k), u);
    L += iterate.costate(i, k).dot(model.step(xk, u) - traj.state(i, k + 1));
  }
  L += model.terminal_cost(joint_state(spec, traj, T));
  if (spec.constraint) {
    for (int k = 1; k <= T; ++k) {
      const Vec xi = traj.state(i, k);
      for (int j : partition.active(i, k))
        L += iterate.duals.at({i, k, j}) *
             spec.constraint->value(xi, participant_state(spec, traj, j, k));
      for (int j : partition.inactive(i, k))
        L += barrier(spec.constraint->value(xi, participant_state(spec, traj, j, k)),
                     rho);
    }
  }
  return L;
}

}  // namespace rd3g
