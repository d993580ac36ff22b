#include "rd3g/partition.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace rd3g {

Partition::Partition(int agents, int horizon)
    : agents_(agents),
      horizon_(horizon),
      active_(static_cast<std::size_t>(agents * horizon)),
      inactive_(static_cast<std::size_t>(agents * horizon)) {}

std::vector<ConstraintTriplet> Partition::active_triplets() const {
  std::vector<ConstraintTriplet> out;
  for (int i = 0; i < agents_; ++i)
    for (int k = 1; k <= horizon_; ++k)
      for (int j : active(i, k)) out.push_back({i, k, j});
  return out;
}

int Partition::active_count() const {
  int c = 0;
  for (const auto& s : active_) c += static_cast<int>(s.size());
  return c;
}

int Partition::active_count(int i) const {
  int c = 0;
  for (int k = 1; k <= horizon_; ++k) c += static_cast<int>(active(i, k).size());
  return c;
}

Partition partition_constraints(const GameSpec& spec, const Trajectory& traj) {
  Partition part(spec.agent_count(), spec.horizon);
  if (!spec.constraint) return part;
  const auto& h = *spec.constraint;
  const int participants = spec.participant_count();
  for (int k = 1; k <= spec.horizon; ++k) {
    std::vector<Vec> states(participants);
    for (int p = 0; p < participants; ++p)
      states[p] = participant_state(spec, traj, p, k);
    for (int i = 0; i < spec.agent_count(); ++i) {
      for (int j = 0; j < participants; ++j) {
        if (j == i) continue;
        if (h.value(states[i], states[j]) >= 0.0)
          part.active(i, k).push_back(j);
        else
          part.inactive(i, k).push_back(j);
      }
    }
  }
  return part;
}

DualMap sync_duals(const Partition& partition, const DualMap& duals) {
  DualMap out;
  for (const auto& t : partition.active_triplets()) {
    const auto it = duals.find(t);
    out.emplace_hint(out.end(), t, it == duals.end() ? 0.0 : it->second);
  }
  return out;
}

void sync_duals(const Partition& partition, Iterate& iterate) {
  iterate.duals = sync_duals(partition, iterate.duals);
}

double violation_sum(const GameSpec& spec, const Trajectory& traj) {
  if (!spec.constraint) return 0.0;
  const auto& h = *spec.constraint;
  const int participants = spec.participant_count();
  double total = 0.0;
  for (int k = 1; k <= spec.horizon; ++k) {
    std::vector<Vec> states(participants);
    for (int p = 0; p < participants; ++p)
      states[p] = participant_state(spec, traj, p, k);
    for (int i = 0; i < spec.agent_count(); ++i)
      for (int j = 0; j < participants; ++j) {
        if (j == i) continue;
        const double v = h.value(states[i], states[j]);
        if (v > 0.0) total += v;
      }
  }
  return total;
}

double min_constraint_margin(const GameSpec& spec, const Trajectory& traj) {
  double margin = std::numeric_limits<double>::infinity();
  if (!spec.constraint) return margin;
  const int participants = spec.participant_count();
  for (int k = 1; k <= spec.horizon; ++k)
    for (int i = 0; i < spec.agent_count(); ++i)
      for (int j = 0; j < participants; ++j) {
        if (j == i) continue;
        margin = std::min(margin, -spec.constraint->value(
                                      participant_state(spec, traj, i, k),
                                      participant_state(spec, traj, j, k)));
      }
  return margin;
}

}  // namespace rd3g
