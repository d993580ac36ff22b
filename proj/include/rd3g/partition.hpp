#pragma once

#include <vector>

#include "rd3g/game_model.hpp"

namespace rd3g {

/// Active/violated (h >= 0) and inactive (h < 0) constraint sets per agent
/// and step. Other-participant indices include fixed agents.
class Partition {
 public:
  Partition() = default;
  Partition(int agents, int horizon);

  int agents() const { return agents_; }
  int horizon() const { return horizon_; }

  /// k in [1..T]; sorted ascending.
  const std::vector<int>& active(int i, int k) const { return active_[slot(i, k)]; }
  const std::vector<int>& inactive(int i, int k) const {
    return inactive_[slot(i, k)];
  }
  std::vector<int>& active(int i, int k) { return active_[slot(i, k)]; }
  std::vector<int>& inactive(int i, int k) { return inactive_[slot(i, k)]; }

  /// All active triplets ordered by (agent, step, other).
  std::vector<ConstraintTriplet> active_triplets() const;
  int active_count() const;
  int active_count(int i) const;

  bool operator==(const Partition&) const = default;

 private:
  int slot(int i, int k) const { return i * horizon_ + (k - 1); }

  int agents_ = 0;
  int horizon_ = 0;
  std::vector<std::vector<int>> active_;
  std::vector<std::vector<int>> inactive_;
};

Partition partition_constraints(const GameSpec& spec, const Trajectory& traj);

/// Restricts the dual store to the partition's active triplets. Entering
/// triplets start at zero, leaving ones are dropped.
DualMap sync_duals(const Partition& partition, const DualMap& duals);
void sync_duals(const Partition& partition, Iterate& iterate);

/// Sum of h over every ordered (i, j, k) with h > 0.
double violation_sum(const GameSpec& spec, const Trajectory& traj);

/// Smallest pairwise constraint margin -h over all steps (positive when
/// feasible); +inf without a constraint model.
double min_constraint_margin(const GameSpec& spec, const Trajectory& traj);

}  // namespace rd3g
