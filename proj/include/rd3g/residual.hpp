#pragma once

#include <vector>

#include "rd3g/game_model.hpp"
#include "rd3g/partition.hpp"

namespace rd3g {

/// B(h) = -rho * log(-h). Throws BarrierDomainError for h >= 0.
double barrier(double h, double rho);

struct BarrierDerivatives {
  Vec gradient;
  Mat hessian;
};

/// Derivatives of B(h(z)) given h, dh/dz and d2h/dz2:
///   grad = (-rho/h) dh,  hess = (-rho/h) d2h + (rho/h^2) dh dh'.
BarrierDerivatives barrier_chain(double h, const Vec& dh, const Mat& d2h,
                                 double rho);

enum class RowKind { StationarityState, StationarityControl, Dynamics, ActiveConstraint };
enum class ColumnKind { State, Control, Costate, Dual };

/// `index` is the vector component for per-step blocks and the other
/// participant for constraint rows / dual columns.
struct RowTag {
  RowKind kind;
  int agent;
  int step;
  int index;
  bool operator==(const RowTag&) const = default;
};

struct ColumnTag {
  ColumnKind kind;
  int agent;
  int step;
  int index;
  bool operator==(const ColumnTag&) const = default;
};

/// Row and column numbering of the KKT system for one partition.
///
/// Rows are r = (r^1, ..., r^N), with
///   r^i = (dL^i/dx^i [k = 1..T], dL^i/du^i [k = 0..T-1], F^i [k = 0..T-1],
///          h^{i,+} [(k, j) ascending]).
/// Columns are (x^i [1..T], u^i [0..T-1], lambda^i [0..T-1]) per agent,
/// followed by one dual per active triplet in (i, k, j) order.
class KktLayout {
 public:
  KktLayout(const GameSpec& spec, const Partition& partition);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int agents() const { return agents_; }
  int horizon() const { return horizon_; }
  int state_dim() const { return n_; }
  int control_dim() const { return m_; }
  int primal_block() const { return block_; }
  int primal_cols() const { return agents_ * block_; }

  int state_col(int i, int k) const { return i * block_ + (k - 1) * n_; }
  int control_col(int i, int k) const {
    return i * block_ + horizon_ * n_ + k * m_;
  }
  int costate_col(int i, int k) const {
    return i * block_ + horizon_ * (n_ + m_) + k * n_;
  }
  int dual_col(const ConstraintTriplet& t) const {
    return primal_cols() + active_index(t);
  }

  int stationarity_state_row(int i, int k) const {
    return row_offset_[i] + (k - 1) * n_;
  }
  int stationarity_control_row(int i, int k) const {
    return row_offset_[i] + horizon_ * n_ + k * m_;
  }
  int dynamics_row(int i, int k) const {
    return row_offset_[i] + horizon_ * (n_ + m_) + k * n_;
  }
  int constraint_row(const ConstraintTriplet& t) const {
    return row_offset_[t.agent] + block_ + active_index(t) -
           active_offset_[t.agent];
  }

  const std::vector<ConstraintTriplet>& active() const { return active_; }
  int active_index(const ConstraintTriplet& t) const;

  std::vector<RowTag> row_tags() const;
  std::vector<ColumnTag> column_tags() const;

 private:
  int agents_, horizon_, n_, m_, block_;
  int rows_ = 0, cols_ = 0;
  std::vector<int> row_offset_;
  std::vector<int> active_offset_;
  std::vector<ConstraintTriplet> active_;
};

/// Flattens y = (x, u, lambda, mu+) in layout column order.
Vec pack_iterate(const Iterate& iterate, const KktLayout& layout);

/// y + t * dy, with the dual keys taken from the layout.
Iterate step_iterate(const Iterate& iterate, const Vec& dy, double t,
                     const KktLayout& layout);

struct ResidualVector {
  Vec values;
  std::vector<RowTag> index_map;
  double norm() const { return values.norm(); }
};

/// Concatenated KKT residual at a primal-dual point for a fixed partition and
/// barrier weight. Requires the duals to be synced to the partition.
ResidualVector assemble_residual(const Iterate& iterate,
                                 const Partition& partition, double rho,
                                 const GameSpec& spec);

/// Residual values only, for repeated evaluation against one layout.
Vec residual_values(const Iterate& iterate, const Partition& partition,
                    double rho, const GameSpec& spec, const KktLayout& layout);

/// Scalar Lagrangian L^i (costs, costate-weighted dynamics defects, dual
/// weighted active constraints, barriers on inactive constraints).
double agent_lagrangian(const Iterate& iterate, const Partition& partition,
                        double rho, const GameSpec& spec, int agent);

namespace detail {
void check_consistent(const Iterate& iterate, const Partition& partition,
                      const GameSpec& spec);
}  // namespace detail

}  // namespace rd3g
