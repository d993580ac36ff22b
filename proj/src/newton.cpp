#include "rd3g/newton.hpp"

#include <cmath>
#include <ostream>
#include <sstream>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/OrderingMethods>
#include <Eigen/SparseQR>

namespace rd3g {

namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;

template <typename Block>
void add_block(Triplets& out, int row, int col, const Block& b) {
  for (int c = 0; c < b.cols(); ++c)
    for (int r = 0; r < b.rows(); ++r) {
      const double v = b(r, c);
      if (v != 0.0) out.emplace_back(row + r, col + c, v);
    }
}

void add_identity(Triplets& out, int row, int col, int n, double scale) {
  for (int c = 0; c < n; ++c) out.emplace_back(row + c, col + c, scale);
}

}  // namespace

SparseSystem assemble_jacobian(const Iterate& iterate,
                               const Partition& partition, double rho,
                               const GameSpec& spec) {
  const KktLayout layout(spec, partition);
  SparseSystem sys;
  sys.rhs = -residual_values(iterate, partition, rho, spec, layout);

  const auto& traj = iterate.trajectory;
  const int N = spec.agent_count();
  const int T = spec.horizon;
  const int n = spec.state_dim();
  const int m = spec.control_dim();

  std::vector<Vec> joints(T + 1);
  for (int k = 0; k <= T; ++k) joints[k] = joint_state(spec, traj, k);

  Triplets trip;
  trip.reserve(static_cast<std::size_t>(layout.rows()) * 12);

  for (int i = 0; i < N; ++i) {
    const auto& model = *spec.agents[i];
    for (int k = 0; k < T; ++k) {
      const Vec xk = agent_state(spec, traj, i, k);
      const Vec u = traj.control(i, k);
      const CostHessian H = model.stage_cost_hessian(k, joints[k], u);
      const DynamicsJacobian jac = model.step_jacobian(xk, u);

      const int ru = layout.stationarity_control_row(i, k);
      add_block(trip, ru, layout.control_col(i, k), H.control_control);
      add_block(trip, ru, layout.costate_col(i, k), jac.control.transpose());

      const int rd = layout.dynamics_row(i, k);
      add_block(trip, rd, layout.control_col(i, k), jac.control);
      add_identity(trip, rd, layout.state_col(i, k + 1), n, -1.0);

      add_identity(trip, layout.stationarity_state_row(i, k + 1),
                   layout.costate_col(i, k), n, -1.0);

      if (k == 0) continue;
      const int rx = layout.stationarity_state_row(i, k);
      for (int j = 0; j < N; ++j) {
        add_block(trip, ru, layout.state_col(j, k),
                  H.state_control.block(j * n, 0, n, m).transpose());
        add_block(trip, rx, layout.state_col(j, k),
                  H.state_state.block(i * n, j * n, n, n));
      }
      add_block(trip, rx, layout.control_col(i, k),
                H.state_control.block(i * n, 0, n, m));
      add_block(trip, rx, layout.costate_col(i, k), jac.state.transpose());
      add_block(trip, rd, layout.state_col(i, k), jac.state);
    }
    const CostHessian Ht = model.terminal_cost_hessian(joints[T]);
    for (int j = 0; j < N; ++j)
      add_block(trip, layout.stationarity_state_row(i, T), layout.state_col(j, T),
                Ht.state_state.block(i * n, j * n, n, n));

    if (!spec.constraint) continue;
    const auto& h = *spec.constraint;
    for (int k = 1; k <= T; ++k) {
      const int rx = layout.stationarity_state_row(i, k);
      const Vec xi = traj.state(i, k);
      Mat own = Mat::Zero(n, n);
      for (int j : partition.active(i, k)) {
        const ConstraintDerivatives d =
            h.derivatives(xi, participant_state(spec, traj, j, k));
        const ConstraintTriplet t{i, k, j};
        const double mu = iterate.duals.at(t);
        own += mu * d.first_first;
        add_block(trip, rx, layout.dual_col(t), d.first);
        const int rc = layout.constraint_row(t);
        add_block(trip, rc, layout.state_col(i, k), d.first.transpose());
        if (j < N) {
          add_block(trip, rx, layout.state_col(j, k), mu * d.first_second);
          add_block(trip, rc, layout.state_col(j, k), d.second.transpose());
        }
      }
      for (int j : partition.inactive(i, k)) {
        const ConstraintDerivatives d =
            h.derivatives(xi, participant_state(spec, traj, j, k));
        if (!(d.value < 0.0))
          throw BarrierDomainError("inactive constraint reached h >= 0");
        const double s1 = -rho / d.value;
        const double s2 = rho / (d.value * d.value);
        own += s1 * d.first_first + s2 * d.first * d.first.transpose();
        if (j < N)
          add_block(trip, rx, layout.state_col(j, k),
                    s1 * d.first_second + s2 * d.first * d.second.transpose());
      }
      add_block(trip, rx, layout.state_col(i, k), own);
    }
  }

  sys.jacobian.resize(layout.rows(), layout.cols());
  sys.jacobian.setFromTriplets(trip.begin(), trip.end());
  sys.jacobian.makeCompressed();
  sys.row_map = layout.row_tags();
  sys.column_map = layout.column_tags();
  return sys;
}

const char* to_string(SolveMethod method) {
  switch (method) {
    case SolveMethod::IterativeLeastSquares: return "lscg";
    case SolveMethod::SparseQr: return "sparse-qr";
  }
  return "unknown";
}

Descent solve_descent(const SparseSystem& system, double cg_tol,
                      int cg_max_iter) {
  if (!(cg_tol > 0.0)) throw std::invalid_argument("cg_tol must be positive");
  const auto& A = system.jacobian;
  if (A.rows() != system.rhs.size())
    throw LinearSolveError("rhs length does not match the Jacobian");
  if (cg_max_iter <= 0) cg_max_iter = 10 * static_cast<int>(A.cols());
  if (!system.rhs.allFinite() ||
      !Eigen::Map<const Vec>(A.valuePtr(), A.nonZeros()).allFinite())
    throw LinearSolveError("linear solve failed: non-finite entries in the system");

  Descent out;
  {
    Eigen::LeastSquaresConjugateGradient<SparseMat> cg;
    cg.setMaxIterations(cg_max_iter);
    cg.compute(A);
    // Eigen stops on the normal-equation residual. A consistent system that
    // misses |A x - b| <= cg_tol |b| narrowly gets one tighter pass; an
    // inconsistent one (duplicate constraint rows) never would, so don't try.
    const double rhs_norm = system.rhs.norm();
    double tol = cg_tol;
    Vec x = Vec::Zero(A.cols());
    bool ok = false;
    for (int round = 0; round < 2 && out.iterations < cg_max_iter; ++round) {
      cg.setTolerance(tol);
      cg.setMaxIterations(cg_max_iter - out.iterations);
      Vec next = cg.solveWithGuess(system.rhs, x);
      out.iterations += static_cast<int>(cg.iterations());
      if (cg.info() != Eigen::Success || !next.allFinite()) break;  // keep the last good x
      x = std::move(next);
      out.cg_error = cg.error();
      ok = true;
      const double miss = (A * x - system.rhs).norm() / rhs_norm;
      if (!(miss > cg_tol && miss <= 100 * cg_tol)) break;
      tol *= 1e-2;
    }
    if (ok) {
      out.step = std::move(x);
      out.method = SolveMethod::IterativeLeastSquares;
      return out;
    }
  }

  Eigen::SparseQR<SparseMat, Eigen::COLAMDOrdering<int>> qr;
  qr.compute(A);
  if (qr.info() == Eigen::Success) {
    Vec x = qr.solve(system.rhs);
    if (qr.info() == Eigen::Success && x.allFinite()) {
      out.step = std::move(x);
      out.method = SolveMethod::SparseQr;
      return out;
    }
  }
  std::ostringstream os;
  os << "linear solve failed: cg stopped after " << out.iterations
     << " iterations at relative error " << out.cg_error
     << "; sparse QR did not produce a finite solution ("
     << A.rows() << "x" << A.cols() << ", nnz " << A.nonZeros() << ")";
  throw LinearSolveError(os.str());
}

std::string describe(const RowTag& tag) {
  std::ostringstream os;
  switch (tag.kind) {
    case RowKind::StationarityState: os << "dL/dx"; break;
    case RowKind::StationarityControl: os << "dL/du"; break;
    case RowKind::Dynamics: os << "F"; break;
    case RowKind::ActiveConstraint: os << "h"; break;
  }
  os << "(agent=" << tag.agent << ",k=" << tag.step << ","
     << (tag.kind == RowKind::ActiveConstraint ? "other=" : "c=") << tag.index
     << ")";
  return os.str();
}

std::string describe(const ColumnTag& tag) {
  std::ostringstream os;
  switch (tag.kind) {
    case ColumnKind::State: os << "x"; break;
    case ColumnKind::Control: os << "u"; break;
    case ColumnKind::Costate: os << "lambda"; break;
    case ColumnKind::Dual: os << "mu"; break;
  }
  os << "(agent=" << tag.agent << ",k=" << tag.step << ","
     << (tag.kind == ColumnKind::Dual ? "other=" : "c=") << tag.index << ")";
  return os.str();
}

void write_matrix_market(const SparseSystem& system, std::ostream& os) {
  const auto& A = system.jacobian;
  os << "%%MatrixMarket matrix coordinate real general\n";
  os << A.rows() << " " << A.cols() << " " << A.nonZeros() << "\n";
  os.precision(17);
  for (int c = 0; c < A.outerSize(); ++c)
    for (SparseMat::InnerIterator it(A, c); it; ++it)
      os << it.row() + 1 << " " << it.col() + 1 << " " << it.value() << "\n";
  for (std::size_t r = 0; r < system.row_map.size(); ++r)
    os << "% row " << r + 1 << " " << describe(system.row_map[r]) << " rhs "
       << system.rhs[static_cast<int>(r)] << "\n";
  for (std::size_t c = 0; c < system.column_map.size(); ++c)
    os << "% col " << c + 1 << " " << describe(system.column_map[c]) << "\n";
}

}  // namespace rd3g
