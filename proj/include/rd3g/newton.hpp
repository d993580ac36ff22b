#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/SparseCore>

#include "rd3g/residual.hpp"

namespace rd3g {

using SparseMat = Eigen::SparseMatrix<double>;

/// Newton system grad r * dy = -r for one partition.
struct SparseSystem {
  SparseMat jacobian;
  Vec rhs;  // -r
  std::vector<RowTag> row_map;
  std::vector<ColumnTag> column_map;
};

/// Jacobian of the concatenated residual. Second derivatives of the dynamics
/// are omitted; every other block is exact.
SparseSystem assemble_jacobian(const Iterate& iterate,
                               const Partition& partition, double rho,
                               const GameSpec& spec);

enum class SolveMethod { IterativeLeastSquares, SparseQr };
const char* to_string(SolveMethod method);

struct Descent {
  Vec step;
  SolveMethod method = SolveMethod::IterativeLeastSquares;
  int iterations = 0;       // conjugate-gradient iterations attempted
  double cg_error = 0.0;    // relative normal-equation residual it reached
};

/// Least-squares solution of grad r * dy = -r. Conjugate gradients on the
/// normal equations first (one tighter pass when |J dy + r| / |r| lands
/// within 100x above `cg_tol`); a rank-revealing sparse QR when CG does not reach
/// `cg_tol` within `cg_max_iter` iterations or returns non-finite values.
/// `cg_max_iter <= 0` selects 10 * columns. Non-finite input throws.
Descent solve_descent(const SparseSystem& system, double cg_tol = 1e-10,
                      int cg_max_iter = 0);

/// Writes the Jacobian in MatrixMarket coordinate format followed by the
/// row and column tags as comments.
void write_matrix_market(const SparseSystem& system, std::ostream& os);

std::string describe(const RowTag& tag);
std::string describe(const ColumnTag& tag);

}  // namespace rd3g
