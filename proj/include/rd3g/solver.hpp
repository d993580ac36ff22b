#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rd3g/newton.hpp"

namespace rd3g {

struct SolverConfig {
  double eps_tol = 5e-4;
  double rho0 = 0.1;
  double kappa = 0.2;
  double beta_homotopy = 1.5;
  double alpha_ls = 0.01;
  double beta_ls = 0.5;
  int max_outer_iters = 200;
  int max_ls_shrinks = 40;
  double cg_tol = 1e-10;
  int cg_max_iter = 0;  // 0: 10 * columns

  void validate() const;
};

enum class SolverStatus { Converged, MaxIterations, LineSearchStall, LinearSolveFailure };
const char* to_string(SolverStatus status);

/// Per-iteration record. Entry l of residual_history / rho_history /
/// violation_history is measured at the top of outer iteration l, after
/// re-partitioning; the per-step vectors have one entry per accepted step.
struct SolverReport {
  SolverStatus status = SolverStatus::MaxIterations;
  int iterations = 0;
  std::vector<double> residual_history;
  std::vector<double> rho_history;
  std::vector<double> violation_history;
  std::vector<int> active_history;
  std::vector<double> step_sizes;
  std::vector<double> accepted_residuals;  // |r(y + t dy)| under the same partition and rho
  std::vector<double> step_violations;     // h(x + t dx)
  std::vector<double> min_duals;           // after clamping
  std::vector<std::string> solve_methods;
  std::map<std::string, double> timing_ms;
  double final_residual = 0.0;
  double final_violation = 0.0;
  std::string message;

  bool converged() const { return status == SolverStatus::Converged; }
};

/// Checks the recorded run against the algorithm's guarantees: the violation
/// sum never increases across a step, every accepted step satisfies the
/// sufficient-decrease test, rho is non-increasing with floor eps_tol/10 and
/// duals are non-negative. Returns one message per broken invariant.
std::vector<std::string> check_report_invariants(const SolverReport& report,
                                                 const SolverConfig& cfg);

class LineSearchStall : public Error {
 public:
  using Error::Error;
};

struct LineSearchResult {
  double step = 0.0;
  Iterate trial;
  double trial_residual = 0.0;
  double trial_violation = 0.0;
  int shrinks = 0;
};

/// Backtracking on t in {1, beta, beta^2, ...} until
///   |r(y + t dy)| <= (1 - alpha t) |r(y)|  and  h(x + t dx) <= h(x).
/// The partition is held fixed; a trial that drives any inactive constraint
/// to h >= 0 counts as |r| = inf. Throws LineSearchStall after
/// cfg.max_ls_shrinks reductions.
LineSearchResult line_search(const Iterate& iterate, const Vec& dy,
                             const Partition& partition, double rho,
                             const SolverConfig& cfg, const GameSpec& spec);

/// max{eps_tol / 10, min{kappa rho, rho^beta}}
double update_homotopy(double rho, const SolverConfig& cfg);

struct SolveResult {
  Iterate solution;
  SolverReport report;
};

/// Residual descent: re-partition, sync duals, Newton direction, line search,
/// dual clamp, homotopy update; stops once |r| < eps_tol with no violation.
/// Without a warm start the controls, costates and duals start at zero and the
/// states come from a rollout.
SolveResult solve(const GameSpec& spec, const SolverConfig& cfg = {},
                  const std::optional<Iterate>& warm = std::nullopt);

/// Receding-horizon warm start: drops the first step, repeats the last
/// control and costate, clears the duals and re-rolls the states from the
/// new spec's initial state.
Iterate shift_warm_start(const Iterate& previous, const GameSpec& spec);

struct NashReport {
  std::vector<double> max_improvement;  // per agent, >= 0
  std::vector<int> feasible_samples;
  double worst() const;
};

/// Samples unilateral control perturbations of norm <= radius per agent,
/// re-rolls that agent alone, discards infeasible ones and records the
/// largest cost decrease found.
NashReport nash_check(const Iterate& solution, const GameSpec& spec,
                      int samples, double radius, std::uint64_t seed = 1);

}  // namespace rd3g
