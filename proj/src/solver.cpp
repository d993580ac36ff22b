#include "rd3g/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace rd3g {

void SolverConfig::validate() const {
  if (!(eps_tol > 0.0)) throw ConfigError("eps_tol must be positive");
  if (!(rho0 > 0.0)) throw ConfigError("rho0 must be positive");
  if (!(kappa > 0.0 && kappa < 1.0)) throw ConfigError("kappa must be in (0,1)");
  if (!(beta_homotopy > 1.0)) throw ConfigError("beta_homotopy must be > 1");
  if (!(alpha_ls > 0.0 && alpha_ls < 1.0))
    throw ConfigError("alpha_ls must be in (0,1)");
  if (!(beta_ls > 0.0 && beta_ls < 1.0)) throw ConfigError("beta_ls must be in (0,1)");
  if (max_outer_iters < 0) throw ConfigError("max_outer_iters must be >= 0");
  if (max_ls_shrinks < 0) throw ConfigError("max_ls_shrinks must be >= 0");
  if (!(cg_tol > 0.0)) throw ConfigError("cg_tol must be positive");
}

const char* to_string(SolverStatus status) {
  switch (status) {
    case SolverStatus::Converged: return "converged";
    case SolverStatus::MaxIterations: return "max-iters";
    case SolverStatus::LineSearchStall: return "line-search-stall";
    case SolverStatus::LinearSolveFailure: return "linear-solve-failure";
  }
  return "unknown";
}

double update_homotopy(double rho, const SolverConfig& cfg) {
  return std::max(cfg.eps_tol / 10.0,
                  std::min(cfg.kappa * rho, std::pow(rho, cfg.beta_homotopy)));
}

namespace {

double trial_norm(const Iterate& trial, const Partition& partition, double rho,
                  const GameSpec& spec, const KktLayout& layout) {
  if (!trial.trajectory.all_finite() || !trial.costates.allFinite())
    return std::numeric_limits<double>::infinity();
  try {
    const double v = residual_values(trial, partition, rho, spec, layout).norm();
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  } catch (const BarrierDomainError&) {
    return std::numeric_limits<double>::infinity();
  }
}

LineSearchResult search(const Iterate& iterate, const Vec& dy,
                        const Partition& partition, double rho,
                        const SolverConfig& cfg, const GameSpec& spec,
                        const KktLayout& layout, double base_norm) {
  const double base_violation = violation_sum(spec, iterate.trajectory);
  double t = 1.0;
  for (int shrinks = 0; shrinks <= cfg.max_ls_shrinks; ++shrinks, t *= cfg.beta_ls) {
    Iterate trial = step_iterate(iterate, dy, t, layout);
    const double norm = trial_norm(trial, partition, rho, spec, layout);
    if (!(norm <= (1.0 - cfg.alpha_ls * t) * base_norm)) continue;
    const double viol = violation_sum(spec, trial.trajectory);
    if (viol > base_violation) continue;
    return {t, std::move(trial), norm, viol, shrinks};
  }
  std::ostringstream os;
  os << "line search stalled after " << cfg.max_ls_shrinks
     << " step reductions (|r| = " << base_norm << ")";
  throw LineSearchStall(os.str());
}

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

}  // namespace

LineSearchResult line_search(const Iterate& iterate, const Vec& dy,
                             const Partition& partition, double rho,
                             const SolverConfig& cfg, const GameSpec& spec) {
  const KktLayout layout(spec, partition);
  const double base = residual_values(iterate, partition, rho, spec, layout).norm();
  return search(iterate, dy, partition, rho, cfg, spec, layout, base);
}

SolveResult solve(const GameSpec& spec, const SolverConfig& cfg,
                  const std::optional<Iterate>& warm) {
  spec.validate();
  cfg.validate();
  const auto start = Clock::now();

  SolveResult out;
  Iterate& y = out.solution;
  SolverReport& rep = out.report;
  auto& timing = rep.timing_ms;
  for (const char* key : {"partition", "residual", "jacobian", "linear_solve", "line_search"})
    timing[key] = 0.0;

  if (warm) {
    y = *warm;
    const auto& t = y.trajectory;
    if (t.agents() != spec.agent_count() || t.horizon() != spec.horizon ||
        t.state_dim() != spec.state_dim() || t.control_dim() != spec.control_dim() ||
        y.costates.size() != spec.agent_count() * spec.horizon * spec.state_dim())
      throw ConfigError("warm start does not match the game dimensions");
  } else {
    y = Iterate::zeros_like(spec);
    rollout(spec, y.trajectory);
  }

  double rho = cfg.rho0;
  for (int iter = 0;; ++iter) {
    auto t0 = Clock::now();
    const Partition partition = partition_constraints(spec, y.trajectory);
    sync_duals(partition, y);
    const KktLayout layout(spec, partition);
    timing["partition"] += ms_since(t0);

    t0 = Clock::now();
    double norm;
    try {
      norm = residual_values(y, partition, rho, spec, layout).norm();
    } catch (const BarrierDomainError&) {
      norm = std::numeric_limits<double>::infinity();
    }
    const double viol = violation_sum(spec, y.trajectory);
    timing["residual"] += ms_since(t0);

    rep.residual_history.push_back(norm);
    rep.rho_history.push_back(rho);
    rep.violation_history.push_back(viol);
    rep.active_history.push_back(partition.active_count());
    rep.final_residual = norm;
    rep.final_violation = viol;
    rep.iterations = iter;

    if (norm < cfg.eps_tol && viol == 0.0) {
      rep.status = SolverStatus::Converged;
      break;
    }
    if (iter >= cfg.max_outer_iters) {
      rep.status = SolverStatus::MaxIterations;
      break;
    }

    t0 = Clock::now();
    const SparseSystem system = assemble_jacobian(y, partition, rho, spec);
    timing["jacobian"] += ms_since(t0);

    t0 = Clock::now();
    Descent descent;
    try {
      descent = solve_descent(system, cfg.cg_tol, cfg.cg_max_iter);
    } catch (const LinearSolveError& e) {
      timing["linear_solve"] += ms_since(t0);
      rep.status = SolverStatus::LinearSolveFailure;
      rep.message = e.what();
      break;
    }
    timing["linear_solve"] += ms_since(t0);
    rep.solve_methods.emplace_back(to_string(descent.method));

    t0 = Clock::now();
    LineSearchResult ls;
    try {
      ls = search(y, descent.step, partition, rho, cfg, spec, layout, norm);
    } catch (const LineSearchStall& e) {
      timing["line_search"] += ms_since(t0);
      rep.status = SolverStatus::LineSearchStall;
      rep.message = e.what();
      break;
    }
    timing["line_search"] += ms_since(t0);

    y = std::move(ls.trial);
    double min_dual = std::numeric_limits<double>::infinity();
    for (auto& [key, mu] : y.duals) {
      mu = std::max(mu, 0.0);
      min_dual = std::min(min_dual, mu);
    }
    rep.step_sizes.push_back(ls.step);
    rep.accepted_residuals.push_back(ls.trial_residual);
    rep.step_violations.push_back(ls.trial_violation);
    rep.min_duals.push_back(y.duals.empty() ? 0.0 : min_dual);

    rho = update_homotopy(rho, cfg);
  }
  timing["total"] = ms_since(start);
  return out;
}

std::vector<std::string> check_report_invariants(const SolverReport& rep,
                                                 const SolverConfig& cfg) {
  std::vector<std::string> bad;
  auto fail = [&](const std::string& what, std::size_t l) {
    std::ostringstream os;
    os << what << " at iteration " << l;
    bad.push_back(os.str());
  };
  const std::size_t steps = rep.step_sizes.size();
  for (std::size_t l = 0; l < steps; ++l) {
    const double t = rep.step_sizes[l];
    if (rep.step_violations[l] > rep.violation_history[l]) fail("violation sum increased", l);
    if (!(rep.accepted_residuals[l] <= (1.0 - cfg.alpha_ls * t) * rep.residual_history[l]))
      fail("sufficient decrease violated", l);
    if (rep.min_duals[l] < 0.0) fail("negative dual after clamp", l);
  }
  // The next iterate's violation is measured on the same states as the step's.
  for (std::size_t l = 0; l + 1 < rep.violation_history.size() && l < steps; ++l)
    if (rep.violation_history[l + 1] > rep.violation_history[l]) fail("violation sum increased", l);
  for (std::size_t l = 0; l < rep.rho_history.size(); ++l) {
    if (rep.rho_history[l] < cfg.eps_tol / 10.0 * (1.0 - 1e-12)) fail("rho below floor", l);
    if (l > 0 && rep.rho_history[l] > rep.rho_history[l - 1]) fail("rho increased", l);
  }
  if (rep.converged() &&
      !(rep.final_residual < cfg.eps_tol && rep.final_violation == 0.0))
    bad.emplace_back("converged status without meeting the tolerance");
  return bad;
}

Iterate shift_warm_start(const Iterate& previous, const GameSpec& spec) {
  Iterate out = Iterate::zeros_like(spec);
  const int N = spec.agent_count();
  const int T = spec.horizon;
  const auto& prev = previous.trajectory;
  if (prev.agents() != N || prev.horizon() != T ||
      prev.control_dim() != spec.control_dim() || prev.state_dim() != spec.state_dim())
    throw ConfigError("warm start does not match the game dimensions");
  for (int i = 0; i < N; ++i)
    for (int k = 0; k < T; ++k) {
      const int src = std::min(k + 1, T - 1);
      out.trajectory.control(i, k) = prev.control(i, src);
      out.costate(i, k) = previous.costate(i, src);
    }
  rollout(spec, out.trajectory);
  return out;
}

double NashReport::worst() const {
  double w = 0.0;
  for (double v : max_improvement) w = std::max(w, v);
  return w;
}

NashReport nash_check(const Iterate& solution, const GameSpec& spec,
                      int samples, double radius, std::uint64_t seed) {
  NashReport rep;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int N = spec.agent_count();
  const int dim = spec.horizon * spec.control_dim();
  for (int i = 0; i < N; ++i) {
    // Compare against the re-rolled solution so small dynamics defects of the
    // converged iterate do not masquerade as improvements.
    Trajectory nominal = solution.trajectory;
    rollout_agent(spec, nominal, i);
    const double base = agent_cost(spec, nominal, i);
    double best = 0.0;
    int feasible = 0;
    for (int s = 0; s < samples; ++s) {
      Vec dir(dim);
      for (int c = 0; c < dim; ++c) dir[c] = normal(rng);
      dir *= radius * std::pow(unit(rng), 1.0 / dim) / dir.norm();
      Trajectory trial = nominal;
      for (int k = 0; k < spec.horizon; ++k)
        trial.control(i, k) += dir.segment(k * spec.control_dim(), spec.control_dim());
      try {
        rollout_agent(spec, trial, i);
      } catch (const RolloutDivergence&) {
        continue;
      }
      if (violation_sum(spec, trial) > 0.0) continue;
      ++feasible;
      best = std::max(best, base - agent_cost(spec, trial, i));
    }
    rep.max_improvement.push_back(best);
    rep.feasible_samples.push_back(feasible);
  }
  return rep;
}

}  // namespace rd3g
