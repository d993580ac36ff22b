#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rd3g/game_model.hpp"
#include "rd3g/partition.hpp"

namespace rd3g {

/// Largest relative error between the assembled residual and central
/// differences of each agent's scalar Lagrangian in that agent's own
/// variables (states, controls, costates, active duals).
double residual_gradient_error(const Iterate& iterate, const Partition& partition, double rho,
                               const GameSpec& spec, double eps = 1e-6);

/// Relative error between the assembled Jacobian and central differences of
/// the residual. Exact up to round-off only when the dynamics are linear.
double jacobian_fd_error(const Iterate& iterate, const Partition& partition, double rho,
                         const GameSpec& spec, double eps = 1e-6);

struct SuiteEntry {
  std::string name;
  int points = 0;
  double max_error = 0.0;
};

struct DerivativeSuite {
  std::vector<SuiteEntry> entries;
  double max_error() const;
};

/// Finite-difference checks of every shipped model (bicycle dynamics, merge
/// and race costs, distance constraint, linear-quadratic agent) and of the
/// assembled residual and Jacobian at `points` seeded random points each.
DerivativeSuite run_derivative_suite(int points = 50, std::uint64_t seed = 7,
                                     double eps = 1e-6);

}  // namespace rd3g
