#pragma once

#include <optional>
#include <string>

#include "phdae/phsystem.hpp"

namespace phdae {

struct SimConfig {
  double t0 = 0.0;
  double t1 = 1.0;
  double dt = 1e-3;
  NewtonConfig newton{1e-12, 50, 20};
  std::vector<ExprTree> inputs;  // expressions over "t", one per external port
  int cadence = 1;               // CSV emission stride (trajectory keeps every step)
};

/// Time grid, states, multipliers and per-step diagnostics. Row 0 is the
/// initial condition; the balance/power columns of row i describe the
/// step that ends at row i (midpoint quadrature), hence row 0 holds zeros.
struct Trajectory {
  std::vector<double> t;
  std::vector<Vec> state;        // full state per row
  std::vector<Vec> multiplier;   // Dirac multipliers lam* per row (k entries)
  std::vector<double> energy;    // H or H~ at the row's state
  std::vector<double> constraint_residual;
  std::vector<double> power_balance;  // dE/dt - (port + dissipation)
  std::vector<double> port_power;     // e_P^T f_P over the step
  std::vector<double> diss_power;     // e_R^T f_R over the step (<= 0)
  std::optional<std::string> failure;

  std::size_t rows() const { return t.size(); }
};

struct InitResult {
  Vec x0;
  Vec chart;    // (x_I, e_J) chart point for generating-function storage
  Vec witness;  // lambda witness for Morse storage
};

/// Project x_guess onto the constraint set (Dirac constraints plus the
/// storage projection for implicit storage) by Newton on the first-order
/// conditions of min ||x - x_guess||^2. Guarantees ||g(x0)||_inf <= 1e-10.
InitResult consistent_init(const PHSystem& sys, const Vec& x_guess,
                           const NewtonConfig& cfg = {}, std::uint64_t seed = kDefaultSeed);

/// Smallest singular value of B^T(x) hess H(x) B(x) (or the chart
/// analogue for generating-function storage). Index-1 holds where the
/// value stays >= 1e-8; returns +infinity when k = 0.
double index_check(const PHSystem& sys, const Vec& x, std::uint64_t seed = kDefaultSeed);

/// One implicit-midpoint step from a consistent state; the Dirac
/// constraints are enforced at the step endpoint and lam* is a per-step
/// algebraic unknown.
struct StepOutcome {
  Vec x_next;
  Vec multiplier;
};
StepOutcome step(const PHSystem& sys, const Vec& x_k, double t_k, double dt,
                 const Vec& u_mid, const NewtonConfig& cfg = {},
                 std::uint64_t seed = kDefaultSeed);

/// Consistent initialization followed by implicit-midpoint stepping over
/// [t0, t1]. On a solver failure the trajectory computed so far is
/// returned with `failure` set.
Trajectory simulate(const PHSystem& sys, const Vec& x_guess, const SimConfig& cfg,
                    std::uint64_t seed = kDefaultSeed);

struct EnergyBalanceSummary {
  double max_balance_residual = 0.0;
  double max_passivity_violation = 0.0;  // max(dE/dt - port power, 0)
};
EnergyBalanceSummary energy_balance(const Trajectory& traj, const PHSystem& sys);

}  // namespace phdae
