#pragma once

#include "cl2o/data/results.hpp"
#include "cl2o/rules/update_rules.hpp"

#include <optional>
#include <vector>

namespace cl2o {

/// Partial sums of |grad f(x_t)|^2 and |u_t|^2 with a tail-energy check
/// over the last fraction of the horizon.
struct ConvergenceReport {
  std::vector<double> grad_energy;    // K_grad partial sums
  std::vector<double> update_energy;  // K_pi partial sums
  /// Time index of each grad_energy entry (probe times for cyclic runs).
  std::vector<std::size_t> grad_times;
  double grad_total = 0.0;
  double update_total = 0.0;
  double grad_tail = 0.0;    // energy in the last tail_fraction of the records
  double update_tail = 0.0;
  double tail_fraction = 0.1;
  double tail_tolerance = 1e-8;
  /// tail <= tolerance * total for both sequences.
  bool square_summable = false;
  bool diverged = false;

  double grad_tail_ratio() const { return grad_total > 0.0 ? grad_tail / grad_total : 0.0; }
  double update_tail_ratio() const { return update_total > 0.0 ? update_tail / update_total : 0.0; }
  KeyValues summary() const;
  /// t, grad_energy, update_energy
  CsvTable csv() const;
};

/// Full-rule trajectories use the native gradient records; cyclic runs use
/// the full-gradient probes.
ConvergenceReport square_sum_diagnostics(const Trajectory& traj, double tail_fraction = 0.1,
                                         double tail_tolerance = 1e-8);

struct DescentReport {
  double eps = 0.0;
  double threshold = 0.0;  // 1 / (2 eta (1 - beta eta))
  double rho = 0.0;        // 2 eta eps (1 - beta eta) - 1
  double lhs = 0.0;        // sum_{t<T} |grad f(x_t)|^2
  double rhs = 0.0;
  double f0 = 0.0;
  double f_min = 0.0;
  double v_energy = 0.0;
  /// f_min is the running minimum along the trajectory, not a declared bound.
  bool surrogate = false;
  bool holds = false;
  KeyValues summary() const;
};

/// Checks sum_{t<T} |grad f(x_t)|^2 <= (2 eps / rho)(f(x0) - f_min)
///   + (eps / rho)(eps + 2 beta) sum_{t<T} |v_t|^2
/// over the T recorded updates. eps defaults to twice the threshold.
DescentReport descent_monitor(const Trajectory& traj, double beta, double eta, std::optional<double> eps = std::nullopt,
                            std::optional<double> lower_bound = std::nullopt);

/// V_t = eta g_t + u_t, replayed open-loop.
struct ReconstructedInnovation {
  double eta = 0.0;
  Vector x0;
  std::vector<Vector> V;

  ScriptedInnovation as_scripted() const;
  /// sum_t |V_t|^2
  double energy() const;
};

ReconstructedInnovation reconstruct_innovation(const Trajectory& source, double eta);

struct EquivalenceReport {
  double max_deviation = 0.0;
  std::vector<double> deviation;  // |x_t^replay - x_t^source|
  /// First t whose deviation exceeds the tolerance.
  std::optional<std::size_t> first_violation;
  bool equivalent = false;
};

/// Replays x_{t+1} = x_t - eta grad f(x_t) + V_t from the source's x0.
EquivalenceReport equivalence_test(const Trajectory& source, const ReconstructedInnovation& V, const Objective& obj,
                                   double eta, double tol = 1e-10);

/// Least-squares fit max_i |grad f_i(x)| ~ A + B |grad f(x)| over samples.
struct AssumptionFit {
  double A = 0.0;
  double B = 0.0;
  double max_residual = 0.0;
  std::size_t samples = 0;
};

AssumptionFit gradient_growth_probe(const Objective& obj, const Box& box, std::size_t samples,
                                        std::uint64_t seed);

/// |v_t| <= eta_e (C + 1e-12), C = max_s |z_s| (D = 0).
struct InnovationBoundReport {
  double C = 0.0;
  std::size_t violations = 0;
  double worst_ratio = 0.0;  // max_t |v_t| / (eta_t C)
  bool compliant = false;
};

InnovationBoundReport innovation_bound_compliance(const Trajectory& traj);

/// r_e = sum_{i<M} u_{eM+i} + eta_e grad f(x_{eM}) per complete epoch,
/// with |r_e| / eta_e fitted against a + b |grad f(x_{eM})|.
struct MStepReport {
  std::vector<double> residual_norm;
  std::vector<double> scaled;  // |r_e| / eta_e
  std::vector<double> grad_norm;
  double envelope_a = 0.0;
  double envelope_b = 0.0;
  double max_scaled = 0.0;
  std::vector<Vector> residual;
};

MStepReport mstep_recursion_residual(const Trajectory& traj, const Objective& obj);

}  // namespace cl2o
