#pragma once

#include "cl2o/rules/update_rules.hpp"

#include <string>
#include <vector>

namespace cl2o {

enum class BaselineKind { GD, SGD, HeavyBall, NAG, Adam, RMSprop };

BaselineKind parse_baseline(const std::string& name);
std::string to_string(BaselineKind kind);
/// Comma-separated list; empty string gives an empty list.
std::vector<BaselineKind> parse_baseline_list(const std::string& list);

struct BaselineHyper {
  double lr = 0.01;
  double momentum = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double rms_decay = 0.99;
  /// SGD schedule lr / (e + 1)^p over epochs of M component steps.
  double sgd_power = 1.0;
};

struct BaselineOptimizer {
  BaselineKind kind = BaselineKind::GD;
  BaselineHyper hyper;
};

struct BaselineState {
  Vector m;  // momentum / first moment / NAG lookahead displacement
  Vector s;  // second moment
  std::size_t t = 0;
  std::size_t components = 1;  // M (epoch length for SGD)
};

BaselineState init_baseline_state(const BaselineOptimizer& opt, Index dim, std::size_t components = 1);

/// One update u_t from the gradient at the current iterate.
///   gd         u = -lr g
///   sgd        u = -lr_e g,  lr_e = lr / (floor(t/M) + 1)^p
///   heavy-ball u = -lr g + mu u_prev
///   nag        s = m - lr g, m' = mu s, u = -lr g + m'   (tracks the lookahead iterate)
///   adam       bias-corrected moments, u = -lr m^ / (sqrt(s^) + eps)
///   rmsprop    s = rho s + (1 - rho) g^2, u = -lr g / (sqrt(s) + eps)
Vector baseline_step(const BaselineOptimizer& opt, const Vector& gradient, BaselineState& state);

/// Whether the method consumes component gradients (cyclic order) or full
/// gradients.
enum class GradientMode { Full, Cyclic };

Trajectory run_baseline(const BaselineOptimizer& opt, const Objective& obj, const Vector& x0, std::size_t steps,
                        GradientMode mode, const RecordOptions& record = {});

/// 13 log-spaced points from 1e-4 to 1.
std::vector<double> default_lr_grid();

struct TuneResult {
  double lr = 0.0;
  double mean_final_loss = 0.0;
  std::vector<double> grid_losses;  // per grid point (inf if diverged)
};

/// Learning rate minimizing f(x_T) averaged over `starts`; runs that diverge
/// are excluded and ties go to the smaller rate.
TuneResult tune_learning_rate(const BaselineOptimizer& base, const Objective& obj, const std::vector<double>& grid,
                              std::size_t budget, const std::vector<Vector>& starts, GradientMode mode);

struct TuneProblem {
  const Objective* objective;
  Vector x0;
};
/// Same, averaging over (objective, start) pairs.
TuneResult tune_learning_rate(const BaselineOptimizer& base, const std::vector<TuneProblem>& problems,
                              const std::vector<double>& grid, std::size_t budget, GradientMode mode);

}  // namespace cl2o
