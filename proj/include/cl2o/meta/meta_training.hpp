#pragma once

#include "cl2o/data/results.hpp"
#include "cl2o/rules/update_rules.hpp"

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace cl2o {

/// MetaLoss = sum_{t=0}^{T} alpha_t |grad f(x_t)|^2 + gamma_t f(x_t).
struct MetaLossConfig {
  std::size_t horizon = 50;
  std::vector<double> alpha;  // horizon + 1 entries
  std::vector<double> gamma;  // horizon + 1 entries

  /// alpha_t = alpha, gamma_t = decay^(T - t).
  static MetaLossConfig discounted(std::size_t horizon, double decay = 0.95, double alpha = 0.0);
  void validate() const;
};

/// Weighted sum over t = 0..T of a recorded trajectory. For cyclic runs the
/// minibatch estimates f_tau / w_tau and grad f_tau / w_tau are used.
double metaloss(const MetaLossConfig& config, const Trajectory& traj, const Objective& obj);

enum class InitKind { Uniform, Gaussian };
InitKind parse_init(const std::string& name);
std::string to_string(InitKind kind);

struct InitSampler {
  InitKind kind = InitKind::Uniform;
  double low = 0.0;
  double high = 0.01;
  double stddev = 0.1;

  Vector sample(std::uint64_t seed, Index dim) const;
  /// Root-mean-square of a single coordinate.
  double rms() const;
};

/// How the learned rule (and its innovation-free reference) is configured
/// on a sampled objective.
struct RuleSpec {
  RuleKind kind = RuleKind::Full;
  double eta_factor = 0.9;  // full: eta = eta_factor / beta
  double eta0 = 0.1;        // cyclic schedule
  double power = 1.0;
  bool unsafe = false;
};

struct TaskDistribution {
  Index dim = 0;
  std::function<ObjectivePtr(std::uint64_t seed)> sample_objective;
  InitSampler init;
  std::size_t episodes = 10;
  RuleSpec rule;
  std::string name;
};

/// Random quadratics (kappa ~ U[kappa_lo, kappa_hi]) alternating with
/// trig-perturbed quadratics on odd seeds when `with_trig`.
TaskDistribution quadratic_distribution(Index d, double kappa_lo, double kappa_hi, bool with_trig,
                                        const NonconvexOptions& trig = {});

struct Episode {
  ObjectivePtr objective;
  Vector x0;
};
/// Episode k of a seeded estimate; seeds are split deterministically.
Episode sample_episode(const TaskDistribution& dist, std::uint64_t seed, std::size_t k);

/// Eager rollout of the configured rule on one episode. `innovation` may be
/// null (vanilla GD / SGD with the same stepsizes).
Trajectory episode_rollout(const TaskDistribution& dist, const Episode& ep,
                           std::shared_ptr<const LearnedInnovation> innovation, std::size_t steps,
                           const RecordOptions& record = {});

struct MetaLossEstimate {
  double mean = 0.0;
  std::vector<double> values;
};

MetaLossEstimate estimate_expected_metaloss(std::shared_ptr<const LearnedInnovation> innovation,
                                            const TaskDistribution& dist, const MetaLossConfig& config,
                                            std::uint64_t seed, unsigned jobs = 1);

struct MetaGradient {
  double loss = 0.0;
  Vector grad;
};

/// Unrolls `horizon` inner steps on a tape and returns dMetaLoss/dtheta.
/// `truncation` > 0 cuts the dependence of x_t on earlier steps every
/// `truncation` steps.
MetaGradient episode_meta_gradient(const InnovationConfig& cfg, const ParamVector& theta,
                                   const TaskDistribution& dist, const Episode& ep, const MetaLossConfig& config,
                                   std::size_t truncation = 0);

/// Same loss on the eager backend (used for finite-difference checks).
double episode_metaloss(const InnovationConfig& cfg, const ParamVector& theta, const TaskDistribution& dist,
                        const Episode& ep, const MetaLossConfig& config);

struct MetaTrainOptions {
  std::size_t epochs = 40;
  double outer_lr = 0.01;
  std::uint64_t seed = 0;
  std::size_t truncation = 0;
  unsigned jobs = 1;
  /// Called after every epoch with the updated parameters; returns the
  /// checkpoint reference recorded in the report (may be empty).
  std::function<std::string(std::size_t epoch, const ParamVector& theta)> on_epoch;
  std::function<void(const std::string&)> log;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double mean_metaloss = 0.0;
  double grad_norm = 0.0;
  double wall_seconds = 0.0;
  bool skipped = false;
  std::string checkpoint;
};

struct MetaTrainReport {
  std::vector<EpochRecord> epochs;
  /// epoch, mean_metaloss, grad_norm, wall_seconds, skipped, checkpoint
  CsvTable csv() const;
};

struct MetaTrainResult {
  ParamVector theta;
  MetaTrainReport report;
};

/// One outer Adam step per epoch on the mean episode meta-gradient. A
/// non-finite meta-gradient skips the update.
MetaTrainResult meta_train(const InnovationConfig& cfg, const ParamVector& theta0, const TaskDistribution& dist,
                           const MetaLossConfig& config, const MetaTrainOptions& options);

/// Runs fn(i) for i in [0, n) on up to `jobs` threads.
void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& fn);

}  // namespace cl2o
