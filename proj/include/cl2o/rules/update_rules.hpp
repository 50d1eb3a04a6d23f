#pragma once

#include "cl2o/objectives/objective.hpp"
#include "cl2o/operators/innovation.hpp"

#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace cl2o {

/// eta_e = eta0 / (e + 1)^p with p in (0.5, 1]: square-summable, not summable.
class StepsizeSchedule {
 public:
  explicit StepsizeSchedule(double eta0, double p = 1.0);
  double eta0() const { return eta0_; }
  double p() const { return p_; }
  double at(std::size_t epoch) const;

 private:
  double eta0_;
  double p_;
};

struct ScheduleEnergy {
  double sum_sq = 0.0;  // sum_e eta_e^2
  double sum = 0.0;     // sum_e eta_e
};
/// Compensated partial sums over e = 0..horizon-1.
ScheduleEnergy schedule_energy(const StepsizeSchedule& schedule, std::size_t horizon);

/// Trained (or untrained) Z + Omega.
struct LearnedInnovation {
  InnovationConfig config;
  ParamVector theta;
};

/// Open-loop or state-feedback innovation supplied by the caller (tests,
/// monitors). Receives t, x_t and the gradient used at t.
using ScriptedInnovation = std::function<Vector(std::size_t t, const Vector& x, const Vector& g)>;

struct InnovationSource {
  std::shared_ptr<const LearnedInnovation> learned;
  ScriptedInnovation scripted;

  bool none() const { return !learned && !scripted; }
  static InnovationSource from(std::shared_ptr<const LearnedInnovation> l) { return {std::move(l), {}}; }
  static InnovationSource from(ScriptedInnovation s) { return {nullptr, std::move(s)}; }
};

enum class RuleKind { Full, Cyclic };

/// u_t = -eta grad f(x_t) + v_t, v_t = |z_t| omega_t / |omega_t|.
struct FullGradientRule {
  double eta = 0.0;
  InnovationSource innovation;
  /// Skip the eta < 1/beta certificate check.
  bool unsafe = false;
};

/// x_{t+1} = x_t - eta_e (grad f_tau(x_t) + v_t), v_t = eta_e |z_t| omega_t / |omega_t|,
/// tau = t mod M, e = floor(t / M).
struct CyclicRule {
  StepsizeSchedule schedule{0.1};
  InnovationSource innovation;
};

/// Throws CertificateViolation unless 0 < eta < 1/beta (or rule.unsafe).
void check_binding(const FullGradientRule& rule, const Objective& obj);
/// Throws InvalidArgument when the objective has no components.
void check_binding(const CyclicRule& rule, const Objective& obj);

inline constexpr double kDivergenceThreshold = 1e12;

struct RecordOptions {
  bool states = true;     // x_t
  bool updates = true;    // u_t, v_t
  bool gradients = true;  // gradient used at t (partial for cyclic runs)
  /// Full-gradient probe period for cyclic runs (0: every M steps).
  std::size_t probe_every = 0;
};

/// Closed-loop record of a rollout. Norm columns are always present;
/// vector columns only when requested.
struct Trajectory {
  RuleKind kind = RuleKind::Full;
  std::string objective;  // descriptor
  Index dim = 0;
  std::size_t components = 0;  // M for cyclic runs
  std::size_t steps = 0;       // number of updates actually taken

  std::vector<Vector> x;  // steps + 1
  std::vector<Vector> u;  // steps
  std::vector<Vector> v;  // steps
  std::vector<Vector> g;  // steps + 1

  std::vector<double> f;          // loss (estimate) in force at t, steps + 1
  std::vector<double> grad_norm;  // |g_t|, steps + 1
  std::vector<double> u_norm;     // steps
  std::vector<double> v_norm;     // steps
  std::vector<double> z_norm;     // steps (0 without learned innovation)
  std::vector<double> eta;        // stepsize applied at t, steps
  std::vector<double> grad_energy;    // partial sums of |g_t|^2, steps + 1
  std::vector<double> update_energy;  // partial sums of |u_t|^2, steps

  struct Probe {
    std::size_t t;
    double f;
    Vector grad;
  };
  std::vector<Probe> probes;  // full-gradient probes (cyclic runs)

  bool diverged = false;
  std::optional<std::size_t> diverged_at;

  /// |grad f(x_t)| from a native full-gradient record or a probe.
  std::optional<double> full_grad_norm(std::size_t t) const;
};

/// Per-step evaluation at the current iterate: gradient and loss used by
/// the rule, component index, stepsize and component weight.
template <ops::Value V>
struct StepEval {
  V g;
  V f;
  std::size_t component = 0;
  double eta = 0.0;
  double weight = 1.0;
};

template <ops::Value V>
struct StepResult {
  V u;
  V v;
  double z_norm = 0.0;
};

/// Shared step logic for both backends. The eager rollout and the taped
/// meta-training unroll both drive this class.
template <ops::Value V>
class Stepper {
 public:
  /// `weights` may be null (no learned innovation); `scripted` only applies
  /// on the eager backend.
  Stepper(RuleKind kind, double eta, std::optional<StepsizeSchedule> schedule, const Objective& obj,
          const InnovationConfig* cfg, const InnovationWeights<V>* weights, const ScriptedInnovation* scripted,
          V x0);

  const V& x() const { return x_; }
  std::size_t t() const { return t_; }
  /// Gradient and loss at the current iterate.
  StepEval<V> evaluate() const;
  /// Applies the update built from `eval`, advancing t.
  StepResult<V> advance(const StepEval<V>& eval);
  /// Replaces the current iterate (used to cut the tape).
  void reset_x(V x) { x_ = std::move(x); }

 private:
  RuleKind kind_;
  double eta_;
  std::optional<StepsizeSchedule> schedule_;
  const Objective& obj_;
  const InnovationConfig* cfg_;
  const InnovationWeights<V>* w_;
  const ScriptedInnovation* scripted_;
  V x0_;
  V x_;
  V u_prev_;
  std::optional<RecurrentState<V>> z_state_;
  std::size_t t_ = 0;
  std::size_t m_ = 1;
};

/// Eager rollout state used by step_full / step_cyclic.
class RolloutState {
 public:
  RolloutState(const FullGradientRule& rule, const Objective& obj, const Vector& x0);
  RolloutState(const CyclicRule& rule, const Objective& obj, const Vector& x0);
  RolloutState(const RolloutState&) = delete;
  RolloutState& operator=(const RolloutState&) = delete;

  Vector x() const { return as_vector(stepper_->x()); }
  std::size_t t() const { return stepper_->t(); }
  Stepper<Matrix>& stepper() { return *stepper_; }

 private:
  std::shared_ptr<const LearnedInnovation> learned_;
  ScriptedInnovation scripted_;
  std::optional<InnovationWeights<Matrix>> weights_;
  std::unique_ptr<Stepper<Matrix>> stepper_;
};

struct StepRecord {
  Vector g;
  double f = 0.0;
  Vector u;
  Vector v;
  double eta = 0.0;
  std::size_t component = 0;
  double z_norm = 0.0;
};

/// Any eager closed-loop iteration (learned rules, baselines) driven by
/// `drive` into a Trajectory.
class ClosedLoop {
 public:
  virtual ~ClosedLoop() = default;
  virtual const Matrix& x() const = 0;
  virtual StepEval<Matrix> evaluate() const = 0;
  virtual StepResult<Matrix> advance(const StepEval<Matrix>& eval) = 0;
};

/// Records a rollout of `loop`; stops early (flagging divergence) when an
/// iterate leaves |x| <= 1e12 or becomes non-finite.
Trajectory drive(ClosedLoop& loop, RuleKind kind, const Objective& obj, std::size_t steps,
                 const RecordOptions& record);

StepRecord step_full(RolloutState& state);
StepRecord step_cyclic(RolloutState& state);

Trajectory rollout(const FullGradientRule& rule, const Objective& obj, const Vector& x0, std::size_t steps,
                   const RecordOptions& record = {});
Trajectory rollout(const CyclicRule& rule, const Objective& obj, const Vector& x0, std::size_t steps,
                   const RecordOptions& record = {});

/// Columns t, grad_norm, f, u_norm, v_norm, flags; 17 significant digits.
std::string trajectory_csv(const Trajectory& traj);
void write_trajectory_csv(const Trajectory& traj, const std::string& path);

/// "CL2O" binary format (see README); vector columns must be recorded.
std::string serialize_trajectory(const Trajectory& traj);
Trajectory deserialize_trajectory(const std::string& bytes);
void save_trajectory(const Trajectory& traj, const std::string& path);
Trajectory load_trajectory(const std::string& path);

// ---- template definitions ----

template <ops::Value V>
Stepper<V>::Stepper(RuleKind kind, double eta, std::optional<StepsizeSchedule> schedule, const Objective& obj,
                    const InnovationConfig* cfg, const InnovationWeights<V>* weights,
                    const ScriptedInnovation* scripted, V x0)
    : kind_(kind),
      eta_(eta),
      schedule_(std::move(schedule)),
      obj_(obj),
      cfg_(cfg),
      w_(weights),
      scripted_(scripted),
      x0_(x0),
      x_(std::move(x0)) {
  const Index d = obj.dim();
  if (ops::value(x_).rows() != d || ops::value(x_).cols() != 1) {
    throw InvalidArgument("rollout: x0 must be a column of length " + std::to_string(d));
  }
  if (kind_ == RuleKind::Cyclic) {
    if (!schedule_) throw InvalidArgument("cyclic rule requires a stepsize schedule");
    m_ = obj.num_components();
    if (m_ == 0) throw InvalidArgument("cyclic rule requires an objective with components");
  }
  if (w_ != nullptr) {
    if (cfg_ == nullptr || cfg_->d != d) throw InvalidArgument("innovation dimension does not match the objective");
    z_state_ = zero_state<V>(*cfg_, x_);
  }
  u_prev_ = ops::constant_like(x_, Matrix::Zero(d, 1));
}

template <ops::Value V>
StepEval<V> Stepper<V>::evaluate() const {
  StepEval<V> e;
  if (kind_ == RuleKind::Full) {
    e.g = obj_.grad(x_);
    e.f = obj_.eval(x_);
    e.eta = eta_;
    e.weight = 1.0;
  } else {
    e.component = t_ % m_;
    e.eta = schedule_->at(t_ / m_);
    e.g = obj_.component_grad(e.component, x_);
    e.f = obj_.component_eval(e.component, x_);
    e.weight = obj_.component_weight(e.component);
  }
  return e;
}

template <ops::Value V>
StepResult<V> Stepper<V>::advance(const StepEval<V>& e) {
  StepResult<V> r;
  const Index d = ops::value(x_).rows();
  bool have_v = false;
  if (w_ != nullptr) {
    const V input = t_ == 0 ? x0_ : ops::constant_like(x_, Matrix::Zero(d, 1));
    const V z = z_step(*cfg_, *w_, *z_state_, input);
    r.z_norm = ops::value(z).norm();
    // partial quantities are rescaled to full-objective estimates for the features
    const double inv_w = 1.0 / e.weight;
    const V g_feat = e.weight == 1.0 ? e.g : ops::scale(e.g, inv_w);
    const V f_feat = e.weight == 1.0 ? e.f : ops::scale(e.f, inv_w);
    const V omega = feature_network(*cfg_, *w_, assemble_features(x_, g_feat, f_feat, u_prev_));
    r.v = kind_ == RuleKind::Full ? innovation_full(z, omega) : innovation_batch(z, omega, e.eta);
    have_v = true;
  } else if (scripted_ != nullptr && *scripted_) {
    if constexpr (std::is_same_v<V, Matrix>) {
      const Vector v = (*scripted_)(t_, as_vector(x_), as_vector(e.g));
      if (v.size() != d) throw InvalidArgument("scripted innovation returned the wrong dimension");
      r.v = v;
      have_v = true;
    } else {
      throw InvalidArgument("scripted innovations are not differentiable");
    }
  }
  if (!have_v) r.v = ops::constant_like(x_, Matrix::Zero(d, 1));

  if (kind_ == RuleKind::Full) {
    r.u = have_v ? ops::add(ops::scale(e.g, -e.eta), r.v) : ops::scale(e.g, -e.eta);
  } else {
    r.u = have_v ? ops::scale(ops::add(e.g, r.v), -e.eta) : ops::scale(e.g, -e.eta);
  }
  x_ = ops::add(x_, r.u);
  u_prev_ = r.u;
  ++t_;
  return r;
}

}  // namespace cl2o
