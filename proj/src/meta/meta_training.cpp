#include "cl2o/meta/meta_training.hpp"

#include "cl2o/baselines/baselines.hpp"
#include "cl2o/numcore/random.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

namespace cl2o {

MetaLossConfig MetaLossConfig::discounted(std::size_t horizon, double decay, double alpha) {
  if (horizon < 1) throw InvalidArgument("metaloss: horizon must be >= 1");
  MetaLossConfig c;
  c.horizon = horizon;
  c.alpha.assign(horizon + 1, alpha);
  c.gamma.resize(horizon + 1);
  for (std::size_t t = 0; t <= horizon; ++t) c.gamma[t] = std::pow(decay, static_cast<double>(horizon - t));
  c.validate();
  return c;
}

void MetaLossConfig::validate() const {
  if (horizon < 1) throw InvalidArgument("metaloss: horizon must be >= 1");
  if (alpha.size() != horizon + 1 || gamma.size() != horizon + 1) {
    throw InvalidArgument("metaloss: alpha and gamma need horizon + 1 entries");
  }
  for (std::size_t t = 0; t <= horizon; ++t) {
    if (!(alpha[t] >= 0.0) || !(gamma[t] >= 0.0)) throw InvalidArgument("metaloss: weights must be nonnegative");
  }
}

double metaloss(const MetaLossConfig& config, const Trajectory& traj, const Objective& obj) {
  config.validate();
  if (traj.f.size() < config.horizon + 1 || traj.grad_norm.size() < config.horizon + 1) {
    throw InvalidArgument("metaloss: trajectory has " + std::to_string(traj.f.size()) + " records, need " +
                          std::to_string(config.horizon + 1));
  }
  const std::size_t m = traj.kind == RuleKind::Cyclic ? obj.num_components() : 0;
  if (traj.kind == RuleKind::Cyclic && m == 0) throw InvalidArgument("metaloss: cyclic run on unsplit objective");
  double total = 0.0;
  for (std::size_t t = 0; t <= config.horizon; ++t) {
    const double w = m ? obj.component_weight(t % m) : 1.0;
    const double gn = traj.grad_norm[t] / w;
    const double f = traj.f[t] / w;
    if (config.alpha[t] != 0.0) total += config.alpha[t] * (gn * gn);
    if (config.gamma[t] != 0.0) total += config.gamma[t] * f;
  }
  return total;
}

InitKind parse_init(const std::string& name) {
  if (name == "uniform") return InitKind::Uniform;
  if (name == "gaussian") return InitKind::Gaussian;
  throw InvalidArgument("unknown init '" + name + "' (expected uniform | gaussian)");
}

std::string to_string(InitKind kind) { return kind == InitKind::Uniform ? "uniform" : "gaussian"; }

Vector InitSampler::sample(std::uint64_t seed, Index dim) const {
  Rng rng(derive_seed(seed, 0x1417));
  if (kind == InitKind::Uniform) {
    if (!(high > low)) throw InvalidArgument("uniform init: need high > low");
    return as_vector(random_uniform(rng, dim, 1, low, high));
  }
  if (!(stddev > 0.0)) throw InvalidArgument("gaussian init: stddev must be > 0");
  return as_vector(random_normal(rng, dim, 1, stddev));
}

double InitSampler::rms() const {
  if (kind == InitKind::Uniform) return std::sqrt((low * low + low * high + high * high) / 3.0);
  return stddev;
}

TaskDistribution quadratic_distribution(Index d, double kappa_lo, double kappa_hi, bool with_trig,
                                        const NonconvexOptions& trig) {
  if (!(kappa_lo >= 1.0 && kappa_hi >= kappa_lo)) throw InvalidArgument("quadratic distribution: need 1 <= lo <= hi");
  TaskDistribution dist;
  dist.dim = d;
  dist.name = with_trig ? "quadratic+trig" : "quadratic";
  dist.sample_objective = [=](std::uint64_t seed) -> ObjectivePtr {
    Rng rng(derive_seed(seed, 0x6a77));
    const double kappa = std::uniform_real_distribution<double>(kappa_lo, kappa_hi)(rng);
    if (with_trig && (seed & 1U)) {
      NonconvexOptions o = trig;
      o.condition_number = kappa;
      return make_nonconvex_family(d, NonconvexKind::TrigPerturbedQuadratic, seed, o);
    }
    return make_quadratic(d, kappa, seed);
  };
  return dist;
}

Episode sample_episode(const TaskDistribution& dist, std::uint64_t seed, std::size_t k) {
  Episode ep;
  ep.objective = dist.sample_objective(derive_seed(seed, 0x0b1e, k));
  if (!ep.objective || ep.objective->dim() != dist.dim) {
    throw InvalidArgument("task distribution produced an objective of the wrong dimension");
  }
  ep.x0 = dist.init.sample(derive_seed(seed, 0xe915, k), dist.dim);
  return ep;
}

namespace {

double full_eta(const RuleSpec& spec, const Objective& obj) {
  const double beta = obj.beta();
  if (!(beta > 0.0)) throw CertificateViolation("full-gradient rule needs a positive smoothness constant");
  return spec.eta_factor / beta;
}

template <ops::Value V>
V step_loss(const MetaLossConfig& c, std::size_t t, const StepEval<V>& e, V acc, bool first) {
  auto add = [&](V term) {
    if (first) {
      first = false;
      acc = term;
    } else {
      acc = ops::add(acc, term);
    }
  };
  const double w = e.weight;
  if (c.alpha[t] != 0.0) add(ops::scale(ops::squared_norm(e.g), c.alpha[t] / (w * w)));
  if (c.gamma[t] != 0.0) add(ops::scale(e.f, c.gamma[t] / w));
  if (first) acc = ops::scale(e.f, 0.0);
  return acc;
}

template <ops::Value V>
V unroll(const InnovationConfig& cfg, const V& theta, const ParamLayout& layout, const TaskDistribution& dist,
         const Episode& ep, const MetaLossConfig& config, std::size_t truncation) {
  const InnovationWeights<V> w = unpack_innovation<V>(cfg, layout, theta);
  const Objective& obj = *ep.objective;
  const V x0 = ops::constant_like(theta, Matrix(ep.x0));
  const RuleSpec& rs = dist.rule;
  std::optional<Stepper<V>> st;
  if (rs.kind == RuleKind::Full) {
    st.emplace(RuleKind::Full, full_eta(rs, obj), std::nullopt, obj, &cfg, &w, nullptr, x0);
  } else {
    st.emplace(RuleKind::Cyclic, 0.0, StepsizeSchedule(rs.eta0, rs.power), obj, &cfg, &w, nullptr, x0);
  }
  V loss;
  bool first = true;
  for (std::size_t t = 0; t <= config.horizon; ++t) {
    const StepEval<V> e = st->evaluate();
    loss = step_loss(config, t, e, loss, first);
    first = false;
    if (t == config.horizon) break;
    st->advance(e);
    if (truncation > 0 && (t + 1) % truncation == 0) st->reset_x(ops::detach(st->x()));
  }
  return loss;
}

}  // namespace

Trajectory episode_rollout(const TaskDistribution& dist, const Episode& ep,
                           std::shared_ptr<const LearnedInnovation> innovation, std::size_t steps,
                           const RecordOptions& record) {
  const RuleSpec& rs = dist.rule;
  if (rs.kind == RuleKind::Full) {
    FullGradientRule rule;
    rule.eta = full_eta(rs, *ep.objective);
    rule.unsafe = rs.unsafe;
    if (innovation) rule.innovation = InnovationSource::from(std::move(innovation));
    return rollout(rule, *ep.objective, ep.x0, steps, record);
  }
  CyclicRule rule{StepsizeSchedule(rs.eta0, rs.power), {}};
  if (innovation) rule.innovation = InnovationSource::from(std::move(innovation));
  return rollout(rule, *ep.objective, ep.x0, steps, record);
}

MetaLossEstimate estimate_expected_metaloss(std::shared_ptr<const LearnedInnovation> innovation,
                                            const TaskDistribution& dist, const MetaLossConfig& config,
                                            std::uint64_t seed, unsigned jobs) {
  if (dist.episodes < 1) throw InvalidArgument("estimate_expected_metaloss: episodes must be >= 1");
  MetaLossEstimate est;
  est.values.assign(dist.episodes, 0.0);
  RecordOptions rec;
  rec.states = rec.updates = rec.gradients = false;
  rec.probe_every = std::numeric_limits<std::size_t>::max();
  parallel_for(dist.episodes, jobs, [&](std::size_t k) {
    const Episode ep = sample_episode(dist, seed, k);
    const Trajectory tr = episode_rollout(dist, ep, innovation, config.horizon, rec);
    est.values[k] = tr.diverged ? std::numeric_limits<double>::infinity() : metaloss(config, tr, *ep.objective);
  });
  double sum = 0.0;
  for (double v : est.values) sum += v;
  est.mean = sum / static_cast<double>(est.values.size());
  return est;
}

MetaGradient episode_meta_gradient(const InnovationConfig& cfg, const ParamVector& theta,
                                   const TaskDistribution& dist, const Episode& ep, const MetaLossConfig& config,
                                   std::size_t truncation) {
  config.validate();
  ad::Tape tape;
  const ad::Var th = tape.input(Matrix(theta.entries()));
  const ad::Var loss = unroll<ad::Var>(cfg, th, theta.layout(), dist, ep, config, truncation);
  MetaGradient mg;
  mg.loss = ops::scalar(loss);
  mg.grad = as_vector(tape.gradient(loss, th));
  return mg;
}

double episode_metaloss(const InnovationConfig& cfg, const ParamVector& theta, const TaskDistribution& dist,
                        const Episode& ep, const MetaLossConfig& config) {
  config.validate();
  const Matrix th = theta.entries();
  return ops::scalar(unroll<Matrix>(cfg, th, theta.layout(), dist, ep, config, 0));
}

CsvTable MetaTrainReport::csv() const {
  CsvTable t({"epoch", "mean_metaloss", "grad_norm", "wall_seconds", "skipped", "checkpoint"});
  for (const auto& e : epochs) {
    t.add_row({std::to_string(e.epoch), CsvTable::cell(e.mean_metaloss), CsvTable::cell(e.grad_norm),
               CsvTable::cell(e.wall_seconds), e.skipped ? "1" : "0", e.checkpoint});
  }
  return t;
}

void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(n, std::max(1U, jobs)));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

MetaTrainResult meta_train(const InnovationConfig& cfg, const ParamVector& theta0, const TaskDistribution& dist,
                           const MetaLossConfig& config, const MetaTrainOptions& options) {
  config.validate();
  if (!(theta0.layout() == innovation_layout(cfg))) {
    throw InvalidArgument("meta_train: parameter layout does not match the innovation configuration");
  }
  if (dist.episodes < 1) throw InvalidArgument("meta_train: episodes must be >= 1");
  MetaTrainResult res;
  res.theta = theta0;
  BaselineOptimizer outer{BaselineKind::Adam, {}};
  outer.hyper.lr = options.outer_lr;
  BaselineState adam = init_baseline_state(outer, theta0.size());

  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    const std::uint64_t epoch_seed = derive_seed(options.seed, 0xe90c, epoch);
    std::vector<MetaGradient> grads(dist.episodes);
    std::vector<char> failed(dist.episodes, 0);
    parallel_for(dist.episodes, options.jobs, [&](std::size_t k) {
      try {
        const Episode ep = sample_episode(dist, epoch_seed, k);
        grads[k] = episode_meta_gradient(cfg, res.theta, dist, ep, config, options.truncation);
      } catch (const ad::NonFiniteError&) {
        failed[k] = 1;
      }
    });
    EpochRecord rec;
    rec.epoch = epoch;
    Vector g = Vector::Zero(res.theta.size());
    double loss = 0.0;
    bool finite = true;
    for (std::size_t k = 0; k < dist.episodes; ++k) {
      if (failed[k]) {
        finite = false;
        continue;
      }
      loss += grads[k].loss;
      g += grads[k].grad;
    }
    const double inv = 1.0 / static_cast<double>(dist.episodes);
    g *= inv;
    rec.mean_metaloss = finite ? loss * inv : std::numeric_limits<double>::quiet_NaN();
    rec.grad_norm = finite ? g.norm() : std::numeric_limits<double>::quiet_NaN();
    if (!finite || !g.allFinite() || !std::isfinite(rec.mean_metaloss)) {
      rec.skipped = true;
      if (options.log) options.log("epoch " + std::to_string(epoch) + ": non-finite meta-gradient, update skipped");
    } else {
      res.theta.entries() += baseline_step(outer, g, adam);
    }
    if (options.on_epoch) rec.checkpoint = options.on_epoch(epoch, res.theta);
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (options.log) {
      options.log("epoch " + std::to_string(epoch) + " metaloss " + format_double(rec.mean_metaloss) +
                  " |grad| " + format_double(rec.grad_norm));
    }
    res.report.epochs.push_back(rec);
  }
  return res;
}

}  // namespace cl2o
