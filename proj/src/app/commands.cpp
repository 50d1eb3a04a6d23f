#include "cl2o/app/commands.hpp"

#include "cl2o/baselines/baselines.hpp"
#include "cl2o/data/binary_io.hpp"
#include "cl2o/lab/convergence_lab.hpp"
#include "cl2o/numcore/random.hpp"
#include "cl2o/objectives/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <thread>

#ifndef CL2O_VERSION
#define CL2O_VERSION "0.0.0"
#endif

namespace cl2o {

namespace fs = std::filesystem;

const char* code_version() { return CL2O_VERSION; }

namespace {

void say(const LogFn& log, const std::string& msg) {
  if (log) log(msg);
}

StateActivation parse_state_activation(const std::string& name) {
  if (name == "tanh") return StateActivation::Tanh;
  if (name == "identity") return StateActivation::Identity;
  throw ConfigError("innovation.state_activation: expected tanh or identity, got '" + name + "'");
}

InitSampler init_from(const RunConfig& cfg) {
  InitSampler init;
  init.kind = parse_init(cfg.get("init.kind"));
  init.low = cfg.get_double("init.low");
  init.high = cfg.get_double("init.high");
  init.stddev = cfg.get_double("init.stddev");
  return init;
}

MetaLossConfig metaloss_from(const RunConfig& cfg) {
  return MetaLossConfig::discounted(cfg.get_size("meta.horizon"), cfg.get_double("meta.decay"),
                                    cfg.get_double("meta.alpha"));
}

fs::path out_dir(const RunConfig& cfg) {
  const fs::path out(cfg.get("out"));
  if (out.empty()) throw ConfigError("config key 'out' must not be empty");
  fs::create_directories(out);
  return out;
}

Checkpoint require_checkpoint(const CommandContext& ctx) {
  if (ctx.checkpoint.empty()) throw ConfigError("this command needs --checkpoint");
  if (!fs::exists(ctx.checkpoint)) throw ConfigError("checkpoint '" + ctx.checkpoint + "' not found");
  return load_checkpoint(ctx.checkpoint);
}

std::string meta_value(const Checkpoint* ckpt, const std::string& key) {
  if (ckpt == nullptr) return {};
  const auto it = ckpt->meta.find(key);
  return it == ckpt->meta.end() ? std::string() : it->second;
}

std::string dataset_hash(const TaskSetup& setup) {
  if (!setup.data) return "none";
  return setup.data->meta_train->content_hash() + "," + setup.data->bench_train->content_hash() + "," +
         setup.data->eval->content_hash();
}

void write_manifest(const fs::path& dir, const std::string& command, const CommandContext& ctx,
                    const std::string& data_hash, const KeyValues& extra) {
  KeyValues m;
  m.set("command", command);
  m.set("code_version", code_version());
  m.set("config_hash", ctx.config.hash());
  m.set("seed", ctx.config.get("seed"));
  m.set("dataset_hash", data_hash);
  if (!ctx.checkpoint.empty()) {
    m.set("checkpoint", ctx.checkpoint);
    m.set("checkpoint_hash", fnv1a_hex(bin::read_file_bytes(ctx.checkpoint)));
  }
  for (const auto& [k, v] : extra.entries()) m.set(k, v);
  const KeyValues all = ctx.config.to_key_values();
  for (const auto& [k, v] : all.entries()) m.set("config." + k, v);
  write_results(m, (dir / (command + "_manifest.txt")).string());
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? std::nan("") : s / static_cast<double>(v.size());
}

// Population standard deviation (0 for a single run).
double std_of(const std::vector<double>& v) {
  if (v.empty()) return std::nan("");
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size()));
}

std::vector<std::size_t> report_steps(const RunConfig& cfg, std::size_t steps) {
  std::vector<std::size_t> out;
  for (double r : cfg.get_list("bench.report_steps")) {
    if (r < 0 || r != std::floor(r)) throw ConfigError("bench.report_steps: expected nonnegative integers");
    const auto t = static_cast<std::size_t>(r);
    if (t > steps) throw ConfigError("bench.report_steps: step " + std::to_string(t) + " exceeds bench.steps");
    out.push_back(t);
  }
  return out;
}

}  // namespace

unsigned resolve_jobs(const RunConfig& cfg) {
  const std::size_t jobs = cfg.get_size("jobs");
  if (jobs > 0) return static_cast<unsigned>(jobs);
  return std::max(1U, std::thread::hardware_concurrency());
}

ClassifierData load_classifier_data(const RunConfig& cfg) {
  const std::size_t n_train = cfg.get_size("data.train_images");
  const std::size_t n_eval = cfg.get_size("data.eval_images");
  const double fraction = cfg.get_double("data.meta_fraction");
  if (n_train < 2 || n_eval < 1) throw ConfigError("need at least 2 training and 1 evaluation images");
  if (!(fraction > 0.0 && fraction < 1.0)) throw ConfigError("data.meta_fraction must lie in (0, 1)");
  DeskData desk =
      load_desk_data(cfg.get("data.dir"), n_train, n_eval, cfg.get_u64("data.seed"), cfg.get_double("data.separation"));
  const Index n = desk.train.size();
  const Index n_meta = std::clamp<Index>(static_cast<Index>(std::llround(fraction * static_cast<double>(n))), 1, n - 1);
  ClassifierData out;
  out.meta_train = std::make_shared<const Dataset>(desk.train.slice(0, n_meta));
  out.bench_train = std::make_shared<const Dataset>(desk.train.slice(n_meta, n));
  out.eval = std::make_shared<const Dataset>(std::move(desk.eval));
  out.synthetic = desk.synthetic;
  return out;
}

std::vector<double> tuning_grid(const RunConfig& cfg) {
  if (cfg.get("tune.grid") != "auto") {
    auto grid = cfg.get_list("tune.grid");
    if (grid.empty()) throw ConfigError("tune.grid is empty");
    return grid;
  }
  if (cfg.get("task") == "classifier") {
    std::vector<double> grid;
    for (int i = 0; i <= 18; ++i) grid.push_back(std::pow(10.0, -4.0 + i / 3.0));
    return grid;
  }
  return default_lr_grid();
}

TaskSetup build_task(const RunConfig& cfg, const Checkpoint* ckpt, const LogFn& log) {
  TaskSetup s;
  s.task = cfg.get("task");
  const std::uint64_t seed = cfg.get_u64("seed");
  const InitSampler init = init_from(cfg);
  if (s.task == "quadratic") {
    NonconvexOptions trig;
    trig.amplitude = cfg.get_double("trig.amplitude");
    trig.frequency = cfg.get_double("trig.frequency");
    s.dist = quadratic_distribution(static_cast<Index>(cfg.get_size("quadratic.dim")), cfg.get_double("quadratic.kappa_lo"),
                                    cfg.get_double("quadratic.kappa_hi"), cfg.get_bool("quadratic.trig"), trig);
    s.dist.rule.kind = RuleKind::Full;
    const std::string recorded = meta_value(ckpt, "rule.eta_factor");
    s.dist.rule.eta_factor = recorded.empty() ? cfg.get_double("rule.eta_factor") : parse_double(recorded, "eta_factor");
    s.resolved.set("rule.eta_factor", s.dist.rule.eta_factor);
  } else if (s.task == "classifier") {
    s.data = load_classifier_data(cfg);
    if (s.data->synthetic) say(log, "MNIST files not found; using the synthetic stand-in");
    const Activation act = parse_activation(cfg.get("classifier.activation"));
    const std::size_t minibatch = cfg.get_size("classifier.minibatch");
    auto obj = make_classifier_objective(s.data->meta_train, act, minibatch, cfg.get_u64("data.seed"));
    s.classifier = obj;
    s.dist.dim = obj->dim();
    s.dist.name = "classifier";
    // Every episode reshuffles the minibatch partition.
    s.dist.sample_objective = [data = s.data->meta_train, act, minibatch](std::uint64_t episode_seed) -> ObjectivePtr {
      return make_classifier_objective(data, act, minibatch, episode_seed);
    };
    s.dist.rule.kind = RuleKind::Cyclic;
    s.dist.rule.power = cfg.get_double("rule.power");
    const std::string recorded = meta_value(ckpt, "rule.eta0");
    if (!recorded.empty()) {
      s.dist.rule.eta0 = parse_double(recorded, "checkpoint rule.eta0");
    } else if (cfg.get("rule.eta0") == "auto") {
      BaselineOptimizer sgd{BaselineKind::SGD, {}};
      sgd.hyper.sgd_power = s.dist.rule.power;
      std::vector<Vector> starts;
      for (std::size_t k = 0; k < cfg.get_size("tune.starts"); ++k) {
        starts.push_back(init.sample(derive_seed(seed, 0x7a11, k), obj->dim()));
      }
      const TuneResult t =
          tune_learning_rate(sgd, *obj, tuning_grid(cfg), cfg.get_size("tune.budget"), starts, GradientMode::Cyclic);
      s.dist.rule.eta0 = t.lr;
      say(log, "eta0 = " + format_double(t.lr) + " (tuned SGD rate)");
    } else {
      s.dist.rule.eta0 = cfg.get_double("rule.eta0");
    }
    s.resolved.set("rule.eta0", s.dist.rule.eta0);
    s.resolved.set("rule.power", s.dist.rule.power);
  } else {
    throw ConfigError("task: expected quadratic or classifier, got '" + s.task + "'");
  }
  s.dist.rule.unsafe = cfg.get_bool("rule.unsafe_stepsize");
  s.dist.init = init;
  s.dist.episodes = cfg.get_size("meta.episodes");

  if (ckpt != nullptr) {
    if (ckpt->config.d != s.dist.dim) {
      throw ConfigError("checkpoint dimension " + std::to_string(ckpt->config.d) + " does not match the task (" +
                        std::to_string(s.dist.dim) + ")");
    }
    s.innovation = ckpt->config;
  } else {
    s.innovation.d = s.dist.dim;
    s.innovation.n = static_cast<Index>(cfg.get_size("innovation.n"));
    s.innovation.r = static_cast<Index>(cfg.get_size("innovation.r"));
    s.innovation.gamma = cfg.get_double("innovation.gamma");
    s.innovation.hidden = static_cast<Index>(cfg.get_size("innovation.hidden"));
    s.innovation.activation = parse_state_activation(cfg.get("innovation.state_activation"));
    s.innovation.input_scale = 1.0 / init.rms();
    try {
      s.innovation.validate();
    } catch (const InvalidArgument& e) {
      throw ConfigError(e.what());
    }
  }
  return s;
}

// ---- train ----

int cmd_train(const CommandContext& ctx) {
  const RunConfig& cfg = ctx.config;
  const fs::path out = out_dir(cfg);
  const TaskSetup setup = build_task(cfg, nullptr, ctx.log);
  const std::uint64_t seed = cfg.get_u64("seed");
  const ParamVector theta0 =
      init_innovation_params(setup.innovation, derive_seed(seed, 0x7e7a), cfg.get_double("innovation.param_scale"));
  const MetaLossConfig ml = metaloss_from(cfg);

  std::map<std::string, std::string> meta;
  meta["task"] = setup.task;
  meta["rule.kind"] = setup.dist.rule.kind == RuleKind::Full ? "full" : "cyclic";
  for (const auto& [k, v] : setup.resolved.entries()) meta[k] = v;
  meta["config_hash"] = cfg.hash();
  meta["code_version"] = code_version();

  fs::create_directories(out / "checkpoints");
  auto save_epoch = [&](std::size_t epoch, const ParamVector& theta) {
    char name[64];
    std::snprintf(name, sizeof name, "checkpoints/epoch-%04zu.cl2c", epoch);
    Checkpoint ck{setup.innovation, theta, meta};
    ck.meta["epoch"] = std::to_string(epoch);
    save_checkpoint(ck, (out / name).string());
    return std::string(name);
  };
  save_epoch(0, theta0);

  MetaTrainOptions opts;
  opts.epochs = cfg.get_size("meta.epochs");
  opts.outer_lr = cfg.get_double("meta.outer_lr");
  opts.seed = seed;
  opts.truncation = cfg.get_size("meta.truncation");
  opts.jobs = resolve_jobs(cfg);
  opts.log = ctx.log;
  opts.on_epoch = [&](std::size_t epoch, const ParamVector& theta) { return save_epoch(epoch + 1, theta); };
  const MetaTrainResult res = meta_train(setup.innovation, theta0, setup.dist, ml, opts);

  Checkpoint final_ck{setup.innovation, res.theta, meta};
  final_ck.meta["epoch"] = std::to_string(opts.epochs);
  save_checkpoint(final_ck, (out / "checkpoint.cl2c").string());
  write_results(res.report.csv(), (out / "train_epochs.csv").string());

  KeyValues extra = setup.resolved;
  extra.set("meta.gradient", opts.truncation == 0 ? "full unroll" : "truncated every " + std::to_string(opts.truncation));
  write_manifest(out, "train", ctx, dataset_hash(setup), extra);
  say(ctx.log, "wrote " + (out / "checkpoint.cl2c").string());
  return kExitOk;
}

// ---- evaluate ----

int cmd_evaluate(const CommandContext& ctx) {
  const RunConfig& cfg = ctx.config;
  const Checkpoint ckpt = require_checkpoint(ctx);
  const fs::path out = out_dir(cfg);
  TaskSetup setup = build_task(cfg, &ckpt, ctx.log);
  setup.dist.episodes = cfg.get_size("evaluate.episodes");
  if (setup.dist.episodes == 0) throw ConfigError("evaluate.episodes must be >= 1");
  const MetaLossConfig ml = metaloss_from(cfg);
  const std::uint64_t held_out = derive_seed(cfg.get_u64("seed"), 0xe7a1);
  const unsigned jobs = resolve_jobs(cfg);
  auto learned = std::make_shared<const LearnedInnovation>(LearnedInnovation{ckpt.config, ckpt.theta});
  const MetaLossEstimate l = estimate_expected_metaloss(learned, setup.dist, ml, held_out, jobs);
  const MetaLossEstimate v = estimate_expected_metaloss(nullptr, setup.dist, ml, held_out, jobs);

  CsvTable table({"episode", "metaloss_learned", "metaloss_vanilla"});
  for (std::size_t k = 0; k < l.values.size(); ++k) {
    table.add_row({std::to_string(k), CsvTable::cell(l.values[k]), CsvTable::cell(v.values[k])});
  }
  write_results(table, (out / "evaluate_episodes.csv").string());
  KeyValues rep;
  rep.set("episodes", static_cast<double>(setup.dist.episodes));
  rep.set("metaloss_learned", l.mean);
  rep.set("metaloss_vanilla", v.mean);
  rep.set("ratio", l.mean / v.mean);
  write_results(rep, (out / "evaluate.txt").string());
  write_manifest(out, "evaluate", ctx, dataset_hash(setup), setup.resolved);
  say(ctx.log, "metaloss learned " + format_double(l.mean) + " vanilla " + format_double(v.mean));
  return kExitOk;
}

// ---- bench ----

namespace {

struct BenchProblem {
  ObjectivePtr objective;
  Vector x0;
};

struct MethodRuns {
  std::string name;
  double lr = 0.0;
  std::vector<std::vector<double>> loss;  // [run][t], NaN after divergence
  std::vector<std::vector<double>> acc;   // [run][report index]
  std::size_t diverged = 0;
};

}  // namespace

int cmd_bench(const CommandContext& ctx) {
  const RunConfig& cfg = ctx.config;
  const Checkpoint ckpt = require_checkpoint(ctx);
  const fs::path out = out_dir(cfg);
  const TaskSetup setup = build_task(cfg, &ckpt, ctx.log);
  const std::size_t steps = cfg.get_size("bench.steps");
  const std::size_t seeds = cfg.get_size("bench.seeds");
  if (seeds == 0) throw ConfigError("bench.seeds must be >= 1");
  const auto reports = report_steps(cfg, steps);
  const auto baselines = parse_baseline_list(cfg.get("bench.baselines"));
  const std::uint64_t seed = cfg.get_u64("seed");
  const std::uint64_t bench_seed = derive_seed(seed, 0xbe4c);
  const bool classifier = setup.task == "classifier";
  const GradientMode mode = classifier ? GradientMode::Cyclic : GradientMode::Full;
  const unsigned jobs = resolve_jobs(cfg);

  // Baselines and the learned rule see the same objective, start and
  // minibatch stream for each seed.
  auto make_problem = [&](std::uint64_t s, std::size_t k) {
    if (!classifier) {
      Episode ep = sample_episode(setup.dist, s, k);
      return BenchProblem{ep.objective, ep.x0};
    }
    auto obj = make_classifier_objective(setup.data->bench_train, parse_activation(cfg.get("classifier.activation")),
                                         cfg.get_size("classifier.minibatch"), derive_seed(s, 0x0b1e, k));
    return BenchProblem{obj, setup.dist.init.sample(derive_seed(s, 0xe915, k), obj->dim())};
  };
  std::vector<BenchProblem> problems;
  for (std::size_t k = 0; k < seeds; ++k) problems.push_back(make_problem(bench_seed, k));

  auto as_classifier = [](const Objective& obj) -> const ClassifierObjective& { return static_cast<const ClassifierObjective&>(obj); };
  auto loss_of = [&](const Objective& obj, const Vector& x) {
    return classifier ? as_classifier(obj).mean_loss(x) : obj.value(x);
  };
  RecordOptions rec;
  rec.updates = rec.gradients = false;
  rec.probe_every = std::numeric_limits<std::size_t>::max();

  auto collect = [&](MethodRuns& m, const std::vector<Trajectory>& runs) {
    for (std::size_t k = 0; k < runs.size(); ++k) {
      const Trajectory& tr = runs[k];
      std::vector<double> loss(steps + 1, std::nan(""));
      for (std::size_t t = 0; t < tr.x.size() && t <= steps; ++t) loss[t] = loss_of(*problems[k].objective, tr.x[t]);
      std::vector<double> acc;
      for (std::size_t t : reports) {
        if (!classifier) break;
        const auto& obj = as_classifier(*problems[k].objective);
        acc.push_back(t < tr.x.size() ? obj.accuracy(tr.x[t], *setup.data->eval) : std::nan(""));
      }
      m.diverged += tr.diverged ? 1 : 0;
      m.loss.push_back(std::move(loss));
      m.acc.push_back(std::move(acc));
    }
  };

  std::vector<MethodRuns> methods;
  {
    MethodRuns m;
    m.name = "learned";
    m.lr = classifier ? setup.dist.rule.eta0 : setup.dist.rule.eta_factor;
    auto learned = std::make_shared<const LearnedInnovation>(LearnedInnovation{ckpt.config, ckpt.theta});
    std::vector<Trajectory> runs(seeds);
    parallel_for(seeds, jobs, [&](std::size_t k) {
      const BenchProblem& p = problems[k];
      if (classifier) {
        CyclicRule rule{StepsizeSchedule(setup.dist.rule.eta0, setup.dist.rule.power), InnovationSource::from(learned)};
        runs[k] = rollout(rule, *p.objective, p.x0, steps, rec);
      } else {
        runs[k] = episode_rollout(setup.dist, Episode{p.objective, p.x0}, learned, steps, rec);
      }
    });
    collect(m, runs);
    methods.push_back(std::move(m));
  }

  const std::uint64_t tune_seed = derive_seed(seed, 0x7a11);
  std::vector<BenchProblem> tune_set;
  for (std::size_t k = 0; k < cfg.get_size("tune.starts"); ++k) tune_set.push_back(make_problem(tune_seed, k));
  std::vector<TuneProblem> tune_problems;
  for (const auto& p : tune_set) tune_problems.push_back({p.objective.get(), p.x0});
  const auto grid = tuning_grid(cfg);

  for (BaselineKind kind : baselines) {
    BaselineOptimizer opt{kind, {}};
    opt.hyper.sgd_power = classifier ? setup.dist.rule.power : 1.0;
    const TuneResult tuned = tune_learning_rate(opt, tune_problems, grid, cfg.get_size("tune.budget"), mode);
    opt.hyper.lr = tuned.lr;
    say(ctx.log, to_string(kind) + ": tuned lr " + format_double(tuned.lr));
    MethodRuns m;
    m.name = to_string(kind);
    m.lr = tuned.lr;
    std::vector<Trajectory> runs(seeds);
    parallel_for(seeds, jobs, [&](std::size_t k) {
      runs[k] = run_baseline(opt, *problems[k].objective, problems[k].x0, steps, mode, rec);
    });
    collect(m, runs);
    methods.push_back(std::move(m));
  }

  CsvTable curves({"method", "t", "loss_mean", "loss_std", "runs"});
  CsvTable summary({"method", "lr", "t", "loss_mean", "loss_std", "accuracy_mean", "accuracy_std", "diverged_runs"});
  for (const MethodRuns& m : methods) {
    for (std::size_t t = 0; t <= steps; ++t) {
      std::vector<double> vals;
      for (const auto& run : m.loss) {
        if (std::isfinite(run[t])) vals.push_back(run[t]);
      }
      curves.add_row({m.name, std::to_string(t), CsvTable::cell(mean_of(vals)), CsvTable::cell(std_of(vals)),
                      std::to_string(vals.size())});
    }
    for (std::size_t i = 0; i < reports.size(); ++i) {
      std::vector<double> losses, accs;
      for (std::size_t k = 0; k < m.loss.size(); ++k) {
        if (std::isfinite(m.loss[k][reports[i]])) losses.push_back(m.loss[k][reports[i]]);
        if (classifier && std::isfinite(m.acc[k][i])) accs.push_back(m.acc[k][i]);
      }
      summary.add_row({m.name, CsvTable::cell(m.lr), std::to_string(reports[i]), CsvTable::cell(mean_of(losses)),
                       CsvTable::cell(std_of(losses)), classifier ? CsvTable::cell(mean_of(accs)) : "",
                       classifier ? CsvTable::cell(std_of(accs)) : "", std::to_string(m.diverged)});
      std::string line = m.name + " t=" + std::to_string(reports[i]) + " loss " + format_double(mean_of(losses));
      if (classifier) line += " accuracy " + format_double(mean_of(accs)) + " +- " + format_double(std_of(accs));
      say(ctx.log, line);
    }
  }
  write_results(curves, (out / "bench_curves.csv").string());
  write_results(summary, (out / "bench_summary.csv").string());
  write_manifest(out, "bench", ctx, dataset_hash(setup), setup.resolved);
  return kExitOk;
}

// ---- verify ----

VerifyResult run_verification(const RunConfig& cfg, const Checkpoint* ckpt) {
  std::string source = cfg.get("verify.source");
  if (source == "auto") source = ckpt != nullptr ? "learned" : "gd";
  const std::uint64_t seed = cfg.get_u64("seed");
  const double tail_fraction = cfg.get_double("verify.tail_fraction");
  const double tail_tol = cfg.get_double("verify.tail_tolerance");
  const double eq_tol = cfg.get_double("verify.equivalence_tol");
  const bool unsafe = cfg.get_bool("rule.unsafe_stepsize");

  VerifyResult res;
  KeyValues& rep = res.report;
  rep.set("source", source);

  Trajectory tr;
  ObjectivePtr obj;
  double eta = 0.0;
  if (source == "trajectory") {
    const std::string path = cfg.get("verify.trajectory");
    if (path.empty() || !fs::exists(path)) throw ConfigError("verify.trajectory: file '" + path + "' not found");
    tr = load_trajectory(path);
    obj = objective_from_descriptor(tr.objective);
    if (tr.kind == RuleKind::Full && !tr.eta.empty()) eta = tr.eta.front();
  } else {
    Index d = static_cast<Index>(cfg.get_size("verify.dim"));
    if (source == "learned") {
      if (ckpt == nullptr) throw ConfigError("verify.source = learned needs --checkpoint");
      d = ckpt->config.d;
      if (d > 2000) throw ConfigError("verify: checkpoint dimension too large for the dense test quadratic");
    }
    obj = make_quadratic(d, cfg.get_double("verify.kappa"), derive_seed(seed, 0x7e51));
    eta = cfg.get_double("verify.eta_factor") / obj->beta();
    const Vector x0 = init_from(cfg).sample(derive_seed(seed, 0x7e52), d);
    const std::size_t steps = cfg.get_size("verify.steps");
    if (source == "gd" || source == "learned") {
      FullGradientRule rule;
      rule.eta = eta;
      rule.unsafe = unsafe;
      if (source == "learned") {
        rule.innovation =
            InnovationSource::from(std::make_shared<const LearnedInnovation>(LearnedInnovation{ckpt->config, ckpt->theta}));
      }
      tr = rollout(rule, *obj, x0, steps);
    } else {
      BaselineOptimizer opt{parse_baseline(source), {}};
      if (opt.kind != BaselineKind::HeavyBall && opt.kind != BaselineKind::NAG && opt.kind != BaselineKind::GD) {
        throw ConfigError("verify.source: expected gd, heavy-ball, nag, learned or trajectory");
      }
      if (eta * obj->beta() >= 1.0 && !unsafe) {
        throw CertificateViolation("verify: eta * beta = " + format_double(eta * obj->beta()) +
                                   " >= 1; pass --unsafe-stepsize to run it anyway");
      }
      opt.hyper.lr = eta;
      tr = run_baseline(opt, *obj, x0, steps, GradientMode::Full);
    }
  }
  rep.set("objective", tr.objective);
  rep.set("steps", static_cast<double>(tr.steps));
  rep.set("beta", obj->beta());
  rep.set("eta", eta);

  bool passed = true;
  auto check = [&](const std::string& name, bool ok) {
    rep.set(name, ok ? "pass" : "fail");
    passed = passed && ok;
  };
  check("no_divergence", !tr.diverged);

  const ConvergenceReport conv = square_sum_diagnostics(tr, tail_fraction, tail_tol);
  rep.set("grad_tail_ratio", conv.grad_tail_ratio());
  rep.set("update_tail_ratio", conv.update_tail_ratio());
  check("square_sum_tail", conv.square_summable);

  if (tr.kind == RuleKind::Full) {
    if (tr.x.size() == tr.steps + 1 && tr.u.size() == tr.steps && eta > 0.0) {
      const ReconstructedInnovation V = reconstruct_innovation(tr, eta);
      const EquivalenceReport eq = equivalence_test(tr, V, *obj, eta, eq_tol);
      rep.set("replay_max_deviation", eq.max_deviation);
      check("replay_equivalence", eq.equivalent);
      if (eta * obj->beta() < 1.0 && tr.steps > 0) {
        FullGradientRule replay_rule;
        replay_rule.eta = eta;
        replay_rule.unsafe = true;
        replay_rule.innovation = InnovationSource::from(V.as_scripted());
        RecordOptions lean;
        lean.states = lean.updates = lean.gradients = false;
        const Trajectory replay = rollout(replay_rule, *obj, V.x0, tr.steps, lean);
        const DescentReport l1 = descent_monitor(replay, obj->beta(), eta, std::nullopt, obj->lower_bound());
        rep.set("descent_lhs", l1.lhs);
        rep.set("descent_rhs", l1.rhs);
        rep.set("descent_f_min", l1.surrogate ? "running minimum" : "declared bound");
        check("descent_bound", l1.holds);
      } else {
        rep.set("descent_bound", "not applicable (eta * beta >= 1)");
      }
    } else {
      rep.set("replay_equivalence", "not applicable (states or updates not recorded)");
    }
  } else {
    const InnovationBoundReport e14 = innovation_bound_compliance(tr);
    rep.set("innovation_bound_C", e14.C);
    rep.set("innovation_bound_worst_ratio", e14.worst_ratio);
    check("innovation_bound", e14.compliant);
    if (tr.u.size() == tr.steps) {
      const MStepReport ms = mstep_recursion_residual(tr, *obj);
      rep.set("mstep_max_scaled_residual", ms.max_scaled);
      rep.set("mstep_envelope_a", ms.envelope_a);
      rep.set("mstep_envelope_b", ms.envelope_b);
    }
  }
  rep.set("result", passed ? "pass" : "fail");
  res.passed = passed;
  return res;
}

int cmd_verify(const CommandContext& ctx) {
  const RunConfig& cfg = ctx.config;
  std::optional<Checkpoint> ckpt;
  if (!ctx.checkpoint.empty()) ckpt = require_checkpoint(ctx);
  const VerifyResult res = run_verification(cfg, ckpt ? &*ckpt : nullptr);
  const fs::path out = out_dir(cfg);
  write_results(res.report, (out / "verify.txt").string());
  write_manifest(out, "verify", ctx, "none", {});
  for (const auto& [k, v] : res.report.entries()) say(ctx.log, k + " = " + v);
  return res.passed ? kExitOk : kExitVerification;
}

// ---- inspect ----

int cmd_inspect(const CommandContext& ctx) {
  const std::string traj_path = ctx.config.get("inspect.trajectory");
  if (ctx.checkpoint.empty() && traj_path.empty()) {
    throw ConfigError("inspect needs --checkpoint or inspect.trajectory");
  }
  KeyValues kv;
  if (!ctx.checkpoint.empty()) {
    const Checkpoint ck = require_checkpoint(ctx);
    const InnovationConfig& c = ck.config;
    kv.set("checkpoint", ctx.checkpoint);
    kv.set("d", static_cast<double>(c.d));
    kv.set("n", static_cast<double>(c.n));
    kv.set("r", static_cast<double>(c.r));
    kv.set("gamma", c.gamma);
    kv.set("hidden", static_cast<double>(c.hidden));
    kv.set("state_activation", c.activation == StateActivation::Tanh ? "tanh" : "identity");
    kv.set("input_scale", c.input_scale);
    kv.set("parameters", static_cast<double>(ck.theta.size()));
    for (const Segment& seg : ck.theta.layout().segments()) {
      kv.set("norm." + seg.name, ck.theta.get(seg.name).norm());
    }
    for (Index k = 0; k < c.r; ++k) {
      const std::string name = "z" + std::to_string(k) + ".A";
      kv.set("spectral_norm." + name, spectral_norm_estimate(contract<Matrix>(ck.theta.get(name), c.gamma)));
    }
    for (const auto& [k, v] : ck.meta) kv.set("meta." + k, v);
  }
  if (!traj_path.empty()) {
    if (!fs::exists(traj_path)) throw ConfigError("inspect.trajectory: file '" + traj_path + "' not found");
    const Trajectory tr = load_trajectory(traj_path);
    kv.set("trajectory", traj_path);
    kv.set("kind", tr.kind == RuleKind::Full ? "full" : "cyclic");
    kv.set("objective", tr.objective);
    kv.set("dim", static_cast<double>(tr.dim));
    kv.set("components", static_cast<double>(tr.components));
    kv.set("steps", static_cast<double>(tr.steps));
    kv.set("diverged", tr.diverged ? "true" : "false");
    if (!tr.f.empty()) {
      kv.set("f_first", tr.f.front());
      kv.set("f_last", tr.f.back());
    }
    if (!tr.grad_norm.empty()) kv.set("grad_norm_last", tr.grad_norm.back());
    kv.set("probes", static_cast<double>(tr.probes.size()));
  }
  for (const auto& [k, v] : kv.entries()) say(ctx.log, k + " = " + v);
  return kExitOk;
}

int run_command(const std::string& name, const CommandContext& ctx) {
  try {
    if (name == "train") return cmd_train(ctx);
    if (name == "evaluate") return cmd_evaluate(ctx);
    if (name == "bench") return cmd_bench(ctx);
    if (name == "verify") return cmd_verify(ctx);
    if (name == "inspect") return cmd_inspect(ctx);
    say(ctx.log, "error: unknown command '" + name + "'");
    return kExitUsage;
  } catch (const ConfigError& e) {
    say(ctx.log, std::string("config error: ") + e.what());
    return kExitUsage;
  } catch (const CertificateViolation& e) {
    say(ctx.log, std::string("certificate error: ") + e.what());
    return kExitUsage;
  } catch (const InvalidArgument& e) {
    say(ctx.log, std::string("invalid argument: ") + e.what());
    return kExitUsage;
  } catch (const FormatError& e) {
    say(ctx.log, std::string("format error: ") + e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    say(ctx.log, std::string("error: ") + e.what());
    return kExitRuntime;
  }
}

}  // namespace cl2o
