#pragma once

#include "cl2o/app/config.hpp"
#include "cl2o/data/dataset.hpp"
#include "cl2o/meta/meta_training.hpp"
#include "cl2o/operators/checkpoint.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <string>

namespace cl2o {

enum ExitCode : int { kExitOk = 0, kExitRuntime = 1, kExitUsage = 2, kExitVerification = 3 };

using LogFn = std::function<void(const std::string&)>;

const char* code_version();

struct CommandContext {
  RunConfig config;
  std::string checkpoint;  // empty when not given
  LogFn log;
};

/// train | evaluate | bench | verify | inspect. Exceptions are mapped to
/// exit codes: configuration, usage and certificate errors give 2, other
/// failures 1.
int run_command(const std::string& name, const CommandContext& ctx);

int cmd_train(const CommandContext& ctx);
int cmd_evaluate(const CommandContext& ctx);
int cmd_bench(const CommandContext& ctx);
int cmd_verify(const CommandContext& ctx);
int cmd_inspect(const CommandContext& ctx);

// ---- building blocks shared with the tests ----

struct ClassifierData {
  std::shared_ptr<const Dataset> meta_train;   // theta is optimized here
  std::shared_ptr<const Dataset> bench_train;  // held-out share, used by bench
  std::shared_ptr<const Dataset> eval;
  bool synthetic = false;
};

ClassifierData load_classifier_data(const RunConfig& cfg);

struct TaskSetup {
  std::string task;
  TaskDistribution dist;
  InnovationConfig innovation;
  std::optional<ClassifierData> data;
  /// Classifier objective on meta_train (null for the quadratic task).
  std::shared_ptr<const Objective> classifier;
  /// Values resolved at setup time (e.g. a tuned stepsize), for manifests.
  KeyValues resolved;
};

/// Builds the task distribution and operator shape from the config. With a
/// checkpoint, the operator shape and stepsize recorded in it win.
TaskSetup build_task(const RunConfig& cfg, const Checkpoint* ckpt = nullptr, const LogFn& log = {});

/// Learning-rate grid from `tune.grid` (auto depends on the task).
std::vector<double> tuning_grid(const RunConfig& cfg);

struct VerifyResult {
  KeyValues report;
  bool passed = false;
};

/// Runs the monitor suite on the source selected by `verify.source`.
VerifyResult run_verification(const RunConfig& cfg, const Checkpoint* ckpt);

unsigned resolve_jobs(const RunConfig& cfg);

}  // namespace cl2o
