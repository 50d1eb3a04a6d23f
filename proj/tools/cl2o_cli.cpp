#include "cl2o/cl2o.h"

#include <CLI11.hpp>

#include <cstdio>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace {

struct Flags {
  std::string config;
  std::optional<std::string> seed, epochs, horizon, jobs, data_dir, out, baselines, activation, init;
  std::string checkpoint;
  bool unsafe_stepsize = false;
};

void add_flags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "key = value config file")->check(CLI::ExistingFile);
  cmd->add_option("--seed", f.seed, "master seed");
  cmd->add_option("--epochs", f.epochs, "meta-training epochs");
  cmd->add_option("--horizon", f.horizon, "unrolled horizon T");
  cmd->add_option("--jobs", f.jobs, "worker threads (0 = logical cores)");
  cmd->add_option("--data-dir", f.data_dir, "directory with MNIST IDX files");
  cmd->add_option("--checkpoint", f.checkpoint, "checkpoint file");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--baselines", f.baselines, "comma list: gd,sgd,heavy-ball,nag,adam,rmsprop");
  cmd->add_flag("--unsafe-stepsize", f.unsafe_stepsize, "allow eta >= 1/beta");
  cmd->add_option("--activation", f.activation, "classifier activation")
      ->check(CLI::IsMember({"tanh", "sigmoid", "relu"}));
  cmd->add_option("--init", f.init, "initial parameter distribution")->check(CLI::IsMember({"uniform", "gaussian"}));
}

void print_line(const char* message, void*) { std::printf("%s\n", message); std::fflush(stdout); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learning to optimize with convergence guarantees"};
  app.set_version_flag("--version", std::string(cl2o_version()));
  app.require_subcommand(1, 1);

  Flags flags;
  const std::vector<std::pair<const char*, const char*>> commands = {
      {"train", "meta-train the innovation operator"},
      {"evaluate", "held-out MetaLoss of a checkpoint against the plain rule"},
      {"bench", "paired runs of a checkpoint and tuned baselines"},
      {"verify", "convergence monitors on a rollout"},
      {"inspect", "summarize a checkpoint or trajectory"},
  };
  for (const auto& [name, help] : commands) add_flags(app.add_subcommand(name, help), flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  cl2o_config* cfg = nullptr;
  const cl2o_status st = flags.config.empty() ? cl2o_config_new(&cfg) : cl2o_config_load(flags.config.c_str(), &cfg);
  if (st != CL2O_OK) {
    std::fprintf(stderr, "config error: %s\n", cl2o_last_error());
    return 2;
  }

  const std::vector<std::pair<const char*, const std::optional<std::string>*>> overrides = {
      {"seed", &flags.seed},           {"meta.epochs", &flags.epochs},
      {"meta.horizon", &flags.horizon}, {"jobs", &flags.jobs},
      {"data.dir", &flags.data_dir},    {"out", &flags.out},
      {"bench.baselines", &flags.baselines}, {"classifier.activation", &flags.activation},
      {"init.kind", &flags.init},
  };
  for (const auto& [key, value] : overrides) {
    if (value->has_value() && cl2o_config_set(cfg, key, (*value)->c_str()) != CL2O_OK) {
      std::fprintf(stderr, "config error: %s\n", cl2o_last_error());
      cl2o_config_free(cfg);
      return 2;
    }
  }
  if (flags.unsafe_stepsize) cl2o_config_set(cfg, "rule.unsafe_stepsize", "true");

  cl2o_set_log_callback(print_line, nullptr);
  const std::string command = app.get_subcommands().front()->get_name();
  const int code = cl2o_run(command.c_str(), cfg, flags.checkpoint.empty() ? nullptr : flags.checkpoint.c_str());
  cl2o_config_free(cfg);
  return code;
}
