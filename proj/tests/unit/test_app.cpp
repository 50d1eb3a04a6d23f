#include "cl2o/app/commands.hpp"
#include "cl2o/data/binary_io.hpp"

#include <doctest.h>

#include <filesystem>

#include <unistd.h>

using namespace cl2o;
namespace fs = std::filesystem;

namespace {

struct Workspace {
  fs::path root;
  explicit Workspace(const std::string& tag) {
    root = fs::temp_directory_path() / ("cl2o_test_app_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(root);
    fs::create_directories(root);
  }
  ~Workspace() { fs::remove_all(root); }
  std::string path(const std::string& rel) const { return (root / rel).string(); }
};

RunConfig small_config(const std::string& out) {
  RunConfig c;
  c.set("out", out);
  c.set("jobs", "1");
  c.set("quadratic.dim", "3");
  c.set("innovation.hidden", "4");
  c.set("meta.horizon", "5");
  c.set("meta.episodes", "2");
  c.set("meta.epochs", "2");
  c.set("evaluate.episodes", "2");
  c.set("bench.steps", "10");
  c.set("bench.seeds", "2");
  c.set("bench.report_steps", "5,10");
  c.set("bench.baselines", "");
  c.set("verify.dim", "4");
  c.set("verify.steps", "300");
  return c;
}

int run(const std::string& cmd, const RunConfig& cfg, const std::string& ckpt = "") {
  return run_command(cmd, CommandContext{cfg, ckpt, {}});
}

std::string bytes(const std::string& path) { return bin::read_file_bytes(path); }

}  // namespace

TEST_CASE("train writes checkpoints, a report and a manifest") {
  Workspace ws("train");
  RunConfig cfg = small_config(ws.path("a"));
  REQUIRE(run("train", cfg) == kExitOk);
  CHECK(fs::exists(ws.path("a/checkpoint.cl2c")));
  CHECK(fs::exists(ws.path("a/checkpoints/epoch-0000.cl2c")));
  CHECK(fs::exists(ws.path("a/checkpoints/epoch-0002.cl2c")));
  CHECK(CsvTable::parse(bytes(ws.path("a/train_epochs.csv"))).rows().size() == 2);

  const KeyValues m = KeyValues::parse(bytes(ws.path("a/train_manifest.txt")));
  CHECK(*m.find("command") == "train");
  CHECK(*m.find("config_hash") == cfg.hash());
  CHECK(*m.find("seed") == "0");
  CHECK(*m.find("dataset_hash") == "none");
  CHECK(*m.find("config.meta.epochs") == "2");

  cfg.set("out", ws.path("b"));
  REQUIRE(run("train", cfg) == kExitOk);
  // the recorded config hash covers the output directory, so compare parameters
  CHECK(load_checkpoint(ws.path("a/checkpoint.cl2c")).theta.entries() ==
        load_checkpoint(ws.path("b/checkpoint.cl2c")).theta.entries());
  const CsvTable ea = CsvTable::parse(bytes(ws.path("a/train_epochs.csv")));
  const CsvTable eb = CsvTable::parse(bytes(ws.path("b/train_epochs.csv")));
  for (std::size_t e = 0; e < 2; ++e) {
    CHECK(ea.rows()[e][1] == eb.rows()[e][1]);  // metaloss
    CHECK(ea.rows()[e][2] == eb.rows()[e][2]);  // gradient norm
  }

  cfg.set("out", ws.path("c"));
  cfg.set("seed", "1");
  REQUIRE(run("train", cfg) == kExitOk);
  CHECK(load_checkpoint(ws.path("a/checkpoint.cl2c")).theta.entries() !=
        load_checkpoint(ws.path("c/checkpoint.cl2c")).theta.entries());
}

TEST_CASE("zero epochs keep the initial operator") {
  Workspace ws("zero");
  RunConfig cfg = small_config(ws.path("z"));
  cfg.set("meta.epochs", "0");
  REQUIRE(run("train", cfg) == kExitOk);
  const Checkpoint init = load_checkpoint(ws.path("z/checkpoints/epoch-0000.cl2c"));
  const Checkpoint final_ck = load_checkpoint(ws.path("z/checkpoint.cl2c"));
  CHECK(final_ck.theta.entries() == init.theta.entries());
  CHECK(CsvTable::parse(bytes(ws.path("z/train_epochs.csv"))).rows().empty());
}

TEST_CASE("evaluate and bench on a trained checkpoint") {
  Workspace ws("bench");
  RunConfig cfg = small_config(ws.path("o"));
  REQUIRE(run("train", cfg) == kExitOk);
  const std::string ckpt = ws.path("o/checkpoint.cl2c");

  CHECK(run("evaluate", cfg, ckpt) == kExitOk);
  const KeyValues ev = KeyValues::parse(bytes(ws.path("o/evaluate.txt")));
  CHECK(ev.entries().size() > 0);
  CHECK(fs::exists(ws.path("o/evaluate_manifest.txt")));
  CHECK(KeyValues::parse(bytes(ws.path("o/evaluate_manifest.txt"))).find("checkpoint_hash") != nullptr);

  SUBCASE("no baselines") {
    REQUIRE(run("bench", cfg, ckpt) == kExitOk);
    const CsvTable s = CsvTable::parse(bytes(ws.path("o/bench_summary.csv")));
    REQUIRE(s.rows().size() == 2);
    for (const auto& row : s.rows()) CHECK(row[0] == "learned");
  }
  SUBCASE("a single seed has zero spread") {
    cfg.set("bench.seeds", "1");
    cfg.set("bench.baselines", "sgd");
    REQUIRE(run("bench", cfg, ckpt) == kExitOk);
    const CsvTable s = CsvTable::parse(bytes(ws.path("o/bench_summary.csv")));
    REQUIRE(s.rows().size() == 4);
    for (const auto& row : s.rows()) CHECK(parse_double(row[4], "loss_std") == 0.0);
  }
  SUBCASE("reruns are byte-identical") {
    cfg.set("bench.baselines", "adam");
    REQUIRE(run("bench", cfg, ckpt) == kExitOk);
    const std::string first = bytes(ws.path("o/bench_curves.csv"));
    REQUIRE(run("bench", cfg, ckpt) == kExitOk);
    CHECK(bytes(ws.path("o/bench_curves.csv")) == first);
  }
  SUBCASE("bench needs a checkpoint") {
    CHECK(run("bench", cfg) == kExitUsage);
    CHECK(run("bench", cfg, ws.path("missing.cl2c")) == kExitUsage);
  }
}

TEST_CASE("verify exit codes") {
  Workspace ws("verify");
  RunConfig cfg = small_config(ws.path("v"));
  cfg.set("verify.source", "gd");
  CHECK(run("verify", cfg) == kExitOk);
  const KeyValues rep = KeyValues::parse(bytes(ws.path("v/verify.txt")));
  CHECK(*rep.find("result") == "pass");
  CHECK(fs::exists(ws.path("v/verify_manifest.txt")));

  cfg.set("verify.source", "heavy-ball");
  CHECK(run("verify", cfg) == kExitOk);

  cfg.set("verify.source", "gd");
  cfg.set("verify.eta_factor", "2");
  CHECK(run("verify", cfg) == kExitUsage);
  cfg.set("rule.unsafe_stepsize", "true");
  CHECK(run("verify", cfg) == kExitVerification);

  cfg.set("verify.eta_factor", "0.9");
  cfg.set("verify.source", "learned");
  CHECK(run("verify", cfg) == kExitUsage);
  CHECK(run("verify", cfg, ws.path("nope.cl2c")) == kExitUsage);
  cfg.set("verify.source", "lbfgs");
  CHECK(run("verify", cfg) == kExitUsage);
}

TEST_CASE("verify a trained operator and a saved trajectory") {
  Workspace ws("learned");
  RunConfig cfg = small_config(ws.path("t"));
  REQUIRE(run("train", cfg) == kExitOk);
  cfg.set("verify.source", "learned");
  CHECK(run("verify", cfg, ws.path("t/checkpoint.cl2c")) == kExitOk);

  const auto q = make_quadratic(3, 5.0, 1);
  FullGradientRule gd;
  gd.eta = 0.9 / q->beta();
  save_trajectory(rollout(gd, *q, Vector::Ones(3), 400), ws.path("gd.cl2t"));
  cfg.set("verify.source", "trajectory");
  cfg.set("verify.trajectory", ws.path("gd.cl2t"));
  CHECK(run("verify", cfg) == kExitOk);
  cfg.set("inspect.trajectory", ws.path("gd.cl2t"));
  CHECK(run("inspect", cfg, ws.path("t/checkpoint.cl2c")) == kExitOk);
}

TEST_CASE("usage errors") {
  Workspace ws("usage");
  const RunConfig cfg = small_config(ws.path("u"));
  CHECK(run("frobnicate", cfg) == kExitUsage);
  CHECK(run("inspect", cfg) == kExitUsage);
  RunConfig bad = cfg;
  bad.set("task", "regression");
  CHECK(run("train", bad) == kExitUsage);
}
