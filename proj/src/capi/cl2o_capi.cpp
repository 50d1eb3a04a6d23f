#include "cl2o/cl2o.h"

#include "cl2o/app/commands.hpp"
#include "cl2o/numcore/autodiff.hpp"
#include "cl2o/objectives/objective.hpp"
#include "cl2o/operators/checkpoint.hpp"
#include "cl2o/rules/update_rules.hpp"

#include <cstring>
#include <mutex>
#include <string>

struct cl2o_config {
  cl2o::RunConfig cfg;
};
struct cl2o_objective {
  cl2o::ObjectivePtr obj;
};
struct cl2o_checkpoint {
  cl2o::Checkpoint ckpt;
};
struct cl2o_trajectory {
  cl2o::Trajectory traj;
};

namespace {

thread_local std::string g_last_error;

std::mutex g_log_mutex;
cl2o_log_fn g_log_fn = nullptr;
void* g_log_user = nullptr;

void emit(const std::string& line) {
  std::lock_guard<std::mutex> lock(g_log_mutex);
  if (g_log_fn != nullptr) g_log_fn(line.c_str(), g_log_user);
}

cl2o_status fail(cl2o_status code, const char* what) {
  g_last_error = what;
  return code;
}

template <class F>
cl2o_status guarded(F&& body) {
  try {
    g_last_error.clear();
    body();
    return CL2O_OK;
  } catch (const cl2o::ConfigError& e) {
    return fail(CL2O_ERR_CONFIG, e.what());
  } catch (const cl2o::CertificateViolation& e) {
    return fail(CL2O_ERR_CERTIFICATE, e.what());
  } catch (const cl2o::FormatError& e) {
    return fail(CL2O_ERR_FORMAT, e.what());
  } catch (const cl2o::ad::NonFiniteError& e) {
    return fail(CL2O_ERR_NON_FINITE, e.what());
  } catch (const cl2o::InvalidArgument& e) {
    return fail(CL2O_ERR_INVALID_ARGUMENT, e.what());
  } catch (const std::exception& e) {
    return fail(CL2O_ERR_RUNTIME, e.what());
  } catch (...) {
    return fail(CL2O_ERR_RUNTIME, "unknown error");
  }
}

#define CL2O_REQUIRE(cond, msg) \
  if (!(cond)) throw cl2o::InvalidArgument(msg)

}  // namespace

extern "C" {

const char* cl2o_version(void) { return cl2o::code_version(); }

const char* cl2o_last_error(void) { return g_last_error.c_str(); }

void cl2o_set_log_callback(cl2o_log_fn fn, void* user) {
  std::lock_guard<std::mutex> lock(g_log_mutex);
  g_log_fn = fn;
  g_log_user = user;
}

cl2o_status cl2o_config_new(cl2o_config** out) {
  return guarded([&] {
    CL2O_REQUIRE(out != nullptr, "out must not be NULL");
    *out = new cl2o_config{};
  });
}

cl2o_status cl2o_config_load(const char* path, cl2o_config** out) {
  return guarded([&] {
    CL2O_REQUIRE(path != nullptr && out != nullptr, "path and out must not be NULL");
    *out = new cl2o_config{cl2o::RunConfig::load(path)};
  });
}

void cl2o_config_free(cl2o_config* cfg) { delete cfg; }

cl2o_status cl2o_config_set(cl2o_config* cfg, const char* key, const char* value) {
  return guarded([&] {
    CL2O_REQUIRE(cfg != nullptr && key != nullptr && value != nullptr, "arguments must not be NULL");
    cfg->cfg.set(key, value);
  });
}

cl2o_status cl2o_config_get(const cl2o_config* cfg, const char* key, char* buf, size_t size, size_t* needed) {
  return guarded([&] {
    CL2O_REQUIRE(cfg != nullptr && key != nullptr, "arguments must not be NULL");
    const std::string& v = cfg->cfg.get(key);
    if (needed != nullptr) *needed = v.size() + 1;
    if (buf != nullptr && size > 0) {
      const size_t n = std::min(size - 1, v.size());
      std::memcpy(buf, v.data(), n);
      buf[n] = '\0';
    }
  });
}

cl2o_status cl2o_config_hash(const cl2o_config* cfg, char out[17]) {
  return guarded([&] {
    CL2O_REQUIRE(cfg != nullptr && out != nullptr, "arguments must not be NULL");
    const std::string h = cfg->cfg.hash();
    std::memcpy(out, h.c_str(), 17);
  });
}

int cl2o_run(const char* command, const cl2o_config* cfg, const char* checkpoint) {
  if (command == nullptr) {
    g_last_error = "command must not be NULL";
    return cl2o::kExitUsage;
  }
  cl2o::CommandContext ctx;
  if (cfg != nullptr) ctx.config = cfg->cfg;
  if (checkpoint != nullptr) ctx.checkpoint = checkpoint;
  std::string last;
  ctx.log = [&last](const std::string& line) {
    last = line;
    emit(line);
  };
  const int code = cl2o::run_command(command, ctx);
  g_last_error = code == cl2o::kExitOk ? std::string() : last;
  return code;
}

cl2o_status cl2o_objective_quadratic(int64_t dim, double condition_number, uint64_t seed, cl2o_objective** out) {
  return guarded([&] {
    CL2O_REQUIRE(out != nullptr, "out must not be NULL");
    *out = new cl2o_objective{cl2o::make_quadratic(dim, condition_number, seed)};
  });
}

cl2o_status cl2o_objective_from_descriptor(const char* descriptor, cl2o_objective** out) {
  return guarded([&] {
    CL2O_REQUIRE(descriptor != nullptr && out != nullptr, "arguments must not be NULL");
    *out = new cl2o_objective{cl2o::objective_from_descriptor(descriptor)};
  });
}

void cl2o_objective_free(cl2o_objective* obj) { delete obj; }

int64_t cl2o_objective_dim(const cl2o_objective* obj) { return obj == nullptr ? -1 : obj->obj->dim(); }

double cl2o_objective_beta(const cl2o_objective* obj) { return obj == nullptr ? 0.0 : obj->obj->beta(); }

cl2o_status cl2o_objective_value(const cl2o_objective* obj, const double* x, double* value) {
  return guarded([&] {
    CL2O_REQUIRE(obj != nullptr && x != nullptr && value != nullptr, "arguments must not be NULL");
    const cl2o::Vector xv = Eigen::Map<const cl2o::Vector>(x, obj->obj->dim());
    *value = obj->obj->value(xv);
  });
}

cl2o_status cl2o_objective_gradient(const cl2o_objective* obj, const double* x, double* grad) {
  return guarded([&] {
    CL2O_REQUIRE(obj != nullptr && x != nullptr && grad != nullptr, "arguments must not be NULL");
    const cl2o::Vector xv = Eigen::Map<const cl2o::Vector>(x, obj->obj->dim());
    const cl2o::Vector g = obj->obj->gradient(xv);
    std::memcpy(grad, g.data(), sizeof(double) * static_cast<size_t>(g.size()));
  });
}

cl2o_status cl2o_checkpoint_load(const char* path, cl2o_checkpoint** out) {
  return guarded([&] {
    CL2O_REQUIRE(path != nullptr && out != nullptr, "arguments must not be NULL");
    *out = new cl2o_checkpoint{cl2o::load_checkpoint(path)};
  });
}

void cl2o_checkpoint_free(cl2o_checkpoint* ckpt) { delete ckpt; }

int64_t cl2o_checkpoint_dim(const cl2o_checkpoint* ckpt) { return ckpt == nullptr ? -1 : ckpt->ckpt.config.d; }

int64_t cl2o_checkpoint_parameter_count(const cl2o_checkpoint* ckpt) {
  return ckpt == nullptr ? -1 : ckpt->ckpt.theta.size();
}

cl2o_status cl2o_rollout_full(const cl2o_objective* obj, const cl2o_checkpoint* ckpt, double eta, const double* x0,
                              size_t steps, int unsafe, cl2o_trajectory** out) {
  return guarded([&] {
    CL2O_REQUIRE(obj != nullptr && x0 != nullptr && out != nullptr, "arguments must not be NULL");
    cl2o::FullGradientRule rule;
    rule.eta = eta;
    rule.unsafe = unsafe != 0;
    if (ckpt != nullptr) {
      rule.innovation = cl2o::InnovationSource::from(
          std::make_shared<const cl2o::LearnedInnovation>(cl2o::LearnedInnovation{ckpt->ckpt.config, ckpt->ckpt.theta}));
    }
    const cl2o::Vector x = Eigen::Map<const cl2o::Vector>(x0, obj->obj->dim());
    *out = new cl2o_trajectory{cl2o::rollout(rule, *obj->obj, x, steps)};
  });
}

void cl2o_trajectory_free(cl2o_trajectory* traj) { delete traj; }

size_t cl2o_trajectory_steps(const cl2o_trajectory* traj) { return traj == nullptr ? 0 : traj->traj.steps; }

int cl2o_trajectory_diverged(const cl2o_trajectory* traj) { return traj != nullptr && traj->traj.diverged ? 1 : 0; }

const double* cl2o_trajectory_grad_norm(const cl2o_trajectory* traj) {
  return traj == nullptr ? nullptr : traj->traj.grad_norm.data();
}

const double* cl2o_trajectory_loss(const cl2o_trajectory* traj) {
  return traj == nullptr ? nullptr : traj->traj.f.data();
}

cl2o_status cl2o_trajectory_final_x(const cl2o_trajectory* traj, double* x) {
  return guarded([&] {
    CL2O_REQUIRE(traj != nullptr && x != nullptr, "arguments must not be NULL");
    CL2O_REQUIRE(!traj->traj.x.empty(), "trajectory has no recorded states");
    const cl2o::Vector& last = traj->traj.x.back();
    std::memcpy(x, last.data(), sizeof(double) * static_cast<size_t>(last.size()));
  });
}

cl2o_status cl2o_trajectory_save(const cl2o_trajectory* traj, const char* path) {
  return guarded([&] {
    CL2O_REQUIRE(traj != nullptr && path != nullptr, "arguments must not be NULL");
    cl2o::save_trajectory(traj->traj, path);
  });
}

}  // extern "C"
