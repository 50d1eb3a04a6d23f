#ifndef CL2O_H
#define CL2O_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define CL2O_API __declspec(dllexport)
#else
#define CL2O_API __attribute__((visibility("default")))
#endif

typedef enum cl2o_status {
  CL2O_OK = 0,
  CL2O_ERR_INVALID_ARGUMENT = 1,
  CL2O_ERR_CONFIG = 2,
  CL2O_ERR_CERTIFICATE = 3,
  CL2O_ERR_FORMAT = 4,
  CL2O_ERR_NON_FINITE = 5,
  CL2O_ERR_RUNTIME = 6
} cl2o_status;

typedef struct cl2o_config cl2o_config;
typedef struct cl2o_objective cl2o_objective;
typedef struct cl2o_checkpoint cl2o_checkpoint;
typedef struct cl2o_trajectory cl2o_trajectory;

typedef void (*cl2o_log_fn)(const char* message, void* user);

CL2O_API const char* cl2o_version(void);

/* Message of the last failed call on this thread ("" if none). */
CL2O_API const char* cl2o_last_error(void);

/* Receives progress and error lines from commands; NULL restores silence. */
CL2O_API void cl2o_set_log_callback(cl2o_log_fn fn, void* user);

/* Run configuration */
CL2O_API cl2o_status cl2o_config_new(cl2o_config** out);
CL2O_API cl2o_status cl2o_config_load(const char* path, cl2o_config** out);
CL2O_API void cl2o_config_free(cl2o_config* cfg);
CL2O_API cl2o_status cl2o_config_set(cl2o_config* cfg, const char* key, const char* value);
/* Copies the value (NUL-terminated) into buf; *needed receives the size
   including the terminator. */
CL2O_API cl2o_status cl2o_config_get(const cl2o_config* cfg, const char* key, char* buf, size_t size, size_t* needed);
CL2O_API cl2o_status cl2o_config_hash(const cl2o_config* cfg, char out[17]);

/* Runs train | evaluate | bench | verify | inspect. checkpoint may be NULL.
   Returns the process exit code: 0 ok, 1 runtime, 2 usage/config,
   3 verification failure. */
CL2O_API int cl2o_run(const char* command, const cl2o_config* cfg, const char* checkpoint);

/* Objectives */
CL2O_API cl2o_status cl2o_objective_quadratic(int64_t dim, double condition_number, uint64_t seed,
                                              cl2o_objective** out);
CL2O_API cl2o_status cl2o_objective_from_descriptor(const char* descriptor, cl2o_objective** out);
CL2O_API void cl2o_objective_free(cl2o_objective* obj);
CL2O_API int64_t cl2o_objective_dim(const cl2o_objective* obj);
CL2O_API double cl2o_objective_beta(const cl2o_objective* obj);
CL2O_API cl2o_status cl2o_objective_value(const cl2o_objective* obj, const double* x, double* value);
CL2O_API cl2o_status cl2o_objective_gradient(const cl2o_objective* obj, const double* x, double* grad);

/* Checkpoints */
CL2O_API cl2o_status cl2o_checkpoint_load(const char* path, cl2o_checkpoint** out);
CL2O_API void cl2o_checkpoint_free(cl2o_checkpoint* ckpt);
CL2O_API int64_t cl2o_checkpoint_dim(const cl2o_checkpoint* ckpt);
CL2O_API int64_t cl2o_checkpoint_parameter_count(const cl2o_checkpoint* ckpt);

/* Full-gradient rollout x_{t+1} = x_t - eta grad f(x_t) + v_t. ckpt may be
   NULL (plain gradient descent). unsafe != 0 allows eta >= 1/beta. */
CL2O_API cl2o_status cl2o_rollout_full(const cl2o_objective* obj, const cl2o_checkpoint* ckpt, double eta,
                                       const double* x0, size_t steps, int unsafe, cl2o_trajectory** out);
CL2O_API void cl2o_trajectory_free(cl2o_trajectory* traj);
CL2O_API size_t cl2o_trajectory_steps(const cl2o_trajectory* traj);
CL2O_API int cl2o_trajectory_diverged(const cl2o_trajectory* traj);
/* steps + 1 entries. */
CL2O_API const double* cl2o_trajectory_grad_norm(const cl2o_trajectory* traj);
CL2O_API const double* cl2o_trajectory_loss(const cl2o_trajectory* traj);
/* Final iterate, dim entries. */
CL2O_API cl2o_status cl2o_trajectory_final_x(const cl2o_trajectory* traj, double* x);
CL2O_API cl2o_status cl2o_trajectory_save(const cl2o_trajectory* traj, const char* path);

#ifdef __cplusplus
}
#endif

#endif
