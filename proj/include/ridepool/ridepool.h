#ifndef RIDEPOOL_RIDEPOOL_H
#define RIDEPOOL_RIDEPOOL_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define RP_API __declspec(dllexport)
#else
#define RP_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum rp_status {
  RP_OK = 0,
  RP_ERR_INVALID_ARGUMENT = 1,
  RP_ERR_CONFIG = 2,
  RP_ERR_IO = 3,
  RP_ERR_FORMAT = 4,
  RP_ERR_SHAPE_MISMATCH = 5,
  RP_ERR_INVARIANT = 6,
  RP_ERR_NUMERIC = 7,
  RP_ERR_INTERNAL = 8
} rp_status;

typedef struct rp_config rp_config;
typedef struct rp_result rp_result;

typedef struct rp_run_options {
  const char* out_root; /* parent of the run directory; NULL means "runs" */
  const char* run_dir;  /* exact run directory; overrides out_root when set */
  int verbose;          /* progress lines on stderr when nonzero */
} rp_run_options;

RP_API const char* rp_version(void);

/* Short lowercase name, e.g. "config" for RP_ERR_CONFIG. */
RP_API const char* rp_status_name(rp_status status);

/* Message of the last failed call on this thread; "" when none. */
RP_API const char* rp_last_error(void);

RP_API rp_status rp_config_new(rp_config** out);
RP_API rp_status rp_config_load(const char* path, rp_config** out);
RP_API rp_status rp_config_set(rp_config* cfg, const char* key, const char* value);
RP_API rp_status rp_config_validate(const rp_config* cfg);
/* Canonical text; release with rp_string_free. */
RP_API rp_status rp_config_to_text(const rp_config* cfg, char** out);
RP_API void rp_config_free(rp_config* cfg);
RP_API void rp_string_free(char* s);

/* Parses "a,b,c" or "lo..hi". Writes at most `capacity` seeds and the full
   count to `count`. */
RP_API rp_status rp_parse_seeds(const char* text, uint64_t* seeds, size_t capacity,
                                size_t* count);

RP_API rp_status rp_train(const rp_config* cfg, const rp_run_options* opts, rp_result** out);

/* `checkpoint` NULL or "" evaluates the greedy dispatcher. */
RP_API rp_status rp_eval(const rp_config* cfg, const char* checkpoint, const uint64_t* seeds,
                         size_t n_seeds, const rp_run_options* opts, rp_result** out);

RP_API rp_status rp_simulate(const rp_config* cfg, const char* checkpoint,
                             const rp_run_options* opts, rp_result** out);

RP_API rp_status rp_bench(const rp_config* cfg, int episodes, const rp_run_options* opts,
                          rp_result** out);

RP_API const char* rp_result_json(const rp_result* result);
RP_API const char* rp_result_run_dir(const rp_result* result);
RP_API void rp_result_free(rp_result* result);

/* Maximum-score matching on a row-major n x w table. order_for_driver[i] is
   the matched column or -1. */
RP_API rp_status rp_solve_assignment(int n, int w, const double* scores,
                                     const uint8_t* feasible, int32_t* order_for_driver);

#ifdef __cplusplus
}
#endif

#endif
