/* C interface to the gridshield library.
 *
 * Every function returns a gs_status. On failure the message for the calling
 * thread is available from gs_last_error() until the next call on that
 * thread. Strings handed out by the library are released with
 * gs_string_free; handles with their matching *_free function.
 */
#ifndef GRIDSHIELD_H
#define GRIDSHIELD_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define GS_API __declspec(dllexport)
#else
#define GS_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum gs_status {
  GS_OK = 0,
  GS_ERR_CONFIG = 2,
  GS_ERR_MEMORY_BUDGET = 3,
  GS_ERR_INITIAL_UNSAFE = 4,
  GS_ERR_MISMATCH = 5,
  GS_ERR_VIOLATION = 6,
  GS_ERR_OUT_OF_BOUNDS = 10,
  GS_ERR_OVERFLOW = 11,
  GS_ERR_NOT_BOX_AFFINE = 12,
  GS_ERR_NOT_A_FIXPOINT = 13,
  GS_ERR_SIZE_LIMIT = 14,
  GS_ERR_EMPTY_MENU = 15,
  GS_ERR_DOMAIN = 16,
  GS_ERR_FORMAT = 17,
  GS_ERR_IO = 18,
  GS_ERR_INVALID_ARGUMENT = 19,
  GS_ERR_INTERNAL = 99
} gs_status;

typedef enum gs_mode { GS_MODE_NONE = 0, GS_MODE_PRE = 1, GS_MODE_POST = 2 } gs_mode;

typedef struct gs_config gs_config;
typedef struct gs_transitions gs_transitions;
typedef struct gs_shield gs_shield;
typedef struct gs_qtable gs_qtable;

typedef struct gs_synthesis_report {
  uint64_t cells;
  uint64_t transitions;
  uint64_t simulations;
  uint64_t initial_cells; /* cells whose box is entirely safe */
  uint64_t safe_cells;    /* winning cells after the fixed point */
  uint64_t iterations;
  int initial_state_safe;
  int from_cache;
  double build_seconds;
  double solve_seconds;
} gs_synthesis_report;

typedef struct gs_eval_report {
  uint64_t episodes;
  uint64_t violations;
  uint64_t interventions;
  uint64_t steps;
  uint64_t unshielded_steps;
  uint64_t audited_corrections;
  uint64_t audit_failures;
  double mean_interventions;
  double average_cost;
  double ci_lower;
  double ci_upper;
  double confidence;
  double seconds;
} gs_eval_report;

GS_API const char* gs_last_error(void);
GS_API const char* gs_status_name(gs_status status);
GS_API void gs_string_free(char* s);

/* Configuration */
GS_API gs_status gs_config_default(const char* model, gs_config** out);
GS_API gs_status gs_config_parse(const char* json, gs_config** out);
GS_API gs_status gs_config_load(const char* path, gs_config** out);
/* Sets the value at a JSON pointer (e.g. "/scheme/n") to a JSON literal and
 * revalidates the whole config. */
GS_API gs_status gs_config_set(gs_config* config, const char* pointer, const char* json_value);
/* One value applies to every dimension. */
GS_API gs_status gs_config_set_gamma(gs_config* config, const double* gamma, size_t count);
GS_API gs_status gs_config_dump(const gs_config* config, char** json);
GS_API gs_status gs_config_digest(const gs_config* config, uint64_t* digest);
GS_API gs_status gs_config_model(const gs_config* config, char** name);
GS_API void gs_config_free(gs_config* config);

/* Abstraction and synthesis. A cache_dir in the config makes
 * gs_build_transitions reuse and store transition caches. */
GS_API gs_status gs_build_transitions(const gs_config* config, gs_transitions** out, gs_synthesis_report* report);
GS_API gs_status gs_transitions_save(const gs_transitions* ts, const char* path);
GS_API gs_status gs_transitions_load(const char* path, gs_transitions** out);
GS_API void gs_transitions_free(gs_transitions* ts);

/* ts may be NULL, in which case it is built (or read from the cache). */
GS_API gs_status gs_synthesize(const gs_config* config, const gs_transitions* ts, gs_shield** out,
                               gs_synthesis_report* report);
GS_API gs_status gs_shield_save(const gs_shield* shield, const char* path);
GS_API gs_status gs_shield_load(const char* path, gs_shield** out);
GS_API gs_status gs_shield_cells(const gs_shield* shield, uint64_t* cells, uint64_t* winning);
GS_API gs_status gs_shield_lift(const gs_shield* shield, const double* state, size_t dim, uint8_t* mask,
                                int* shielded);
/* CSV of a two-dimensional slice; fixed[d] pins dimension d, NaN leaves it
 * free. Exactly two dimensions must be free. */
GS_API gs_status gs_shield_export_map(const gs_shield* shield, const double* fixed, size_t dim, char** csv);
GS_API void gs_shield_free(gs_shield* shield);

/* Learning. PRE trains under the shield; NONE and POST train without it. */
GS_API gs_status gs_learn(const gs_config* config, const gs_shield* shield, gs_mode mode, gs_qtable** out);
GS_API gs_status gs_qtable_save(const gs_qtable* q, const char* path);
GS_API gs_status gs_qtable_load(const char* path, gs_qtable** out);
GS_API void gs_qtable_free(gs_qtable* q);

/* Evaluation. A NULL agent is the uniformly random agent. */
GS_API gs_status gs_evaluate(const gs_config* config, const gs_shield* shield, const gs_qtable* agent, gs_mode mode,
                             gs_eval_report* report);
GS_API gs_status gs_deterrence_sweep(const gs_config* config, const gs_shield* shield, char** csv);
GS_API gs_status gs_post_optimization(const gs_config* config, const gs_shield* shield, const gs_qtable* agent,
                                      const gs_qtable* pre_shielded_agent, char** csv);
/* Accuracy over the config's gamma x n grid. */
GS_API gs_status gs_accuracy(const gs_config* config, char** csv);
GS_API gs_status gs_clopper_pearson_lower(uint64_t failures, uint64_t trials, double confidence, double* lower);

#ifdef __cplusplus
}
#endif

#endif /* GRIDSHIELD_H */
