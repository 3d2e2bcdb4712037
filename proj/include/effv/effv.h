#ifndef EFFV_EFFV_H
#define EFFV_EFFV_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define EFFV_API __declspec(dllexport)
#else
#define EFFV_API __attribute__((visibility("default")))
#endif

typedef enum effv_status {
  EFFV_OK = 0,
  EFFV_ERR_SYNTAX,
  EFFV_ERR_SEMANTIC,
  EFFV_ERR_TYPE,
  EFFV_ERR_EFFECT,
  EFFV_ERR_TRANSLATE,
  EFFV_ERR_WELLFORMED,
  EFFV_ERR_VCGEN,
  EFFV_ERR_SMT,
  EFFV_ERR_RUNTIME,
  EFFV_ERR_USAGE,
  EFFV_ERR_INTERNAL,
  EFFV_ERR_IO,
  EFFV_ERR_STATE /* operation needs a loaded program */
} effv_status;

/* One program plus solver and interpreter options. Not thread-safe; use one
   session per thread. Strings returned by a session stay valid until the next
   call on the same session. */
typedef struct effv_session effv_session;

EFFV_API const char *effv_version(void);
EFFV_API const char *effv_status_name(effv_status s);

EFFV_API effv_session *effv_session_new(void);
EFFV_API void effv_session_free(effv_session *s);

/* Message of the last failed call, or "" */
EFFV_API const char *effv_last_error(const effv_session *s);

/* key: solver, solver_path, solver_args, timeout, jobs, logic, fuel, trials, seed */
EFFV_API effv_status effv_set_option(effv_session *s, const char *key, const char *value);
EFFV_API effv_status effv_load_config(effv_session *s, const char *path);
/* Applies EFFV_SOLVER_PATH if set. */
EFFV_API effv_status effv_apply_environment(effv_session *s);

/* Parse and type check. The name is used in reports. */
EFFV_API effv_status effv_load_file(effv_session *s, const char *path);
EFFV_API effv_status effv_load_source(effv_session *s, const char *name, const char *text, size_t len);

EFFV_API effv_status effv_emit_ir(effv_session *s, const char **out);
EFFV_API effv_status effv_emit_vcs(effv_session *s, int with_trivial, const char **out);
EFFV_API effv_status effv_vc_counts(effv_session *s, size_t *total, size_t *nontrivial);
EFFV_API effv_status effv_emit_smt(effv_session *s, const char *vc_id, const char **out);
EFFV_API effv_status effv_dump_smt(effv_session *s, const char *dir);

/* Discharges every non-trivial VC. *all_valid is 1 iff each one is valid. */
EFFV_API effv_status effv_prove(effv_session *s, int *all_valid, const char **text, const char **json);

/* Runs entry on literal arguments. checked selects contract checking.
   *outcome: 0 value, 1 contract violation, 2 runtime error, 3 precondition unmet. */
EFFV_API effv_status effv_run(effv_session *s, const char *entry, const char *const *args, size_t nargs, int checked,
                              int *outcome, const char **text, const char **trace_json);

/* Randomized run_checked over the closed entries. *clean is 1 iff there was
   no contract or one-shot violation. */
EFFV_API effv_status effv_oracle(effv_session *s, int *clean, const char **text);

/* Corpus report over every .eff file in dir. Does not need a loaded program. */
EFFV_API effv_status effv_bench(effv_session *s, const char *dir, const char **table, const char **json);

#ifdef __cplusplus
}
#endif

#endif
