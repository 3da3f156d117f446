/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef QKR_H
#define QKR_H

#include <stddef.h>
#include <stdint.h>

typedef enum QkrPropagatorKind {
  QKR_PROPAGATOR_KIND_BESSEL = 0,
  QKR_PROPAGATOR_KIND_SPECTRAL = 1,
} QkrPropagatorKind;

// Result of every fallible call.
typedef enum QkrStatus {
  QKR_STATUS_OK = 0,
  // Bad argument or state outside a precondition.
  QKR_STATUS_INVALID = 1,
  // Malformed config or commensurate schedule.
  QKR_STATUS_CONFIG = 2,
  // Leakage, norm drift, missing plateau.
  QKR_STATUS_NUMERICAL = 3,
  // Scan grid did not bracket the threshold.
  QKR_STATUS_INCONCLUSIVE = 4,
  QKR_STATUS_IO = 5,
  QKR_STATUS_NULL_POINTER = 6,
  // A Rust panic was caught at the boundary.
  QKR_STATUS_PANIC = 7,
} QkrStatus;

typedef struct QkrPlan QkrPlan;

typedef struct QkrPropagator QkrPropagator;

typedef struct QkrReversal QkrReversal;

typedef struct QkrSchedule QkrSchedule;

typedef struct QkrSeries QkrSeries;

typedef struct QkrState QkrState;

// One recorded sample. `fidelity` is NaN when not recorded.
typedef struct QkrSample {
  uint64_t kick;
  double time;
  double n2;
  double entropy;
  double pr;
  uint64_t lmax;
  double norm_err;
  double fidelity;
} QkrSample;

// Scalar outcome of an echo run. `resume_kick` is -1 when no resume was
// detected.
typedef struct QkrReversalSummary {
  uint64_t t_star;
  double epsilon;
  int64_t resume_kick;
  double final_fidelity;
  double eps_th_at_break;
  uint64_t lmax_at_break;
} QkrReversalSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread (empty if none). The
// pointer stays valid until the next failing call on this thread.
const char *qkr_last_error(void);

// Library version as a static NUL-terminated string.
const char *qkr_version(void);

// Releases a string returned by this library.
void qkr_string_free(char *s);

enum QkrStatus qkr_plan_default(struct QkrPlan **out);

// Parses a TOML config; omitted keys take their defaults.
enum QkrStatus qkr_plan_from_toml(const char *text, struct QkrPlan **out);

// Full plan echo; release with `qkr_string_free`.
enum QkrStatus qkr_plan_to_toml(const struct QkrPlan *plan, char **out);

enum QkrStatus qkr_plan_set_epsilon(struct QkrPlan *plan, double epsilon);

// Sets the break time and raises `total_kicks` to `2 t_star` if needed.
enum QkrStatus qkr_plan_set_t_star(struct QkrPlan *plan, uint64_t t_star);

void qkr_plan_free(struct QkrPlan *plan);

enum QkrStatus qkr_state_new_eigenstate(size_t half_width,
                                        int64_t l0,
                                        double hbar,
                                        struct QkrState **out);

enum QkrStatus qkr_state_new_gaussian(size_t half_width,
                                      int64_t center,
                                      double width,
                                      double hbar,
                                      struct QkrState **out);

// Builds a state from `2L + 1` interleaved (re, im) pairs ordered from
// `l = -L` to `l = L`, normalizing them.
enum QkrStatus qkr_state_from_amplitudes(const double *re_im,
                                         size_t dim,
                                         double hbar,
                                         struct QkrState **out);

enum QkrStatus qkr_state_clone(const struct QkrState *state, struct QkrState **out);

// `2L + 1`, or 0 for a null handle.
size_t qkr_state_dim(const struct QkrState *state);

// Copies the amplitudes as interleaved (re, im) pairs into `buf`, which
// must hold `2 * dim` doubles.
enum QkrStatus qkr_state_amplitudes(const struct QkrState *state, double *buf, size_t len);

enum QkrStatus qkr_state_norm(const struct QkrState *state, double *out);

enum QkrStatus qkr_state_n2(const struct QkrState *state, double *out);

enum QkrStatus qkr_state_lmax(const struct QkrState *state, double delta, uint64_t *out);

// Applies the phase perturbation `a_l -> a_l exp(i epsilon l)` in place.
enum QkrStatus qkr_state_perturb(struct QkrState *state, double epsilon);

enum QkrStatus qkr_state_fidelity(const struct QkrState *a, const struct QkrState *b, double *out);

void qkr_state_free(struct QkrState *state);

enum QkrStatus qkr_schedule_new_periodic(double period, size_t horizon, struct QkrSchedule **out);

// Two-comb schedule. A non-positive or NaN `t2` selects the golden ratio.
enum QkrStatus qkr_schedule_new_quasiperiodic(double t1,
                                              double t2,
                                              size_t horizon,
                                              struct QkrSchedule **out);

size_t qkr_schedule_len(const struct QkrSchedule *schedule);

// Copies the `len` inter-kick gaps into `buf`; `buf_len` must be at least
// `qkr_schedule_len`.
enum QkrStatus qkr_schedule_gaps(const struct QkrSchedule *schedule, double *buf, size_t buf_len);

void qkr_schedule_free(struct QkrSchedule *schedule);

// Engine with default tolerances and leakage budget.
enum QkrStatus qkr_propagator_new(enum QkrPropagatorKind kind,
                                  double kick_strength,
                                  double hbar,
                                  size_t half_width,
                                  struct QkrPropagator **out);

// One step: free evolution over `dt`, then a kick.
enum QkrStatus qkr_propagator_forward(struct QkrPropagator *prop,
                                      struct QkrState *state,
                                      double dt);

// Exact inverse of `qkr_propagator_forward` with the same `dt`.
enum QkrStatus qkr_propagator_adjoint(struct QkrPropagator *prop,
                                      struct QkrState *state,
                                      double dt);

void qkr_propagator_free(struct QkrPropagator *prop);

enum QkrStatus qkr_run_forward(const struct QkrPlan *plan, struct QkrSeries **out);

size_t qkr_series_len(const struct QkrSeries *series);

enum QkrStatus qkr_series_get(const struct QkrSeries *series, size_t index, struct QkrSample *out);

enum QkrStatus qkr_series_write_csv(const struct QkrSeries *series, const char *path);

void qkr_series_free(struct QkrSeries *series);

// Forward to `t_star`, perturb by `epsilon`, reverse.
enum QkrStatus qkr_run_reversal(const struct QkrPlan *plan, struct QkrReversal **out);

enum QkrStatus qkr_reversal_summary(const struct QkrReversal *rev, struct QkrReversalSummary *out);

// Copy of the full echo series (forward leg then reversed leg).
enum QkrStatus qkr_reversal_series(const struct QkrReversal *rev, struct QkrSeries **out);

// Copy of the unperturbed reversed leg.
enum QkrStatus qkr_reversal_baseline(const struct QkrReversal *rev, struct QkrSeries **out);

void qkr_reversal_free(struct QkrReversal *rev);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QKR_H */
