#ifndef RTP_H
#define RTP_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes returned by every fallible call. */
typedef enum rtp_status {
  RTP_OK = 0,
  RTP_ERR_INVALID_PARAMETER = 1,
  RTP_ERR_DOMAIN = 2,
  RTP_ERR_POLE_GUARD = 3,
  RTP_ERR_NON_CONVERGENCE = 4,
  RTP_ERR_NUMERIC = 5,
  RTP_ERR_VERIFICATION = 6,
  RTP_ERR_CONFIG = 7,
  RTP_ERR_IO = 8,
  RTP_ERR_INTERNAL = 9
} rtp_status;

const char* rtp_version(void);
/* Message of the last failed call on this thread ("" if none). */
const char* rtp_last_error(void);
const char* rtp_status_name(rtp_status status);
/* Command line exit status for a failure: 2 config, 3 verification, 4 numeric. 0 for RTP_OK. */
int rtp_exit_code(rtp_status status);
/* Releases strings returned through char** out-parameters. */
void rtp_string_free(char* s);
/* 17-significant-digit decimal form of x into buf (at least 32 bytes). */
rtp_status rtp_format_number(double x, char* buf, size_t cap);

typedef struct rtp_process rtp_process;
typedef struct rtp_measure rtp_measure;
typedef struct rtp_trajectory rtp_trajectory;

typedef struct rtp_state {
  double x;
  int mode;
} rtp_state;

/* process: "instantaneous-linear", "finite-linear", "instantaneous-harmonic" or "finite-harmonic".
   Unused rate and potential fields are ignored. */
typedef struct rtp_process_params {
  const char* process;
  double omega, alpha, beta;
  double c, mu;
  double v;
} rtp_process_params;

rtp_status rtp_process_create(const rtp_process_params* params, rtp_process** out);
void rtp_process_free(rtp_process* p);
const char* rtp_process_name(const rtp_process* p);
int rtp_process_num_modes(const rtp_process* p);
/* Mode label such as "+2" or "0pm"; NULL when out of range. */
const char* rtp_process_mode_label(const rtp_process* p, int mode);
/* Relative velocity sigma of a mode (in {-2, ..., 2}). */
int rtp_process_mode_velocity(const rtp_process* p, int mode);
/* -1 when the label is unknown. */
int rtp_process_mode_index(const rtp_process* p, const char* label);
rtp_status rtp_process_spectral_gap(const rtp_process* p, double* out);
/* Stationary law of the velocity chain, num_modes entries. */
rtp_status rtp_process_stationary_law(const rtp_process* p, double* out);

/* Exact event-driven path; event kinds 0 start, 1 jump, 2 hit zero. */
rtp_status rtp_trajectory_simulate(const rtp_process* p, rtp_state init, double horizon, uint64_t seed,
                                   rtp_trajectory** out);
void rtp_trajectory_free(rtp_trajectory* tr);
size_t rtp_trajectory_num_events(const rtp_trajectory* tr);
rtp_status rtp_trajectory_event(const rtp_trajectory* tr, size_t i, double* t, rtp_state* state, int* kind);
rtp_status rtp_trajectory_state_at(const rtp_process* p, const rtp_trajectory* tr, double t, rtp_state* out);
/* CSV text with columns t,x,sigma,event_kind; sigma is the mode label. */
rtp_status rtp_trajectory_csv(const rtp_process* p, const rtp_trajectory* tr, char** out);

/* States of n replicas at each time of the sorted grid; out holds nt * n states, time-major.
   Replica i uses random stream (seed, i), so results do not depend on threads. */
rtp_status rtp_simulate_ensemble_grid(const rtp_process* p, rtp_state init, const double* tgrid, size_t nt,
                                      size_t n, uint64_t seed, int threads, rtp_state* out);

/* Invariant measure of a process (linear potentials and the instantaneous harmonic one). */
rtp_status rtp_measure_create(const rtp_process* p, rtp_measure** out);
/* Measure from its JSON export. */
rtp_status rtp_measure_from_json(const char* json, rtp_measure** out);
void rtp_measure_free(rtp_measure* m);
rtp_status rtp_measure_to_json(const rtp_measure* m, char** out);
/* Process described by the parameters stored in the measure. */
rtp_status rtp_measure_process(const rtp_measure* m, rtp_process** out);
int rtp_measure_num_modes(const rtp_measure* m);
rtp_status rtp_measure_atom(const rtp_measure* m, int mode, double* out);
rtp_status rtp_measure_density(const rtp_measure* m, double x, int mode, double* out);
/* Mass of {x' > x}, summed over modes. */
rtp_status rtp_measure_tail(const rtp_measure* m, double x, double* out);
rtp_status rtp_measure_support_max(const rtp_measure* m, double* out);
/* Exponential tail rate; +inf for compact support. */
rtp_status rtp_measure_tail_rate(const rtp_measure* m, double* out);
/* Natural length scale: 1/tail rate or the support length. */
rtp_status rtp_measure_scale(const rtp_measure* m, double* out);
/* n exact samples; sample i uses stream (seed, i). */
rtp_status rtp_measure_sample(const rtp_measure* m, size_t n, uint64_t seed, rtp_state* out);

typedef struct rtp_residual {
  char name[48];
  double value;          /* integral of the generator applied to the test function */
  double error_estimate; /* quadrature error estimate */
} rtp_residual;

/* Residuals over the standard 20-function test family; writes min(cap, 20) entries, *count = 20. */
rtp_status rtp_stationarity_residuals(const rtp_measure* m, const rtp_process* p, rtp_residual* out, size_t cap,
                                      size_t* count);

/* Chernoff eigenvalue Lambda(u) of the velocity chain and its derivative (derivative may be NULL). */
rtp_status rtp_chernoff_lambda(const rtp_process* p, double u, double* value, double* derivative);
/* Rate function I(R), |R| <= 1, with the maximizing u (may be NULL). */
rtp_status rtp_rate_function(const rtp_process* p, double R, double* value, double* maximizer);
rtp_status rtp_rate_function_derivative(const rtp_process* p, double R, double* out);
rtp_status rtp_lezaud_bound(double alpha, double beta, double R, double* out);
/* lim (1/L) log E[e^{u tau_L}] for linear potentials, u < 0. */
rtp_status rtp_hitting_exponent(const rtp_process* p, double u, double* out);

typedef struct rtp_decay_bounds {
  double lambda_q;
  double I;
  double R;
  double r;
  double lower_rate;
  double lower_half_min;
  double lower_stated;
  double upper_rate_exact;
  double upper_rate_stated;
} rtp_decay_bounds;
/* Total variation decay bounds for linear potentials. */
rtp_status rtp_decay_bounds_compute(const rtp_process* p, rtp_decay_bounds* out);

typedef struct rtp_wasserstein_rate {
  double s;
  double contraction;
  double rate;
  double limit_rate;
} rtp_wasserstein_rate;
/* Wasserstein-p contraction rate of the harmonic process with moment exponent q (q = INFINITY allowed). */
rtp_status rtp_wasserstein_rate_compute(double omega, double mu, double p, double q, rtp_wasserstein_rate* out);

typedef struct rtp_finite_roots {
  double zeta2;
  double zeta3; /* NaN when absent */
  int has_zeta3;
  double a2[6]; /* kernel vectors over the modes +2, +1, 0pm, 00, -1, -2 */
  double a3[6];
  double residual2;
  double residual3;
  double p2_at_zeta2;
  double p3_at_zeta3;
} rtp_finite_roots;
rtp_status rtp_finite_roots_compute(double alpha, double beta, double c, double v, rtp_finite_roots* out);

typedef struct rtp_upper_rate {
  double exact;
  double stated;
  double ratio;
} rtp_upper_rate;
rtp_status rtp_upper_rate_finite(double alpha, double beta, double c, double v, rtp_upper_rate* out);

typedef struct rtp_tv_point {
  double t;
  double histogram;     /* histogram total variation to the invariant measure */
  double histogram_se;
  double histogram_floor; /* same estimator on n exact invariant samples: its bias floor */
  double mismatch;      /* P(X(t) != X~(t)) under the synchronous coupling with X~(0) ~ invariant */
  double mismatch_se;
  double meeting_bound; /* union bound from coalescence and zero hitting */
  double meeting_bound_se;
  double theta;
} rtp_tv_point;
/* Linear potentials. bin_width <= 0 picks the default 0.05 times the measure scale. */
rtp_status rtp_tv_decay(const rtp_process* p, rtp_state init, const double* tgrid, size_t nt, size_t n,
                        uint64_t seed, int threads, double bin_width, rtp_tv_point* out);

typedef struct rtp_wasserstein_point {
  double t;
  double lower;         /* quantile W_p of the x-marginals */
  double upper_greedy;  /* explicit sample coupling */
  double upper_paired;  /* synchronous coupling cost */
  double upper_paired_se;
  double upper;         /* min of the two couplings */
} rtp_wasserstein_point;
/* Mixed distance between the law at t from init and the invariant measure, p >= 1. */
rtp_status rtp_wasserstein_decay(const rtp_process* p, rtp_state init, const double* tgrid, size_t nt, size_t n,
                                 uint64_t seed, int threads, double p_exponent, rtp_wasserstein_point* out);

typedef struct rtp_rate_fit {
  double rate;
  double intercept;
  double std_error;
  double t_min;
  double t_max;
  int points_used;
} rtp_rate_fit;
/* Weighted log-linear fit of value ~ e^{intercept - rate t} on [t_min, t_max]; se may be NULL.
   bias_floor NaN disables the floor exclusion. */
rtp_status rtp_fit_rate(const double* t, const double* value, const double* se, size_t n, double t_min,
                        double t_max, double bias_floor, rtp_rate_fit* out);

#ifdef __cplusplus
}
#endif

#endif
