/* C interface to the ridgerisk library.
 *
 * Every function returns an rr_status. On failure a message for the calling
 * thread is available from rr_last_error_message() until the next call.
 * Handles are opaque; free each one exactly once with its *_free function.
 */
#ifndef RIDGERISK_H
#define RIDGERISK_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#if defined(RIDGERISK_BUILDING_LIBRARY)
#define RR_API __declspec(dllexport)
#else
#define RR_API __declspec(dllimport)
#endif
#else
#define RR_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum rr_status {
  RR_OK = 0,
  RR_NON_POSITIVE_EIGENVALUE = 1,
  RR_NON_POSITIVE_WEIGHT = 2,
  RR_WEIGHTS_DO_NOT_SUM_TO_ONE = 3,
  RR_EMPTY_SPECTRUM = 4,
  RR_ORDER_VIOLATION = 5,
  RR_LENGTH_MISMATCH = 6,
  RR_NON_FINITE_VALUE = 7,
  RR_INVALID_ARGUMENT = 8,
  RR_DOMAIN_ERROR = 9,
  RR_NO_CONVERGENCE = 10,
  RR_SINGULAR_DERIVATIVE = 11,
  RR_SOURCE_MISMATCH = 12,
  RR_NORMALIZATION_VIOLATION = 13,
  RR_NON_FINITE_RISK = 14,
  RR_DECOMPOSITION_FAILURE = 15,
  RR_SINGULAR_PRIOR = 16,
  RR_SCHEMA_ERROR = 17,
  RR_VALUE_ERROR = 18,
  RR_UNKNOWN_PARAMETER = 19,
  RR_IO_ERROR = 20,
  RR_NULL_HANDLE = 21,
  RR_OUT_OF_RANGE = 22,
  RR_INTERNAL_ERROR = 99
} rr_status;

/* Name of a status code, e.g. "NoConvergence". Never NULL. */
RR_API const char* rr_status_name(rr_status status);
/* Nonzero for failures of the numerical routines (solver, decomposition,
 * non-finite output) as opposed to bad input. */
RR_API int rr_status_is_numerical(rr_status status);
RR_API const char* rr_last_error_message(void);
RR_API const char* rr_version(void);

typedef struct rr_spectrum rr_spectrum;
typedef struct rr_problem rr_problem;
typedef struct rr_experiment rr_experiment;

/* Atomic spectrum from parallel arrays; weights must sum to one. */
RR_API rr_status rr_spectrum_create(const double* taus, const double* weights, size_t count,
                                    rr_spectrum** out);
RR_API void rr_spectrum_free(rr_spectrum* spectrum);
RR_API rr_status rr_spectrum_size(const rr_spectrum* spectrum, size_t* out);
RR_API rr_status rr_spectrum_atom(const rr_spectrum* spectrum, size_t index, double* tau,
                                  double* weight);

typedef struct rr_companion {
  double lambda;
  double v;
  double v_prime;
  double v_second; /* NaN unless requested */
  double residual;
  int iterations;
  int used_bisection;
} rr_companion;

RR_API rr_status rr_solve_companion(const rr_spectrum* spectrum, double gamma, double lambda,
                                    int want_second_derivative, rr_companion* out);
RR_API rr_status rr_stieltjes_from_companion(double gamma, double lambda, double v, double* out);

/* Problem = spectrum + source + (gamma, sigma2, r2). The spectrum is copied. */
RR_API rr_status rr_problem_create_constant(const rr_spectrum* spectrum, double value,
                                            double gamma, double sigma2, double r2,
                                            rr_problem** out);
RR_API rr_status rr_problem_create_power(const rr_spectrum* spectrum, double alpha, double gamma,
                                         double sigma2, double r2, rr_problem** out);
/* phis[i] is the source value at the i-th atom of the spectrum. */
RR_API rr_status rr_problem_create_tabulated(const rr_spectrum* spectrum, const double* phis,
                                             size_t count, double gamma, double sigma2,
                                             double r2, rr_problem** out);
RR_API rr_status rr_problem_create_strong_weak(double rho1, double rho2, double psi1,
                                               double phi1, double phi2, double gamma,
                                               double sigma2, double r2, rr_problem** out);
RR_API void rr_problem_free(rr_problem* problem);

typedef struct rr_risk {
  double lambda;
  double variance;
  double bias;
  double total;
  double v;
  double v_prime;
} rr_risk;

typedef enum rr_source_variant {
  RR_SOURCE_LINEAR = 0,   /* Phi(x) = x */
  RR_SOURCE_CONSTANT = 1, /* Phi(x) = 1 */
  RR_SOURCE_INVERSE = 2   /* Phi(x) = 1/x */
} rr_source_variant;

RR_API rr_status rr_asymptotic_risk(const rr_problem* problem, double lambda, rr_risk* out);
RR_API rr_status rr_closed_form_risk(const rr_problem* problem, double lambda,
                                     rr_source_variant variant, rr_risk* out);
RR_API rr_status rr_risk_derivative(const rr_problem* problem, double lambda, double* out);

typedef struct rr_optimum {
  double lambda;
  rr_risk risk;
  int has_boundary_derivative;
  double boundary_derivative;
  double interior_lambda;
  double interior_total;
} rr_optimum;

/* lambda_max <= 0 selects the default search range. */
RR_API rr_status rr_optimal_lambda(const rr_problem* problem, double lambda_max,
                                   double relative_tolerance, rr_optimum* out);
RR_API rr_status rr_interpolation_optimality(double rho1, double rho2, double phi1, double phi2,
                                             double snr, double* lhs, int* optimal);

/* Experiments: JSON configuration or a named figure preset. */
RR_API rr_status rr_experiment_parse(const char* json, rr_experiment** out);
RR_API rr_status rr_experiment_from_preset(const char* name, rr_experiment** out);
/* Preset with fields overridden by a JSON object (same schema as parse). */
RR_API rr_status rr_experiment_parse_preset(const char* name, const char* json,
                                            rr_experiment** out);
RR_API void rr_experiment_free(rr_experiment* experiment);
/* mode: risk-curve | optimal-lambda | mc-compare | figure | sweep */
RR_API rr_status rr_experiment_set_mode(rr_experiment* experiment, const char* mode);
RR_API rr_status rr_experiment_set_seed(rr_experiment* experiment, uint64_t seed);
RR_API rr_status rr_experiment_set_threads(rr_experiment* experiment, unsigned threads);
RR_API rr_status rr_experiment_set_output(rr_experiment* experiment, const char* directory);
/* Drops all simulation work. */
RR_API rr_status rr_experiment_set_theory_only(rr_experiment* experiment);
RR_API rr_status rr_experiment_set_sweep(rr_experiment* experiment, const char* parameter,
                                         const double* values, size_t count);
/* Resolved configuration as JSON; valid until the handle changes or is freed. */
RR_API rr_status rr_experiment_config_json(rr_experiment* experiment, const char** out);
RR_API rr_status rr_experiment_run(rr_experiment* experiment);
RR_API rr_status rr_experiment_output_count(const rr_experiment* experiment, size_t* out);
RR_API rr_status rr_experiment_output_path(const rr_experiment* experiment, size_t index,
                                           const char** out);

#ifdef __cplusplus
}
#endif

#endif /* RIDGERISK_H */
