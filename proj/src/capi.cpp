#include "ridgerisk/ridgerisk.h"

#include <cmath>
#include <exception>
#include <limits>
#include <new>
#include <string>
#include <vector>

#include "json.hpp"
#include "ridgerisk/error.hpp"
#include "ridgerisk/experiment.hpp"
#include "ridgerisk/risk.hpp"
#include "ridgerisk/spectral.hpp"
#include "ridgerisk/transforms.hpp"

using namespace ridgerisk;

struct rr_spectrum {
  AtomicSpectrum spectrum;
};

struct rr_problem {
  ProblemSpec spec;
};

struct rr_experiment {
  ExperimentConfig config;
  std::vector<std::string> outputs;
  std::string config_json;
};

namespace {

thread_local std::string g_last_error;

rr_status to_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonPositiveEigenvalue: return RR_NON_POSITIVE_EIGENVALUE;
    case ErrorCode::NonPositiveWeight: return RR_NON_POSITIVE_WEIGHT;
    case ErrorCode::WeightsDoNotSumToOne: return RR_WEIGHTS_DO_NOT_SUM_TO_ONE;
    case ErrorCode::EmptySpectrum: return RR_EMPTY_SPECTRUM;
    case ErrorCode::OrderViolation: return RR_ORDER_VIOLATION;
    case ErrorCode::LengthMismatch: return RR_LENGTH_MISMATCH;
    case ErrorCode::NonFiniteValue: return RR_NON_FINITE_VALUE;
    case ErrorCode::InvalidArgument: return RR_INVALID_ARGUMENT;
    case ErrorCode::DomainError: return RR_DOMAIN_ERROR;
    case ErrorCode::NoConvergence: return RR_NO_CONVERGENCE;
    case ErrorCode::SingularDerivative: return RR_SINGULAR_DERIVATIVE;
    case ErrorCode::SourceMismatch: return RR_SOURCE_MISMATCH;
    case ErrorCode::NormalizationViolation: return RR_NORMALIZATION_VIOLATION;
    case ErrorCode::NonFiniteRisk: return RR_NON_FINITE_RISK;
    case ErrorCode::DecompositionFailure: return RR_DECOMPOSITION_FAILURE;
    case ErrorCode::SingularPrior: return RR_SINGULAR_PRIOR;
    case ErrorCode::SchemaError: return RR_SCHEMA_ERROR;
    case ErrorCode::ValueError: return RR_VALUE_ERROR;
    case ErrorCode::UnknownParameter: return RR_UNKNOWN_PARAMETER;
    case ErrorCode::IoError: return RR_IO_ERROR;
  }
  return RR_INTERNAL_ERROR;
}

rr_status fail(rr_status status, std::string message) {
  g_last_error = std::move(message);
  return status;
}

// Runs body, translating exceptions into status codes.
template <class F>
rr_status guarded(F&& body) {
  try {
    g_last_error.clear();
    body();
    return RR_OK;
  } catch (const Error& e) {
    return fail(to_status(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(RR_INTERNAL_ERROR, "out of memory");
  } catch (const std::exception& e) {
    return fail(RR_INTERNAL_ERROR, e.what());
  } catch (...) {
    return fail(RR_INTERNAL_ERROR, "unknown exception");
  }
}

#define RR_REQUIRE(ptr) \
  if (!(ptr)) return fail(RR_NULL_HANDLE, #ptr " is NULL")

void fill(const RiskBreakdown& risk, rr_risk* out) {
  out->lambda = risk.lambda;
  out->variance = risk.variance;
  out->bias = risk.bias;
  out->total = risk.total;
  out->v = risk.companion.v;
  out->v_prime = risk.companion.v_prime;
}

}  // namespace

extern "C" {

const char* rr_status_name(rr_status status) {
  switch (status) {
    case RR_OK: return "Ok";
    case RR_NULL_HANDLE: return "NullHandle";
    case RR_OUT_OF_RANGE: return "OutOfRange";
    case RR_INTERNAL_ERROR: return "InternalError";
    default: break;
  }
  if (status >= RR_NON_POSITIVE_EIGENVALUE && status <= RR_IO_ERROR)
    return error_code_name(static_cast<ErrorCode>(status - 1));
  return "Unknown";
}

int rr_status_is_numerical(rr_status status) {
  if (status >= RR_NON_POSITIVE_EIGENVALUE && status <= RR_IO_ERROR)
    return is_numerical(static_cast<ErrorCode>(status - 1)) ? 1 : 0;
  return 0;
}

const char* rr_last_error_message(void) { return g_last_error.c_str(); }

const char* rr_version(void) { return "0.1.0"; }

rr_status rr_spectrum_create(const double* taus, const double* weights, size_t count,
                             rr_spectrum** out) {
  RR_REQUIRE(out);
  *out = nullptr;
  if (count > 0) {
    RR_REQUIRE(taus);
    RR_REQUIRE(weights);
  }
  return guarded([&] {
    std::vector<std::pair<double, double>> pairs(count);
    for (size_t i = 0; i < count; ++i) pairs[i] = {taus[i], weights[i]};
    *out = new rr_spectrum{AtomicSpectrum::make(pairs)};
  });
}

void rr_spectrum_free(rr_spectrum* spectrum) { delete spectrum; }

rr_status rr_spectrum_size(const rr_spectrum* spectrum, size_t* out) {
  RR_REQUIRE(spectrum);
  RR_REQUIRE(out);
  *out = spectrum->spectrum.size();
  return RR_OK;
}

rr_status rr_spectrum_atom(const rr_spectrum* spectrum, size_t index, double* tau,
                           double* weight) {
  RR_REQUIRE(spectrum);
  if (index >= spectrum->spectrum.size())
    return fail(RR_OUT_OF_RANGE, "atom index " + std::to_string(index) + " out of range");
  if (tau) *tau = spectrum->spectrum[index].tau;
  if (weight) *weight = spectrum->spectrum[index].weight;
  return RR_OK;
}

rr_status rr_solve_companion(const rr_spectrum* spectrum, double gamma, double lambda,
                             int want_second_derivative, rr_companion* out) {
  RR_REQUIRE(spectrum);
  RR_REQUIRE(out);
  return guarded([&] {
    SolverOptions options;
    options.second_derivative = want_second_derivative != 0;
    const auto eval = solve_companion(spectrum->spectrum, gamma, lambda, options);
    out->lambda = eval.lambda;
    out->v = eval.v;
    out->v_prime = eval.v_prime;
    out->v_second = eval.v_second.value_or(std::numeric_limits<double>::quiet_NaN());
    out->residual = eval.residual;
    out->iterations = eval.iterations;
    out->used_bisection = eval.used_bisection ? 1 : 0;
  });
}

rr_status rr_stieltjes_from_companion(double gamma, double lambda, double v, double* out) {
  RR_REQUIRE(out);
  return guarded([&] { *out = stieltjes_from_companion(gamma, lambda, v); });
}

rr_status rr_problem_create_constant(const rr_spectrum* spectrum, double value, double gamma,
                                     double sigma2, double r2, rr_problem** out) {
  RR_REQUIRE(spectrum);
  RR_REQUIRE(out);
  *out = nullptr;
  return guarded([&] {
    *out = new rr_problem{ProblemSpec::make(spectrum->spectrum,
                                            SourceFunction::constant(spectrum->spectrum, value),
                                            gamma, sigma2, r2)};
  });
}

rr_status rr_problem_create_power(const rr_spectrum* spectrum, double alpha, double gamma,
                                  double sigma2, double r2, rr_problem** out) {
  RR_REQUIRE(spectrum);
  RR_REQUIRE(out);
  *out = nullptr;
  return guarded([&] {
    *out = new rr_problem{ProblemSpec::make(spectrum->spectrum,
                                            SourceFunction::power(spectrum->spectrum, alpha),
                                            gamma, sigma2, r2)};
  });
}

rr_status rr_problem_create_tabulated(const rr_spectrum* spectrum, const double* phis,
                                      size_t count, double gamma, double sigma2, double r2,
                                      rr_problem** out) {
  RR_REQUIRE(spectrum);
  RR_REQUIRE(out);
  *out = nullptr;
  if (count > 0) RR_REQUIRE(phis);
  if (count != spectrum->spectrum.size())
    return fail(RR_LENGTH_MISMATCH, "expected " + std::to_string(spectrum->spectrum.size()) +
                                        " source values, got " + std::to_string(count));
  return guarded([&] {
    std::vector<std::pair<double, double>> table(count);
    for (size_t i = 0; i < count; ++i) table[i] = {spectrum->spectrum[i].tau, phis[i]};
    *out = new rr_problem{ProblemSpec::make(
        spectrum->spectrum, SourceFunction::tabulated(spectrum->spectrum, table), gamma, sigma2, r2)};
  });
}

rr_status rr_problem_create_strong_weak(double rho1, double rho2, double psi1, double phi1,
                                        double phi2, double gamma, double sigma2, double r2,
                                        rr_problem** out) {
  RR_REQUIRE(out);
  *out = nullptr;
  return guarded([&] {
    auto model = strong_weak_model(rho1, rho2, psi1, phi1, phi2);
    *out = new rr_problem{ProblemSpec::make(std::move(model.spectrum), std::move(model.source),
                                            gamma, sigma2, r2)};
  });
}

void rr_problem_free(rr_problem* problem) { delete problem; }

rr_status rr_asymptotic_risk(const rr_problem* problem, double lambda, rr_risk* out) {
  RR_REQUIRE(problem);
  RR_REQUIRE(out);
  return guarded([&] { fill(asymptotic_risk(problem->spec, lambda), out); });
}

rr_status rr_closed_form_risk(const rr_problem* problem, double lambda,
                              rr_source_variant variant, rr_risk* out) {
  RR_REQUIRE(problem);
  RR_REQUIRE(out);
  SourceVariant v;
  switch (variant) {
    case RR_SOURCE_LINEAR: v = SourceVariant::Linear; break;
    case RR_SOURCE_CONSTANT: v = SourceVariant::Constant; break;
    case RR_SOURCE_INVERSE: v = SourceVariant::Inverse; break;
    default: return fail(RR_INVALID_ARGUMENT, "unknown source variant");
  }
  return guarded([&] { fill(closed_form_risk(problem->spec, lambda, v), out); });
}

rr_status rr_risk_derivative(const rr_problem* problem, double lambda, double* out) {
  RR_REQUIRE(problem);
  RR_REQUIRE(out);
  return guarded([&] { *out = risk_derivative(problem->spec, lambda); });
}

rr_status rr_optimal_lambda(const rr_problem* problem, double lambda_max,
                            double relative_tolerance, rr_optimum* out) {
  RR_REQUIRE(problem);
  RR_REQUIRE(out);
  return guarded([&] {
    OptimalLambdaOptions options;
    if (lambda_max > 0.0) options.lambda_max = lambda_max;
    if (relative_tolerance > 0.0) options.relative_tolerance = relative_tolerance;
    const auto best = optimal_lambda(problem->spec, options);
    out->lambda = best.lambda;
    fill(best.risk, &out->risk);
    out->has_boundary_derivative = best.boundary_derivative.has_value() ? 1 : 0;
    out->boundary_derivative =
        best.boundary_derivative.value_or(std::numeric_limits<double>::quiet_NaN());
    out->interior_lambda = best.interior_lambda;
    out->interior_total = best.interior_total;
  });
}

rr_status rr_interpolation_optimality(double rho1, double rho2, double phi1, double phi2,
                                      double snr, double* lhs, int* optimal) {
  RR_REQUIRE(lhs);
  RR_REQUIRE(optimal);
  return guarded([&] {
    const auto result = interpolation_optimality(rho1, rho2, phi1, phi2, snr);
    *lhs = result.lhs;
    *optimal = result.interpolation_optimal ? 1 : 0;
  });
}

rr_status rr_experiment_parse(const char* json, rr_experiment** out) {
  RR_REQUIRE(json);
  RR_REQUIRE(out);
  *out = nullptr;
  return guarded([&] { *out = new rr_experiment{parse_config(json), {}, {}}; });
}

rr_status rr_experiment_from_preset(const char* name, rr_experiment** out) {
  RR_REQUIRE(name);
  RR_REQUIRE(out);
  *out = nullptr;
  return guarded([&] { *out = new rr_experiment{preset_config(name), {}, {}}; });
}

rr_status rr_experiment_parse_preset(const char* name, const char* json, rr_experiment** out) {
  RR_REQUIRE(name);
  RR_REQUIRE(json);
  RR_REQUIRE(out);
  *out = nullptr;
  return guarded([&] {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(json);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCode::SchemaError, std::string("$: malformed JSON: ") + e.what());
    }
    if (!doc.is_object()) throw Error(ErrorCode::SchemaError, "$: expected an object");
    doc["preset"] = name;
    if (!doc.contains("mode")) doc["mode"] = "figure";
    *out = new rr_experiment{parse_config(doc.dump()), {}, {}};
  });
}

void rr_experiment_free(rr_experiment* experiment) { delete experiment; }

rr_status rr_experiment_set_mode(rr_experiment* experiment, const char* mode) {
  RR_REQUIRE(experiment);
  RR_REQUIRE(mode);
  return guarded([&] { experiment->config.mode = parse_mode(mode); });
}

rr_status rr_experiment_set_seed(rr_experiment* experiment, uint64_t seed) {
  RR_REQUIRE(experiment);
  experiment->config.simulation.seed = seed;
  return RR_OK;
}

rr_status rr_experiment_set_threads(rr_experiment* experiment, unsigned threads) {
  RR_REQUIRE(experiment);
  experiment->config.threads = threads;
  return RR_OK;
}

rr_status rr_experiment_set_output(rr_experiment* experiment, const char* directory) {
  RR_REQUIRE(experiment);
  RR_REQUIRE(directory);
  experiment->config.output = directory;
  return RR_OK;
}

rr_status rr_experiment_set_theory_only(rr_experiment* experiment) {
  RR_REQUIRE(experiment);
  experiment->config.simulation.replications = 0;
  return RR_OK;
}

rr_status rr_experiment_set_sweep(rr_experiment* experiment, const char* parameter,
                                  const double* values, size_t count) {
  RR_REQUIRE(experiment);
  RR_REQUIRE(parameter);
  if (count > 0) RR_REQUIRE(values);
  experiment->config.sweep = SweepBlock{parameter, std::vector<double>(values, values + count)};
  return RR_OK;
}

rr_status rr_experiment_config_json(rr_experiment* experiment, const char** out) {
  RR_REQUIRE(experiment);
  RR_REQUIRE(out);
  return guarded([&] {
    experiment->config_json = config_to_json(experiment->config);
    *out = experiment->config_json.c_str();
  });
}

rr_status rr_experiment_run(rr_experiment* experiment) {
  RR_REQUIRE(experiment);
  return guarded([&] {
    experiment->outputs.clear();
    for (const auto& path : run_experiment(experiment->config))
      experiment->outputs.push_back(path.string());
  });
}

rr_status rr_experiment_output_count(const rr_experiment* experiment, size_t* out) {
  RR_REQUIRE(experiment);
  RR_REQUIRE(out);
  *out = experiment->outputs.size();
  return RR_OK;
}

rr_status rr_experiment_output_path(const rr_experiment* experiment, size_t index,
                                    const char** out) {
  RR_REQUIRE(experiment);
  RR_REQUIRE(out);
  if (index >= experiment->outputs.size())
    return fail(RR_OUT_OF_RANGE, "output index " + std::to_string(index) + " out of range");
  *out = experiment->outputs[index].c_str();
  return RR_OK;
}

}  // extern "C"
