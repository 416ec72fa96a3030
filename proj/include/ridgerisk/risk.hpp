#pragma once

#include <optional>
#include <string>

#include "ridgerisk/spectral.hpp"
#include "ridgerisk/transforms.hpp"

namespace ridgerisk {

// Limiting excess prediction risk of ridge regression at one lambda.
struct RiskBreakdown {
  double lambda = 0.0;
  double variance = 0.0;  // sigma^2 (v'/v^2 - 1)
  double bias = 0.0;      // r^2 (v'/v^2) int Phi(tau) tau/(1+tau v)^2 dH
  double total = 0.0;     // variance + bias
  CompanionEval companion;
};

// lambda > 0, or lambda == 0 with gamma > 1 (ridgeless limit).
RiskBreakdown asymptotic_risk(const ProblemSpec& spec, double lambda);

enum class SourceVariant { Linear, Constant, Inverse };  // Phi(x) = x, 1, 1/x

// Bias from the closed forms available when Phi is x, 1 or 1/x; they only
// need v and v'. Throws SourceMismatch when spec.source differs from the
// variant on some atom (relative tolerance 1e-12).
RiskBreakdown closed_form_risk(const ProblemSpec& spec, double lambda, SourceVariant variant);

RiskBreakdown strong_weak_risk(double rho1, double rho2, double psi1, double phi1, double phi2,
                               double gamma, double sigma2, double r2, double lambda);

// dR/dlambda from v, v', v''. For lambda == 0 this is the right derivative.
double risk_derivative(const ProblemSpec& spec, double lambda);

struct OptimalLambda {
  double lambda = 0.0;
  RiskBreakdown risk;
  // R'(0) when the ridgeless boundary was admissible (gamma > 1).
  std::optional<double> boundary_derivative;
  // Best interior point found by the search (reported even when the boundary wins).
  double interior_lambda = 0.0;
  double interior_total = 0.0;
};

struct OptimalLambdaOptions {
  std::optional<double> lambda_max;  // default 10 max(1, sigma^2 gamma / r^2) tau_max
  double relative_tolerance = 1e-6;
  int scan_points = 64;              // log-spaced bracketing scan before golden section
};

OptimalLambda optimal_lambda(const ProblemSpec& spec, const OptimalLambdaOptions& options = {});

struct InterpolationOptimality {
  double lhs;  // snr rho1 rho2/(s1+s2)^2 * ((phi1 s1 + phi2 s2)/(s1+s2) - 1), s_i = sqrt(rho_i)
  bool interpolation_optimal;  // lhs >= 1, i.e. R'(0) >= 0
};

// Closed-form sign test for R'(0) in the two-bulk model with gamma = 2,
// psi1 = psi2 = 1/2 and phi1 + phi2 = 2.
InterpolationOptimality interpolation_optimality(double rho1, double rho2, double phi1,
                                                 double phi2, double snr);

struct OracleReference {
  bool closed_form = false;     // true when the oracle is itself a ridge estimator
  std::optional<double> lambda;  // sigma^2 gamma / (r^2 c) for Phi == c
  std::string note;
};

// The Bayes-optimal linear estimator coincides with ridge only for constant Phi.
OracleReference oracle_risk_reference(const ProblemSpec& spec);

// Golden-section minimization of f on [lo, hi] to |hi - lo| <= tol.
template <class F>
double golden_section_minimize(F&& f, double lo, double hi, double tol, int max_iter = 500) {
  constexpr double kInvPhi = 0.6180339887498949;
  double a = lo;
  double b = hi;
  double c = b - kInvPhi * (b - a);
  double d = a + kInvPhi * (b - a);
  double fc = f(c);
  double fd = f(d);
  for (int i = 0; i < max_iter && (b - a) > tol; ++i) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - kInvPhi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + kInvPhi * (b - a);
      fd = f(d);
    }
  }
  return fc <= fd ? c : d;
}

}  // namespace ridgerisk
