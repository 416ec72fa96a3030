#pragma once

#include <optional>

#include "ridgerisk/spectral.hpp"

namespace ridgerisk {

// Companion transform v(z) of the Gram spectrum, evaluated at z = -lambda.
struct CompanionEval {
  double lambda = 0.0;
  double v = 0.0;
  double v_prime = 0.0;                 // dv/dz at z = -lambda
  std::optional<double> v_second;       // d2v/dz2 at z = -lambda
  double residual = 0.0;                // v - 1/(lambda + gamma int tau/(1+tau v) dH)
  int iterations = 0;
  bool used_bisection = false;
};

enum class CompanionMethod { Auto, FixedPoint, Bisection };

struct SolverOptions {
  CompanionMethod method = CompanionMethod::Auto;
  double damping = 1.0;          // v <- (1-damping) v + damping f(v)
  double step_tolerance = 1e-12;
  int max_iterations = 10000;
  double residual_tolerance = 1e-10;  // scaled by max(1, v)
  bool second_derivative = false;
};

// v - 1/(lambda + gamma * int tau/(1+tau v) dH).
double companion_residual(const AtomicSpectrum& spectrum, double gamma, double lambda, double v);

// Solves the Silverstein equation -1/v = -lambda - gamma int tau/(1+tau v) dH
// for v(-lambda) > 0. lambda == 0 is accepted only for gamma > 1.
CompanionEval solve_companion(const AtomicSpectrum& spectrum, double gamma, double lambda,
                              const SolverOptions& options = {});

// v(0) for gamma > 1.
CompanionEval solve_companion_ridgeless(const AtomicSpectrum& spectrum, double gamma,
                                        const SolverOptions& options = {});

// v' = (1/v^2 - gamma int tau^2/(1+tau v)^2 dH)^-1. Throws SingularDerivative
// when the bracket is not positive.
double companion_derivative(const AtomicSpectrum& spectrum, double gamma, double v);

// v'' = 2 [1 - gamma int tau^3 v^3/(1+tau v)^3 dH] (v'/v)^3.
double companion_second_derivative(const AtomicSpectrum& spectrum, double gamma, double v,
                                   double v_prime);

struct QuadraticRoots {
  double minus_branch;  // (-b - sqrt(disc)) / 2a
  double plus_branch;   // (-b + sqrt(disc)) / 2a
  double selected;      // the nonnegative root
};

// Explicit ridgeless root of the two-bulk quadratic
// (1-gamma) rho1 rho2 v^2 + (rho1 + rho2 - gamma psi1 rho1 - gamma psi2 rho2) v + 1 = 0.
QuadraticRoots two_bulk_ridgeless_roots(double rho1, double rho2, double psi1, double gamma);

// m(-lambda) from v(-lambda) via gamma (m + 1/z) = v + 1/z.
double stieltjes_from_companion(double gamma, double lambda, double v);

struct ThetaPhi {
  double theta;           // sum psi_i Phi(tau_i) / (lambda (1 + tau_i v)); 0 when lambda == 0
  double bias_integrand;  // int Phi(tau) tau / (1 + tau v)^2 dH
};

// Phi-weighted transform. Theta + lambda dTheta/dlambda = v' * bias_integrand.
ThetaPhi theta_phi(const AtomicSpectrum& spectrum, const SourceFunction& source, double gamma,
                   double lambda, double v, bool need_theta = true);

}  // namespace ridgerisk
