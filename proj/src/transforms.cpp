#include "ridgerisk/transforms.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "ridgerisk/error.hpp"

namespace ridgerisk {

namespace {

// gamma * int tau / (1 + tau v) dH
double load(const AtomicSpectrum& spectrum, double gamma, double v) {
  double sum = 0.0;
  for (const Atom& atom : spectrum.atoms()) sum += atom.weight * atom.tau / (1.0 + atom.tau * v);
  return gamma * sum;
}

double fixed_point_map(const AtomicSpectrum& spectrum, double gamma, double lambda, double v) {
  return 1.0 / (lambda + load(spectrum, gamma, v));
}

// lambda v + gamma v int tau/(1+tau v) dH - 1, strictly increasing in v > 0.
double monotone_residual(const AtomicSpectrum& spectrum, double gamma, double lambda, double v) {
  return v * (lambda + load(spectrum, gamma, v)) - 1.0;
}

void check_domain(double gamma, double lambda) {
  if (!std::isfinite(gamma) || gamma <= 0.0)
    throw Error(ErrorCode::DomainError, "gamma must be > 0");
  if (!std::isfinite(lambda) || lambda < 0.0)
    throw Error(ErrorCode::DomainError, "lambda must be >= 0");
  if (lambda == 0.0 && gamma <= 1.0)
    throw Error(ErrorCode::DomainError, "ridgeless companion transform needs gamma > 1");
}

struct Root {
  double v;
  int iterations;
};

std::optional<Root> fixed_point(const AtomicSpectrum& spectrum, double gamma, double lambda,
                                const SolverOptions& options) {
  double v = 1.0 / (lambda + gamma * spectrum.integrate([](double tau) { return tau; }));
  for (int k = 1; k <= options.max_iterations; ++k) {
    const double next = (1.0 - options.damping) * v +
                        options.damping * fixed_point_map(spectrum, gamma, lambda, v);
    if (!std::isfinite(next) || next <= 0.0) return std::nullopt;
    const double step = std::abs(next - v);
    v = next;
    if (step <= options.step_tolerance * std::max(1.0, v)) return Root{v, k};
  }
  return std::nullopt;
}

std::optional<Root> bisection(const AtomicSpectrum& spectrum, double gamma, double lambda) {
  double lo = 1e-15;
  double hi = 0.0;
  if (lambda > 0.0) {
    hi = 1.0 / lambda;
  } else {
    hi = 1.0;
    int doublings = 0;
    while (monotone_residual(spectrum, gamma, 0.0, hi) < 0.0) {
      hi *= 2.0;
      if (++doublings > 2000) return std::nullopt;
    }
  }
  if (monotone_residual(spectrum, gamma, lambda, lo) > 0.0) return Root{lo, 0};
  int k = 0;
  for (; k < 400; ++k) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (monotone_residual(spectrum, gamma, lambda, mid) < 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  // Pick the endpoint with the smaller fixed-point defect.
  const double r_lo = std::abs(companion_residual(spectrum, gamma, lambda, lo));
  const double r_hi = std::abs(companion_residual(spectrum, gamma, lambda, hi));
  return Root{r_lo < r_hi ? lo : hi, k};
}

}  // namespace

double companion_residual(const AtomicSpectrum& spectrum, double gamma, double lambda, double v) {
  return v - fixed_point_map(spectrum, gamma, lambda, v);
}

CompanionEval solve_companion(const AtomicSpectrum& spectrum, double gamma, double lambda,
                              const SolverOptions& options) {
  check_domain(gamma, lambda);

  std::optional<Root> root;
  bool used_bisection = false;
  if (options.method != CompanionMethod::Bisection) {
    root = fixed_point(spectrum, gamma, lambda, options);
    if (root && std::abs(companion_residual(spectrum, gamma, lambda, root->v)) >
                    options.residual_tolerance * std::max(1.0, root->v)) {
      root.reset();
    }
  }
  if (!root && options.method != CompanionMethod::FixedPoint) {
    root = bisection(spectrum, gamma, lambda);
    used_bisection = true;
  }
  if (!root)
    throw Error(ErrorCode::NoConvergence, "companion transform did not converge at lambda=" +
                                              std::to_string(lambda));

  CompanionEval eval;
  eval.lambda = lambda;
  eval.v = root->v;
  eval.iterations = root->iterations;
  eval.used_bisection = used_bisection;
  eval.residual = companion_residual(spectrum, gamma, lambda, eval.v);
  if (!(std::abs(eval.residual) <= options.residual_tolerance * std::max(1.0, eval.v)))
    throw Error(ErrorCode::NoConvergence,
                "fixed-point residual " + std::to_string(eval.residual) + " above tolerance");
  eval.v_prime = companion_derivative(spectrum, gamma, eval.v);
  if (options.second_derivative)
    eval.v_second = companion_second_derivative(spectrum, gamma, eval.v, eval.v_prime);
  return eval;
}

CompanionEval solve_companion_ridgeless(const AtomicSpectrum& spectrum, double gamma,
                                        const SolverOptions& options) {
  if (!(gamma > 1.0))
    throw Error(ErrorCode::DomainError, "ridgeless companion transform needs gamma > 1");
  return solve_companion(spectrum, gamma, 0.0, options);
}

double companion_derivative(const AtomicSpectrum& spectrum, double gamma, double v) {
  if (!(v > 0.0) || !std::isfinite(v))
    throw Error(ErrorCode::DomainError, "companion derivative needs v > 0");
  double sum = 0.0;
  for (const Atom& atom : spectrum.atoms()) {
    const double q = atom.tau / (1.0 + atom.tau * v);
    sum += atom.weight * q * q;
  }
  const double bracket = 1.0 / (v * v) - gamma * sum;
  if (!(bracket > 0.0))
    throw Error(ErrorCode::SingularDerivative,
                "1/v^2 - gamma int tau^2/(1+tau v)^2 dH = " + std::to_string(bracket));
  return 1.0 / bracket;
}

double companion_second_derivative(const AtomicSpectrum& spectrum, double gamma, double v,
                                   double v_prime) {
  if (!std::isfinite(v) || !std::isfinite(v_prime) || !(v > 0.0) || !(v_prime > 0.0))
    throw Error(ErrorCode::NonFiniteValue, "second derivative needs finite v, v' > 0");
  double sum = 0.0;
  for (const Atom& atom : spectrum.atoms()) {
    const double q = atom.tau * v / (1.0 + atom.tau * v);
    sum += atom.weight * q * q * q;
  }
  const double ratio = v_prime / v;
  return 2.0 * (1.0 - gamma * sum) * ratio * ratio * ratio;
}

QuadraticRoots two_bulk_ridgeless_roots(double rho1, double rho2, double psi1, double gamma) {
  if (!(gamma > 1.0)) throw Error(ErrorCode::DomainError, "ridgeless root needs gamma > 1");
  const double psi2 = 1.0 - psi1;
  const double a = (1.0 - gamma) * rho1 * rho2;
  const double b = rho1 + rho2 - gamma * psi1 * rho1 - gamma * psi2 * rho2;
  const double disc = b * b - 4.0 * a;  // c = 1
  const double root = std::sqrt(disc);
  QuadraticRoots roots{(-b - root) / (2.0 * a), (-b + root) / (2.0 * a), 0.0};
  // a < 0 and disc > b^2, so exactly the minus branch is positive.
  roots.selected = roots.minus_branch >= 0.0 ? roots.minus_branch : roots.plus_branch;
  return roots;
}

double stieltjes_from_companion(double gamma, double lambda, double v) {
  if (!(lambda > 0.0)) throw Error(ErrorCode::DomainError, "Stieltjes transform needs lambda > 0");
  return (v + (gamma - 1.0) / lambda) / gamma;
}

ThetaPhi theta_phi(const AtomicSpectrum& spectrum, const SourceFunction& source, double gamma,
                   double lambda, double v, bool need_theta) {
  (void)gamma;
  if (need_theta && !(lambda > 0.0))
    throw Error(ErrorCode::DomainError, "Theta^Phi(-lambda) needs lambda > 0");
  if (!source.defined_on(spectrum))
    throw Error(ErrorCode::SourceMismatch, "source is not defined on the spectrum atoms");
  ThetaPhi out{0.0, 0.0};
  for (std::size_t i = 0; i < spectrum.size(); ++i) {
    const double tau = spectrum[i].tau;
    const double psi = spectrum[i].weight;
    const double denom = 1.0 + tau * v;
    if (need_theta) out.theta += psi * source[i] / (lambda * denom);
    out.bias_integrand += psi * source[i] * tau / (denom * denom);
  }
  return out;
}

}  // namespace ridgerisk
