#include "ridgerisk/risk.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "ridgerisk/error.hpp"

namespace ridgerisk {

namespace {

RiskBreakdown assemble(const ProblemSpec& spec, double lambda, CompanionEval companion,
                       double bias) {
  RiskBreakdown out;
  out.lambda = lambda;
  const double v = companion.v;
  const double ratio = companion.v_prime / (v * v);
  // v' >= v^2 always holds; clamp the rounding-level negative excess.
  out.variance = spec.sigma2 * std::max(0.0, ratio - 1.0);
  out.bias = bias;
  out.total = out.variance + out.bias;
  out.companion = std::move(companion);
  if (!std::isfinite(out.total))
    throw Error(ErrorCode::NonFiniteRisk, "risk not finite at lambda=" + std::to_string(lambda));
  return out;
}

bool matches(double actual, double expected) {
  return std::abs(actual - expected) <= 1e-12 * std::max(1.0, std::abs(expected));
}

}  // namespace

RiskBreakdown asymptotic_risk(const ProblemSpec& spec, double lambda) {
  auto companion = solve_companion(spec.spectrum, spec.gamma, lambda);
  const auto theta = theta_phi(spec.spectrum, spec.source, spec.gamma, lambda, companion.v,
                               /*need_theta=*/false);
  const double v = companion.v;
  const double bias = spec.r2 * companion.v_prime / (v * v) * theta.bias_integrand;
  return assemble(spec, lambda, std::move(companion), bias);
}

RiskBreakdown closed_form_risk(const ProblemSpec& spec, double lambda, SourceVariant variant) {
  if (!(lambda > 0.0)) throw Error(ErrorCode::DomainError, "closed forms need lambda > 0");
  for (std::size_t i = 0; i < spec.spectrum.size(); ++i) {
    const double tau = spec.spectrum[i].tau;
    const double expected = variant == SourceVariant::Linear     ? tau
                            : variant == SourceVariant::Constant ? 1.0
                                                                 : 1.0 / tau;
    if (!matches(spec.source[i], expected))
      throw Error(ErrorCode::SourceMismatch,
                  "source differs from the closed-form variant at tau=" + std::to_string(tau));
  }

  auto companion = solve_companion(spec.spectrum, spec.gamma, lambda);
  const double g = spec.gamma;
  const double v = companion.v;
  const double vp = companion.v_prime;
  double bias = 0.0;
  switch (variant) {
    case SourceVariant::Linear:
      bias = vp / (g * v * v * v * v) - 1.0 / (g * v * v);
      break;
    case SourceVariant::Constant:
      bias = 1.0 / (g * v) - lambda / g * vp / (v * v);
      break;
    case SourceVariant::Inverse:
      bias = 2.0 * lambda / g * vp / v + (1.0 - 1.0 / g) * vp / (v * v) - 1.0 / g;
      break;
  }
  return assemble(spec, lambda, std::move(companion), spec.r2 * bias);
}

RiskBreakdown strong_weak_risk(double rho1, double rho2, double psi1, double phi1, double phi2,
                               double gamma, double sigma2, double r2, double lambda) {
  auto model = strong_weak_model(rho1, rho2, psi1, phi1, phi2);
  auto companion = solve_companion(model.spectrum, gamma, lambda);
  const double v = companion.v;
  // Written exactly as the two-bulk display: (v'/v^2)(sigma^2 + r^2 S) - sigma^2.
  double s = 0.0;
  for (std::size_t i = 0; i < model.spectrum.size(); ++i) {
    const double rho = model.spectrum[i].tau;
    const double denom = rho * v + 1.0;
    s += model.source[i] * model.spectrum[i].weight * rho / (denom * denom);
  }
  const double ratio = companion.v_prime / (v * v);
  RiskBreakdown out;
  out.lambda = lambda;
  out.variance = sigma2 * std::max(0.0, ratio - 1.0);
  out.bias = r2 * ratio * s;
  out.total = out.variance + out.bias;
  out.companion = std::move(companion);
  return out;
}

double risk_derivative(const ProblemSpec& spec, double lambda) {
  SolverOptions options;
  options.second_derivative = true;
  const auto companion = solve_companion(spec.spectrum, spec.gamma, lambda, options);
  const double v = companion.v;
  const double vp = companion.v_prime;
  const double vpp = *companion.v_second;

  double s1 = 0.0;  // int Phi tau / (1+tau v)^2 dH
  double s2 = 0.0;  // int Phi tau^2 / (1+tau v)^3 dH
  for (std::size_t i = 0; i < spec.spectrum.size(); ++i) {
    const double tau = spec.spectrum[i].tau;
    const double w = spec.spectrum[i].weight * spec.source[i];
    const double denom = 1.0 + tau * v;
    s1 += w * tau / (denom * denom);
    s2 += w * tau * tau / (denom * denom * denom);
  }
  const double ratio = vp / v;
  const double curvature = 2.0 * vp * vp / (v * v * v) - vpp / (v * v);
  const double value = curvature * (spec.sigma2 + spec.r2 * s1) + 2.0 * ratio * ratio * spec.r2 * s2;
  if (!std::isfinite(value))
    throw Error(ErrorCode::NonFiniteRisk, "risk derivative not finite");
  return value;
}

OptimalLambda optimal_lambda(const ProblemSpec& spec, const OptimalLambdaOptions& options) {
  const double ratio = spec.r2 > 0.0 ? spec.sigma2 * spec.gamma / spec.r2 : 1e6;
  const double hi = options.lambda_max.value_or(10.0 * std::max(1.0, ratio) *
                                                spec.spectrum.tau_max());
  const double lo = 1e-9;
  if (!(hi > lo)) throw Error(ErrorCode::ValueError, "lambda_max must exceed 1e-9");

  auto total = [&](double lambda) {
    const double value = asymptotic_risk(spec, lambda).total;
    if (!std::isfinite(value))
      throw Error(ErrorCode::NonFiniteRisk, "risk not finite during search");
    return value;
  };

  // Log-spaced scan to bracket the global minimum, then golden section in
  // log-lambda inside the bracketing cell pair.
  const int points = std::max(options.scan_points, 3);
  const double log_lo = std::log(lo);
  const double log_hi = std::log(hi);
  std::vector<double> grid(points);
  std::vector<double> values(points);
  for (int i = 0; i < points; ++i) {
    grid[i] = log_lo + (log_hi - log_lo) * i / (points - 1);
    values[i] = total(std::exp(grid[i]));
  }
  const auto best = static_cast<int>(std::min_element(values.begin(), values.end()) - values.begin());
  const double a = grid[std::max(best - 1, 0)];
  const double b = grid[std::min(best + 1, points - 1)];
  const double log_tol = std::log1p(options.relative_tolerance);
  double log_star = golden_section_minimize([&](double t) { return total(std::exp(t)); }, a, b,
                                            log_tol);
  double interior = std::exp(log_star);
  double interior_value = total(interior);
  if (values[best] < interior_value) {
    interior = std::exp(grid[best]);
    interior_value = values[best];
  }

  OptimalLambda out;
  out.interior_lambda = interior;
  out.interior_total = interior_value;
  if (spec.gamma > 1.0) {
    out.boundary_derivative = risk_derivative(spec, 0.0);
    if (*out.boundary_derivative >= 0.0) {
      out.lambda = 0.0;
      out.risk = asymptotic_risk(spec, 0.0);
      return out;
    }
  }
  out.lambda = interior;
  out.risk = asymptotic_risk(spec, interior);
  return out;
}

InterpolationOptimality interpolation_optimality(double rho1, double rho2, double phi1,
                                                 double phi2, double snr) {
  if (!(rho2 > 0.0)) throw Error(ErrorCode::NonPositiveEigenvalue, "rho2 must be > 0");
  if (rho1 < rho2) throw Error(ErrorCode::OrderViolation, "rho1 must be >= rho2");
  if (phi1 < 0.0 || phi2 < 0.0) throw Error(ErrorCode::ValueError, "phi must be >= 0");
  if (!(snr >= 0.0)) throw Error(ErrorCode::ValueError, "snr must be >= 0");
  if (std::abs(0.5 * phi1 + 0.5 * phi2 - 1.0) > 1e-12)
    throw Error(ErrorCode::NormalizationViolation, "needs phi1 psi1 + phi2 psi2 = 1 with psi = 1/2");
  const double s1 = std::sqrt(rho1);
  const double s2 = std::sqrt(rho2);
  const double sum = s1 + s2;
  const double snr_term = snr * rho1 * rho2 / (sum * sum);
  const double alignment = (phi1 * s1 + phi2 * s2) / sum - 1.0;
  const double lhs = snr_term * alignment;
  return {lhs, lhs >= 1.0};
}

OracleReference oracle_risk_reference(const ProblemSpec& spec) {
  OracleReference out;
  const auto values = spec.source.values();
  const bool constant =
      std::all_of(values.begin(), values.end(), [&](double x) { return x == values.front(); });
  if (constant && values.front() > 0.0 && spec.r2 > 0.0) {
    out.closed_form = true;
    out.lambda = spec.sigma2 * spec.gamma / (spec.r2 * values.front());
    out.note = "constant source: the oracle estimator is ridge at lambda = sigma2*gamma/(r2*phi)";
  } else {
    out.note = "non-constant source: no ridge equivalent; estimate the oracle by simulation";
  }
  return out;
}

}  // namespace ridgerisk
