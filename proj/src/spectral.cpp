#include "ridgerisk/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <functional>
#include <string>

#include "ridgerisk/error.hpp"

namespace ridgerisk {

const char* error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::NonPositiveEigenvalue: return "NonPositiveEigenvalue";
    case ErrorCode::NonPositiveWeight: return "NonPositiveWeight";
    case ErrorCode::WeightsDoNotSumToOne: return "WeightsDoNotSumToOne";
    case ErrorCode::EmptySpectrum: return "EmptySpectrum";
    case ErrorCode::OrderViolation: return "OrderViolation";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::SingularDerivative: return "SingularDerivative";
    case ErrorCode::SourceMismatch: return "SourceMismatch";
    case ErrorCode::NormalizationViolation: return "NormalizationViolation";
    case ErrorCode::NonFiniteRisk: return "NonFiniteRisk";
    case ErrorCode::DecompositionFailure: return "DecompositionFailure";
    case ErrorCode::SingularPrior: return "SingularPrior";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::ValueError: return "ValueError";
    case ErrorCode::UnknownParameter: return "UnknownParameter";
    case ErrorCode::IoError: return "IoError";
  }
  return "UnknownError";
}

bool is_numerical(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::NoConvergence:
    case ErrorCode::SingularDerivative:
    case ErrorCode::NonFiniteRisk:
    case ErrorCode::DecompositionFailure:
    case ErrorCode::NonFiniteValue:
      return true;
    default:
      return false;
  }
}

namespace {

bool same_eigenvalue(double a, double b, double tau_max) {
  return std::abs(a - b) <= AtomicSpectrum::kSnapTolerance * tau_max;
}

}  // namespace

AtomicSpectrum AtomicSpectrum::make(std::span<const std::pair<double, double>> pairs) {
  if (pairs.empty()) throw Error(ErrorCode::EmptySpectrum, "spectrum needs at least one atom");

  std::vector<Atom> atoms;
  atoms.reserve(pairs.size());
  double total = 0.0;
  for (const auto& [tau, weight] : pairs) {
    if (!std::isfinite(tau) || !std::isfinite(weight))
      throw Error(ErrorCode::NonFiniteValue, "atom is not finite");
    if (tau <= 0.0)
      throw Error(ErrorCode::NonPositiveEigenvalue, "eigenvalue " + std::to_string(tau));
    if (weight <= 0.0)
      throw Error(ErrorCode::NonPositiveWeight, "weight " + std::to_string(weight));
    atoms.push_back({tau, weight});
    total += weight;
  }
  if (std::abs(total - 1.0) > kWeightTolerance)
    throw Error(ErrorCode::WeightsDoNotSumToOne, "weights sum to " + std::to_string(total));

  std::sort(atoms.begin(), atoms.end(),
            [](const Atom& a, const Atom& b) { return a.tau > b.tau; });
  const double tau_max = atoms.front().tau;

  std::vector<Atom> merged;
  for (const Atom& atom : atoms) {
    if (!merged.empty() && same_eigenvalue(merged.back().tau, atom.tau, tau_max)) {
      merged.back().weight += atom.weight;
    } else {
      merged.push_back(atom);
    }
  }
  return AtomicSpectrum(std::move(merged));
}

std::ptrdiff_t AtomicSpectrum::find(double tau) const noexcept {
  for (std::size_t i = 0; i < atoms_.size(); ++i) {
    if (same_eigenvalue(atoms_[i].tau, tau, tau_max())) return static_cast<std::ptrdiff_t>(i);
  }
  return -1;
}

double AtomicSpectrum::integrate(const std::function<double(double)>& g) const {
  double sum = 0.0;
  for (const Atom& atom : atoms_) {
    const double value = g(atom.tau);
    if (!std::isfinite(value))
      throw Error(ErrorCode::NonFiniteValue, "integrand not finite at tau=" +
                                                 std::to_string(atom.tau));
    sum += atom.weight * value;
  }
  return sum;
}

double spectral_integral(const AtomicSpectrum& spectrum,
                         const std::function<double(double)>& g) {
  return spectrum.integrate(g);
}

namespace {

std::vector<double> atom_taus(const AtomicSpectrum& spectrum) {
  std::vector<double> taus;
  taus.reserve(spectrum.size());
  for (const Atom& atom : spectrum.atoms()) taus.push_back(atom.tau);
  return taus;
}

void check_source_value(double value) {
  if (!std::isfinite(value)) throw Error(ErrorCode::NonFiniteValue, "source value not finite");
  if (value < 0.0)
    throw Error(ErrorCode::ValueError, "source value must be >= 0, got " + std::to_string(value));
}

}  // namespace

SourceFunction SourceFunction::constant(const AtomicSpectrum& spectrum, double value) {
  check_source_value(value);
  auto taus = atom_taus(spectrum);
  std::vector<double> values(taus.size(), value);
  return SourceFunction(SourceFamily::Constant, value, std::move(taus), std::move(values));
}

SourceFunction SourceFunction::power(const AtomicSpectrum& spectrum, double alpha) {
  if (!std::isfinite(alpha)) throw Error(ErrorCode::NonFiniteValue, "power exponent not finite");
  auto taus = atom_taus(spectrum);
  std::vector<double> values;
  values.reserve(taus.size());
  for (double tau : taus) {
    const double value = std::pow(tau, alpha);
    check_source_value(value);
    values.push_back(value);
  }
  return SourceFunction(SourceFamily::Power, alpha, std::move(taus), std::move(values));
}

SourceFunction SourceFunction::tabulated(const AtomicSpectrum& spectrum,
                                         std::span<const std::pair<double, double>> table) {
  auto taus = atom_taus(spectrum);
  std::vector<double> values(taus.size(), 0.0);
  std::vector<bool> seen(taus.size(), false);
  for (const auto& [tau, phi] : table) {
    const auto index = spectrum.find(tau);
    if (index < 0)
      throw Error(ErrorCode::SourceMismatch,
                  "tabulated eigenvalue " + std::to_string(tau) + " is not an atom");
    check_source_value(phi);
    const auto i = static_cast<std::size_t>(index);
    if (seen[i])
      throw Error(ErrorCode::SourceMismatch, "eigenvalue " + std::to_string(tau) + " tabulated twice");
    seen[i] = true;
    values[i] = phi;
  }
  if (std::find(seen.begin(), seen.end(), false) != seen.end())
    throw Error(ErrorCode::SourceMismatch, "tabulated source does not cover every atom");
  return SourceFunction(SourceFamily::Tabulated, 0.0, std::move(taus), std::move(values));
}

double SourceFunction::at(double tau) const {
  const double scale = taus_.empty() ? 1.0 : taus_.front();
  for (std::size_t i = 0; i < taus_.size(); ++i) {
    if (same_eigenvalue(taus_[i], tau, scale)) return values_[i];
  }
  throw Error(ErrorCode::InvalidArgument, "source not defined at tau=" + std::to_string(tau));
}

bool SourceFunction::defined_on(const AtomicSpectrum& spectrum) const noexcept {
  if (spectrum.size() != taus_.size()) return false;
  for (std::size_t i = 0; i < taus_.size(); ++i) {
    if (spectrum[i].tau != taus_[i]) return false;
  }
  return true;
}

ProblemSpec ProblemSpec::make(AtomicSpectrum spectrum, SourceFunction source, double gamma,
                              double sigma2, double r2) {
  if (!source.defined_on(spectrum))
    throw Error(ErrorCode::SourceMismatch, "source is not defined on the spectrum atoms");
  if (!std::isfinite(gamma) || gamma <= 0.0)
    throw Error(ErrorCode::ValueError, "gamma must be > 0, got " + std::to_string(gamma));
  if (!std::isfinite(sigma2) || sigma2 < 0.0)
    throw Error(ErrorCode::ValueError, "sigma2 must be >= 0, got " + std::to_string(sigma2));
  if (!std::isfinite(r2) || r2 < 0.0)
    throw Error(ErrorCode::ValueError, "r2 must be >= 0, got " + std::to_string(r2));
  return ProblemSpec{std::move(spectrum), std::move(source), gamma, sigma2, r2};
}

StrongWeakModel strong_weak_model(double rho1, double rho2, double psi1, double phi1,
                                  double phi2) {
  if (!(rho2 > 0.0)) throw Error(ErrorCode::NonPositiveEigenvalue, "rho2 must be > 0");
  if (rho1 < rho2) throw Error(ErrorCode::OrderViolation, "rho1 must be >= rho2");
  if (!(psi1 > 0.0 && psi1 < 1.0)) throw Error(ErrorCode::ValueError, "psi1 must lie in (0,1)");
  check_source_value(phi1);
  check_source_value(phi2);

  const double psi2 = 1.0 - psi1;
  auto spectrum = AtomicSpectrum::make({{rho1, psi1}, {rho2, psi2}});
  if (spectrum.size() == 1) {
    auto source = SourceFunction::tabulated(spectrum, {{rho1, psi1 * phi1 + psi2 * phi2}});
    return {std::move(spectrum), std::move(source)};
  }
  auto source = SourceFunction::tabulated(spectrum, {{rho1, phi1}, {rho2, phi2}});
  return {std::move(spectrum), std::move(source)};
}

SourceCoefficients normalized_sources(double rho1, double rho2, double psi1) {
  if (rho1 <= rho2)
    throw Error(ErrorCode::OrderViolation, "normalizations need rho1 > rho2");
  if (!(psi1 > 0.0 && psi1 < 1.0)) throw Error(ErrorCode::ValueError, "psi1 must lie in (0,1)");
  const double psi2 = 1.0 - psi1;
  const double phi1 = (1.0 - rho2) / (psi1 * (rho1 - rho2));
  const double phi2 = (rho1 - 1.0) / (psi2 * (rho1 - rho2));
  if (phi1 < 0.0 || phi2 < 0.0)
    throw Error(ErrorCode::ValueError, "normalizations need rho2 <= 1 <= rho1");
  return {phi1, phi2};
}

StrongWeakParameters normalized_strong_weak(double eigen_share, double coef_ratio,
                                            double psi1) {
  if (!(eigen_share >= 0.5 && eigen_share < 1.0))
    throw Error(ErrorCode::ValueError, "eigenvalue share must lie in [0.5, 1)");
  if (!(coef_ratio >= 0.0)) throw Error(ErrorCode::ValueError, "coefficient ratio must be >= 0");
  if (!(psi1 > 0.0 && psi1 < 1.0)) throw Error(ErrorCode::ValueError, "psi1 must lie in (0,1)");
  const double psi2 = 1.0 - psi1;

  // phi1 psi1 + phi2 psi2 = 1 with phi1 = coef_ratio * phi2.
  double phi1 = 0.0;
  double phi2 = 0.0;
  if (std::isinf(coef_ratio)) {
    phi1 = 1.0 / psi1;
  } else {
    phi2 = 1.0 / (coef_ratio * psi1 + psi2);
    phi1 = coef_ratio * phi2;
  }
  // rho = c * (share, 1 - share), c fixed by the signal normalization.
  const double signal = eigen_share * phi1 * psi1 + (1.0 - eigen_share) * phi2 * psi2;
  const double scale = 1.0 / signal;
  return {scale * eigen_share, scale * (1.0 - eigen_share), psi1, phi1, phi2};
}

ParameterSource source_from_parameter(std::span<const double> beta_coords,
                                      std::span<const double> eigenvalues) {
  if (beta_coords.size() != eigenvalues.size())
    throw Error(ErrorCode::LengthMismatch, "beta and eigenvalues differ in length");
  if (beta_coords.empty()) throw Error(ErrorCode::EmptySpectrum, "empty parameter");
  const auto d = static_cast<double>(beta_coords.size());

  for (double tau : eigenvalues) {
    if (!(tau > 0.0)) throw Error(ErrorCode::NonPositiveEigenvalue, "eigenvalue " + std::to_string(tau));
  }
  std::vector<double> sorted(eigenvalues.begin(), eigenvalues.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  std::vector<std::pair<double, double>> groups;  // (tau, multiplicity)
  for (double tau : sorted) {
    if (!groups.empty() && same_eigenvalue(groups.back().first, tau, sorted.front())) {
      groups.back().second += 1.0;
    } else {
      groups.emplace_back(tau, 1.0);
    }
  }
  for (auto& group : groups) group.second /= d;
  auto spectrum = AtomicSpectrum::make(groups);

  std::vector<double> mass(spectrum.size(), 0.0);
  std::vector<std::size_t> count(spectrum.size(), 0);
  for (std::size_t j = 0; j < beta_coords.size(); ++j) {
    const auto i = static_cast<std::size_t>(spectrum.find(eigenvalues[j]));
    mass[i] += beta_coords[j] * beta_coords[j];
    ++count[i];
  }
  std::vector<std::pair<double, double>> table;
  table.reserve(spectrum.size());
  for (std::size_t i = 0; i < spectrum.size(); ++i) {
    table.emplace_back(spectrum[i].tau, d / static_cast<double>(count[i]) * mass[i]);
  }
  auto source = SourceFunction::tabulated(spectrum, table);
  return {std::move(spectrum), std::move(source)};
}

}  // namespace ridgerisk
