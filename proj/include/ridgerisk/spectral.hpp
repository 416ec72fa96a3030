#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <utility>
#include <vector>

namespace ridgerisk {

struct Atom {
  double tau;     // population eigenvalue
  double weight;  // spectral mass
};

// Limiting population spectral measure H as a finite list of weighted atoms,
// sorted by descending eigenvalue. Immutable once built.
class AtomicSpectrum {
 public:
  static constexpr double kWeightTolerance = 1e-12;
  static constexpr double kSnapTolerance = 1e-12;  // relative to tau_max

  // Validates and merges duplicate eigenvalues (within kSnapTolerance*tau_max).
  // Weights are not renormalized: they must already sum to one.
  static AtomicSpectrum make(std::span<const std::pair<double, double>> pairs);
  static AtomicSpectrum make(std::initializer_list<std::pair<double, double>> pairs) {
    return make(std::span<const std::pair<double, double>>(pairs.begin(), pairs.size()));
  }
  static AtomicSpectrum identity() { return make({{1.0, 1.0}}); }

  std::span<const Atom> atoms() const noexcept { return atoms_; }
  std::size_t size() const noexcept { return atoms_.size(); }
  const Atom& operator[](std::size_t i) const { return atoms_[i]; }
  double tau_max() const noexcept { return atoms_.front().tau; }
  double tau_min() const noexcept { return atoms_.back().tau; }

  // Index of the atom at eigenvalue tau (same snap rule as construction), or -1.
  std::ptrdiff_t find(double tau) const noexcept;

  // Exact weighted sum  sum_i psi_i g(tau_i). Throws NonFiniteValue.
  double integrate(const std::function<double(double)>& g) const;

 private:
  explicit AtomicSpectrum(std::vector<Atom> atoms) : atoms_(std::move(atoms)) {}
  std::vector<Atom> atoms_;
};

double spectral_integral(const AtomicSpectrum& spectrum,
                         const std::function<double(double)>& g);

enum class SourceFamily { Constant, Power, Tabulated };

// Source function Phi restricted to the atoms of a spectrum. values()[i] is
// Phi(tau_i) for the i-th atom of the spectrum it was built against.
class SourceFunction {
 public:
  static SourceFunction constant(const AtomicSpectrum& spectrum, double value);
  static SourceFunction power(const AtomicSpectrum& spectrum, double alpha);
  // Every atom must appear exactly once among the (tau, phi) pairs.
  static SourceFunction tabulated(const AtomicSpectrum& spectrum,
                                  std::span<const std::pair<double, double>> values);
  static SourceFunction tabulated(const AtomicSpectrum& spectrum,
                                  std::initializer_list<std::pair<double, double>> values) {
    return tabulated(spectrum, std::span<const std::pair<double, double>>(values.begin(),
                                                                           values.size()));
  }

  SourceFamily family() const noexcept { return family_; }
  // Constant value or power exponent; meaningless for Tabulated.
  double parameter() const noexcept { return parameter_; }
  std::span<const double> values() const noexcept { return values_; }
  std::span<const double> taus() const noexcept { return taus_; }
  double operator[](std::size_t i) const { return values_[i]; }
  std::size_t size() const noexcept { return values_.size(); }

  // Phi at an atom eigenvalue. Throws InvalidArgument for a non-atom.
  double at(double tau) const;

  bool defined_on(const AtomicSpectrum& spectrum) const noexcept;

 private:
  SourceFunction(SourceFamily family, double parameter, std::vector<double> taus,
                 std::vector<double> values)
      : family_(family), parameter_(parameter), taus_(std::move(taus)),
        values_(std::move(values)) {}

  SourceFamily family_;
  double parameter_;
  std::vector<double> taus_;
  std::vector<double> values_;
};

struct ProblemSpec {
  AtomicSpectrum spectrum;
  SourceFunction source;
  double gamma;   // d / n
  double sigma2;  // noise variance
  double r2;      // signal scale

  // Checks that source lives on the spectrum atoms and the scalars are valid.
  static ProblemSpec make(AtomicSpectrum spectrum, SourceFunction source, double gamma,
                          double sigma2, double r2);
};

struct StrongWeakModel {
  AtomicSpectrum spectrum;
  SourceFunction source;
};

// Two-bulk covariance rho1 on a psi1 fraction of coordinates and rho2 on the
// rest, with per-bulk source coefficients phi1, phi2. rho1 == rho2 merges to a
// single atom carrying psi1*phi1 + psi2*phi2.
StrongWeakModel strong_weak_model(double rho1, double rho2, double psi1, double phi1,
                                  double phi2);

struct SourceCoefficients {
  double phi1;
  double phi2;
};

// Solves  rho1 phi1 psi1 + rho2 phi2 psi2 = 1  and  phi1 psi1 + phi2 psi2 = 1
// for (phi1, phi2). Requires rho2 <= 1 <= rho1 (rho1 > rho2) so both are >= 0.
SourceCoefficients normalized_sources(double rho1, double rho2, double psi1);

struct StrongWeakParameters {
  double rho1;
  double rho2;
  double psi1;
  double phi1;
  double phi2;
};

// Two-bulk parameters satisfying both normalizations above, given the
// eigenvalue share rho1/(rho1+rho2) in [0.5, 1) and the coefficient ratio
// phi1/phi2 in [0, inf] (inf means phi2 = 0).
StrongWeakParameters normalized_strong_weak(double eigen_share, double coef_ratio,
                                            double psi1);

struct ParameterSource {
  AtomicSpectrum spectrum;  // empirical H_d: weight |J(tau)|/d per distinct eigenvalue
  SourceFunction source;    // Phi(tau) = d/|J(tau)| * sum_{j in J(tau)} beta_j^2
};

// Source function equivalent (for expected risk) to the deterministic
// parameter with coordinates beta_coords in the eigenbasis.
ParameterSource source_from_parameter(std::span<const double> beta_coords,
                                      std::span<const double> eigenvalues);

}  // namespace ridgerisk
