#include "doctest.h"

#include <cmath>
#include <random>
#include <vector>

#include "ridgerisk/error.hpp"
#include "ridgerisk/risk.hpp"

using namespace ridgerisk;

namespace {

AtomicSpectrum random_spectrum(std::mt19937_64& rng, int max_atoms = 5) {
  std::uniform_int_distribution<int> count(1, max_atoms);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int k = count(rng);
  std::vector<double> w(k);
  double total = 0.0;
  for (auto& x : w) total += (x = 0.05 + unit(rng));
  std::vector<std::pair<double, double>> pairs;
  double used = 0.0;
  for (int i = 0; i < k; ++i) {
    const double weight = i + 1 == k ? 1.0 - used : w[i] / total;
    used += weight;
    pairs.emplace_back(std::exp(std::log(0.1) + unit(rng) * std::log(100.0)), weight);
  }
  return AtomicSpectrum::make(pairs);
}

ProblemSpec isotropic(double gamma, double sigma2, double r2) {
  auto s = AtomicSpectrum::identity();
  auto src = SourceFunction::constant(s, 1.0);
  return ProblemSpec::make(s, src, gamma, sigma2, r2);
}

}  // namespace

TEST_CASE("isotropic ridgeless risk matches the known closed form") {
  // gamma > 1: r^2 (1 - 1/gamma) + sigma^2 / (gamma - 1).
  for (double gamma : {1.5, 2.0, 4.0}) {
    const auto r = asymptotic_risk(isotropic(gamma, 0.7, 1.3), 0.0);
    CHECK(r.bias == doctest::Approx(1.3 * (1 - 1 / gamma)).epsilon(1e-10));
    CHECK(r.variance == doctest::Approx(0.7 / (gamma - 1)).epsilon(1e-10));
  }
  // gamma < 1 approached from lambda -> 0: sigma^2 gamma / (1 - gamma), no bias.
  const auto r = asymptotic_risk(isotropic(0.5, 1.0, 1.0), 1e-9);
  CHECK(r.variance == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(r.bias == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("closed forms for Phi = x, 1, 1/x equal the general formula") {
  std::mt19937_64 rng(21);
  int checked = 0;
  for (int trial = 0; trial < 40; ++trial) {
    const auto s = random_spectrum(rng);
    for (double gamma : {0.5, 1.0, 2.0, 3.5}) {
      for (double lambda : {0.01, 0.1, 1.0, 10.0}) {
        const std::pair<SourceVariant, double> variants[] = {
            {SourceVariant::Linear, 1.0}, {SourceVariant::Constant, 0.0}, {SourceVariant::Inverse, -1.0}};
        for (auto [variant, alpha] : variants) {
          const auto spec = ProblemSpec::make(s, SourceFunction::power(s, alpha), gamma, 0.8, 1.7);
          const auto a = asymptotic_risk(spec, lambda);
          const auto b = closed_form_risk(spec, lambda, variant);
          CHECK(std::abs(a.total - b.total) <= 1e-9 * std::max(1.0, std::abs(a.total)));
          CHECK(std::abs(a.bias - b.bias) <= 1e-9 * std::max(1.0, std::abs(a.bias)));
          ++checked;
        }
      }
    }
  }
  CHECK(checked == 40 * 16 * 3);
}

TEST_CASE("closed form rejects a mismatched source") {
  const auto s = AtomicSpectrum::make({{2.0, 0.5}, {0.5, 0.5}});
  const auto spec = ProblemSpec::make(s, SourceFunction::constant(s, 1.0), 2.0, 1.0, 1.0);
  try {
    closed_form_risk(spec, 1.0, SourceVariant::Linear);
    FAIL("expected SourceMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SourceMismatch);
  }
  CHECK_NOTHROW(closed_form_risk(spec, 1.0, SourceVariant::Constant));
}

TEST_CASE("strong-weak risk is the two-atom risk") {
  const auto direct = strong_weak_risk(3.0, 0.5, 0.3, 2.0, 0.5, 2.5, 0.4, 1.1, 0.2);
  auto m = strong_weak_model(3.0, 0.5, 0.3, 2.0, 0.5);
  const auto spec = ProblemSpec::make(m.spectrum, m.source, 2.5, 0.4, 1.1);
  CHECK(direct.total == doctest::Approx(asymptotic_risk(spec, 0.2).total).epsilon(1e-14));
}

TEST_CASE("isotropic source gives lambda* = sigma^2 gamma / r^2") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const double sigma2 = 0.1 + 2.0 * unit(rng);
    const double r2 = 0.1 + 2.0 * unit(rng);
    const double gamma = 0.2 + 4.0 * unit(rng);
    const auto s = random_spectrum(rng);
    const auto spec = ProblemSpec::make(s, SourceFunction::constant(s, 1.0), gamma, sigma2, r2);
    const auto best = optimal_lambda(spec);
    CHECK(std::abs(best.lambda - sigma2 * gamma / r2) <= 1e-4);
    const auto oracle = oracle_risk_reference(spec);
    REQUIRE(oracle.lambda.has_value());
    CHECK(*oracle.lambda == doctest::Approx(sigma2 * gamma / r2));
  }
}

TEST_CASE("optimal lambda is a minimum of the risk curve") {
  const auto s = AtomicSpectrum::make({{5.0, 0.2}, {1.0, 0.3}, {0.1, 0.5}});
  const auto spec = ProblemSpec::make(s, SourceFunction::power(s, 1.0), 1.7, 0.5, 1.0);
  const auto best = optimal_lambda(spec);
  for (double f : {0.5, 0.9, 0.99, 1.01, 1.1, 2.0})
    CHECK(asymptotic_risk(spec, best.lambda * f).total >= best.risk.total - 1e-12);
  CHECK(std::abs(risk_derivative(spec, best.lambda)) < 1e-4);
}

TEST_CASE("optimal lambda returns the ridgeless boundary when R'(0) >= 0") {
  // Aligned two-bulk problem at high snr: interpolation is optimal.
  auto m = strong_weak_model(4.0, 1.0, 0.5, 2.0, 0.0);
  const auto spec = ProblemSpec::make(m.spectrum, m.source, 2.0, 1.0, 20.0);
  const auto best = optimal_lambda(spec);
  REQUIRE(best.boundary_derivative.has_value());
  CHECK(*best.boundary_derivative >= 0.0);
  CHECK(best.lambda == 0.0);
  CHECK(best.risk.total <= best.interior_total + 1e-9);

  // gamma <= 1 never reports a boundary.
  const auto under = optimal_lambda(isotropic(0.5, 1.0, 1.0));
  CHECK_FALSE(under.boundary_derivative.has_value());
  CHECK(under.lambda > 0.0);
}

TEST_CASE("risk derivative matches finite differences") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const auto s = random_spectrum(rng, 3);
    const double alpha = std::uniform_real_distribution<double>(-1.0, 1.0)(rng);
    for (double gamma : {0.5, 2.0, 3.5}) {
      const auto spec = ProblemSpec::make(s, SourceFunction::power(s, alpha), gamma, 0.6, 1.4);
      for (double lambda : {0.05, 0.5, 2.0}) {
        const double h = 1e-5 * std::max(lambda, 1.0);
        const double fd = (asymptotic_risk(spec, lambda + h).total -
                           asymptotic_risk(spec, lambda - h).total) / (2 * h);
        CHECK(risk_derivative(spec, lambda) == doctest::Approx(fd).epsilon(1e-5));
      }
      if (gamma > 1.0) {
        const double h = 1e-5;
        const double fd = (-3 * asymptotic_risk(spec, 0.0).total +
                           4 * asymptotic_risk(spec, h).total - asymptotic_risk(spec, 2 * h).total) /
                          (2 * h);
        CHECK(risk_derivative(spec, 0.0) == doctest::Approx(fd).epsilon(1e-4));
      }
    }
  }
}

TEST_CASE("interpolation optimality boundary") {
  // lhs = 4 snr / 27 for rho = (4, 1), phi = (2, 0).
  for (double snr : {1.0, 6.0, 6.75, 7.0, 20.0}) {
    const auto io = interpolation_optimality(4.0, 1.0, 2.0, 0.0, snr);
    CHECK(io.lhs == doctest::Approx(4 * snr / 27));
  }
  CHECK_FALSE(interpolation_optimality(4.0, 1.0, 2.0, 0.0, 6.0).interpolation_optimal);
  CHECK(interpolation_optimality(4.0, 1.0, 2.0, 0.0, 7.0).interpolation_optimal);

  // Sign agrees with R'(0) of the matching problem.
  for (double snr : {2.0, 6.0, 7.0, 15.0}) {
    auto m = strong_weak_model(4.0, 1.0, 0.5, 2.0, 0.0);
    const auto spec = ProblemSpec::make(m.spectrum, m.source, 2.0, 1.0, snr);
    const bool positive = risk_derivative(spec, 0.0) >= 0.0;
    CHECK(positive == interpolation_optimality(4.0, 1.0, 2.0, 0.0, snr).interpolation_optimal);
  }
  try {
    interpolation_optimality(4.0, 1.0, 1.0, 0.5, 1.0);
    FAIL("expected NormalizationViolation");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NormalizationViolation);
  }
}

TEST_CASE("interpolation optimality sign over random problems") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  int agree = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const double rho2 = 0.1 + unit(rng);
    const double rho1 = rho2 * (1.0 + 20.0 * unit(rng));
    const double phi1 = 2.0 * unit(rng);
    const double phi2 = 2.0 - phi1;
    const double snr = 50.0 * unit(rng);
    const auto io = interpolation_optimality(rho1, rho2, phi1, phi2, snr);
    if (std::abs(io.lhs - 1.0) < 1e-6) continue;
    auto m = strong_weak_model(rho1, rho2, 0.5, phi1, phi2);
    const auto spec = ProblemSpec::make(m.spectrum, m.source, 2.0, 1.0, snr);
    CHECK((risk_derivative(spec, 0.0) >= 0.0) == io.interpolation_optimal);
    ++agree;
  }
  CHECK(agree > 150);
}

TEST_CASE("oracle reference for non-constant sources") {
  const auto s = AtomicSpectrum::make({{2.0, 0.5}, {0.5, 0.5}});
  const auto spec = ProblemSpec::make(s, SourceFunction::power(s, 1.0), 2.0, 1.0, 1.0);
  const auto ref = oracle_risk_reference(spec);
  CHECK_FALSE(ref.closed_form);
  CHECK_FALSE(ref.lambda.has_value());
}

TEST_CASE("golden section finds a parabola minimum") {
  const double x = golden_section_minimize([](double t) { return (t - 0.3) * (t - 0.3); }, -2, 2, 1e-10);
  CHECK(x == doctest::Approx(0.3).epsilon(1e-8));
}
