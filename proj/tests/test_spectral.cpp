#include "doctest.h"

#include <cmath>
#include <random>
#include <vector>

#include "ridgerisk/error.hpp"
#include "ridgerisk/spectral.hpp"

using namespace ridgerisk;

namespace {

template <class F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST_CASE("atoms are sorted by descending eigenvalue") {
  auto s = AtomicSpectrum::make({{0.5, 0.25}, {4.0, 0.25}, {1.0, 0.5}});
  REQUIRE(s.size() == 3);
  CHECK(s[0].tau == 4.0);
  CHECK(s[1].tau == 1.0);
  CHECK(s[2].tau == 0.5);
  CHECK(s.tau_max() == 4.0);
  CHECK(s.tau_min() == 0.5);
  CHECK(s[1].weight == 0.5);
}

TEST_CASE("near-duplicate eigenvalues merge") {
  auto s = AtomicSpectrum::make({{1.0, 0.3}, {1.0 + 1e-14, 0.2}, {2.0, 0.5}});
  REQUIRE(s.size() == 2);
  CHECK(s[1].weight == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(s.find(1.0) == 1);
  CHECK(s.find(3.0) == -1);
}

TEST_CASE("spectrum validation") {
  CHECK(code_of([] { AtomicSpectrum::make({}); }) == ErrorCode::EmptySpectrum);
  CHECK(code_of([] { AtomicSpectrum::make({{0.0, 1.0}}); }) == ErrorCode::NonPositiveEigenvalue);
  CHECK(code_of([] { AtomicSpectrum::make({{-1.0, 1.0}}); }) == ErrorCode::NonPositiveEigenvalue);
  CHECK(code_of([] { AtomicSpectrum::make({{1.0, 0.0}, {2.0, 1.0}}); }) ==
        ErrorCode::NonPositiveWeight);
  CHECK(code_of([] { AtomicSpectrum::make({{1.0, 0.5}, {2.0, 0.4}}); }) ==
        ErrorCode::WeightsDoNotSumToOne);
  CHECK(code_of([] { AtomicSpectrum::make({{NAN, 1.0}}); }) == ErrorCode::NonFiniteValue);
  // Within tolerance is fine.
  CHECK_NOTHROW(AtomicSpectrum::make({{1.0, 0.5}, {2.0, 0.5 + 5e-13}}));
}

TEST_CASE("integration is the exact weighted sum") {
  auto s = AtomicSpectrum::make({{2.0, 0.25}, {1.0, 0.75}});
  CHECK(s.integrate([](double t) { return t; }) == doctest::Approx(1.25));
  CHECK(spectral_integral(s, [](double t) { return t * t; }) == doctest::Approx(1.75));
  CHECK(code_of([&] { s.integrate([](double t) { return 1.0 / (t - 1.0); }); }) ==
        ErrorCode::NonFiniteValue);
}

TEST_CASE("source families") {
  auto s = AtomicSpectrum::make({{4.0, 0.5}, {0.25, 0.5}});
  auto c = SourceFunction::constant(s, 2.0);
  CHECK(c.family() == SourceFamily::Constant);
  CHECK(c.at(4.0) == 2.0);
  CHECK(c.at(0.25) == 2.0);

  auto p = SourceFunction::power(s, -1.0);
  CHECK(p.at(4.0) == doctest::Approx(0.25));
  CHECK(p.at(0.25) == doctest::Approx(4.0));
  CHECK(p.defined_on(s));

  auto t = SourceFunction::tabulated(s, {{0.25, 3.0}, {4.0, 1.0}});
  CHECK(t[0] == 1.0);  // follows spectrum order
  CHECK(t[1] == 3.0);
  CHECK(code_of([&] { t.at(1.0); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("source validation") {
  auto s = AtomicSpectrum::make({{4.0, 0.5}, {0.25, 0.5}});
  CHECK(code_of([&] { SourceFunction::constant(s, -1.0); }) == ErrorCode::ValueError);
  CHECK(code_of([&] { SourceFunction::tabulated(s, {{4.0, 1.0}}); }) == ErrorCode::SourceMismatch);
  CHECK(code_of([&] { SourceFunction::tabulated(s, {{4.0, 1.0}, {0.25, 1.0}, {2.0, 1.0}}); }) ==
        ErrorCode::SourceMismatch);
  CHECK(code_of([&] { SourceFunction::tabulated(s, {{4.0, 1.0}, {4.0, 2.0}}); }) ==
        ErrorCode::SourceMismatch);

  auto other = AtomicSpectrum::make({{3.0, 1.0}});
  auto wrong = SourceFunction::constant(other, 1.0);
  CHECK_FALSE(wrong.defined_on(s));
  CHECK(code_of([&] { ProblemSpec::make(s, wrong, 1.0, 1.0, 1.0); }) == ErrorCode::SourceMismatch);
  auto ok = SourceFunction::constant(s, 1.0);
  CHECK(code_of([&] { ProblemSpec::make(s, ok, 0.0, 1.0, 1.0); }) == ErrorCode::ValueError);
  CHECK(code_of([&] { ProblemSpec::make(s, ok, 1.0, -1.0, 1.0); }) == ErrorCode::ValueError);
}

TEST_CASE("strong-weak model") {
  auto m = strong_weak_model(4.0, 1.0, 0.25, 2.0, 0.5);
  REQUIRE(m.spectrum.size() == 2);
  CHECK(m.spectrum[0].weight == doctest::Approx(0.25));
  CHECK(m.source.at(4.0) == 2.0);
  CHECK(m.source.at(1.0) == 0.5);
  CHECK(code_of([] { strong_weak_model(1.0, 2.0, 0.5, 1.0, 1.0); }) == ErrorCode::OrderViolation);

  // Equal eigenvalues collapse onto one atom carrying the averaged source.
  auto merged = strong_weak_model(2.0, 2.0, 0.25, 4.0, 0.0);
  REQUIRE(merged.spectrum.size() == 1);
  CHECK(merged.source[0] == doctest::Approx(1.0));
}

TEST_CASE("normalized sources satisfy both normalizations") {
  for (double psi1 : {0.2, 0.5, 0.8}) {
    for (auto [r1, r2] : {std::pair{2.0, 0.5}, std::pair{10.0, 0.1}, std::pair{1.0, 0.3}}) {
      const auto c = normalized_sources(r1, r2, psi1);
      CHECK(r1 * c.phi1 * psi1 + r2 * c.phi2 * (1 - psi1) == doctest::Approx(1.0));
      CHECK(c.phi1 * psi1 + c.phi2 * (1 - psi1) == doctest::Approx(1.0));
    }
  }
  CHECK(code_of([] { normalized_sources(0.5, 0.2, 0.5); }) == ErrorCode::ValueError);
  CHECK(code_of([] { normalized_sources(1.0, 2.0, 0.5); }) == ErrorCode::OrderViolation);
}

TEST_CASE("normalized strong-weak parameters") {
  for (double share : {0.5, 0.7, 0.95}) {
    for (double ratio : {0.0, 0.01, 1.0, 10.0, static_cast<double>(INFINITY)}) {
      const auto p = normalized_strong_weak(share, ratio, 0.35);
      const double psi2 = 1 - p.psi1;
      CHECK(p.rho1 * p.phi1 * p.psi1 + p.rho2 * p.phi2 * psi2 == doctest::Approx(1.0));
      CHECK(p.phi1 * p.psi1 + p.phi2 * psi2 == doctest::Approx(1.0));
      CHECK(p.rho1 / (p.rho1 + p.rho2) == doctest::Approx(share));
      if (std::isfinite(ratio) && ratio > 0) CHECK(p.phi1 / p.phi2 == doctest::Approx(ratio));
    }
  }
  // Equal coefficients: Phi == 1 and the signal normalization puts rho at 1 on average.
  const auto flat = normalized_strong_weak(0.5, 1.0, 0.5);
  CHECK(flat.rho1 == doctest::Approx(1.0));
  CHECK(flat.phi2 == doctest::Approx(1.0));
  CHECK(code_of([] { normalized_strong_weak(0.4, 1.0, 0.5); }) == ErrorCode::ValueError);
  CHECK(code_of([] { normalized_strong_weak(1.0, 1.0, 0.5); }) == ErrorCode::ValueError);
}

TEST_CASE("source from a deterministic parameter") {
  const std::vector<double> beta = {1.0, 2.0, 0.0, 3.0};
  const std::vector<double> tau = {2.0, 1.0, 2.0, 1.0};
  const auto ps = source_from_parameter(beta, tau);
  REQUIRE(ps.spectrum.size() == 2);
  CHECK(ps.spectrum[0].weight == doctest::Approx(0.5));
  // Phi = d/|J| * sum_J beta^2
  CHECK(ps.source.at(2.0) == doctest::Approx(4.0 / 2.0 * 1.0));
  CHECK(ps.source.at(1.0) == doctest::Approx(4.0 / 2.0 * 13.0));
  // int Phi dH = ||beta||^2
  const double total = ps.spectrum.integrate([&](double t) { return ps.source.at(t); });
  CHECK(total == doctest::Approx(14.0));

  const std::vector<double> short_tau = {1.0};
  CHECK(code_of([&] { source_from_parameter(beta, short_tau); }) == ErrorCode::LengthMismatch);
}

TEST_CASE("many-coordinate parameter keeps weights summing to one") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> z;
  std::vector<double> beta(1000), tau(1000);
  for (std::size_t j = 0; j < beta.size(); ++j) {
    beta[j] = z(rng);
    tau[j] = (j % 3 == 0) ? 5.0 : (j % 3 == 1 ? 1.0 : 0.2);
  }
  CHECK_NOTHROW(source_from_parameter(beta, tau));
  const auto ps = source_from_parameter(beta, tau);
  CHECK(ps.spectrum.size() == 3);
}

TEST_CASE("error codes have names and a numerical class") {
  CHECK(std::string(error_code_name(ErrorCode::NoConvergence)) == "NoConvergence");
  CHECK(is_numerical(ErrorCode::NoConvergence));
  CHECK(is_numerical(ErrorCode::DecompositionFailure));
  CHECK_FALSE(is_numerical(ErrorCode::SchemaError));
  CHECK_FALSE(is_numerical(ErrorCode::ValueError));
}
