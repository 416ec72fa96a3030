#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ridgerisk/spectral.hpp"

namespace ridgerisk {

// Largest-remainder apportionment of round(weights * d), summing to d.
std::vector<std::size_t> apportion(std::span<const double> weights, std::size_t d);

// Finite-sample simulation setup. Sigma is diagonal with eigenvalue taus[i]
// repeated dims[i] times; the prior on beta is N(0, r2 Phi(Sigma) / d).
struct SimConfig {
  std::size_t d = 0;
  std::size_t n = 0;  // max(1, round(d / gamma))
  double gamma = 1.0;
  std::vector<double> taus;
  std::vector<double> phis;
  std::vector<std::size_t> dims;
  double sigma2 = 1.0;
  double r2 = 1.0;
  double lambda = 0.0;
  std::size_t replications = 1;
  std::uint64_t seed = 0;

  static SimConfig from_spec(const ProblemSpec& spec, std::size_t d, double lambda,
                             std::size_t replications, std::uint64_t seed);

  Eigen::VectorXd sigma_diagonal() const;
  Eigen::VectorXd phi_diagonal() const;
};

enum class Stream : std::uint64_t { Design = 0, Parameter = 1, Noise = 2, Auxiliary = 3 };

// Independent engine for (seed, replication, stream); no state is shared
// between replications, so results do not depend on execution order.
std::mt19937_64 replication_engine(std::uint64_t seed, std::uint64_t replication, Stream stream);

struct Dataset {
  Eigen::MatrixXd X;     // n x d
  Eigen::VectorXd Y;     // X beta + sigma noise
  Eigen::VectorXd beta;  // d
  Eigen::VectorXd noise;  // n, standard normal
};

// Rows of X are N(0, Sigma).
Eigen::MatrixXd sample_design(const SimConfig& config, std::uint64_t replication);
Dataset sample_dataset(const SimConfig& config, std::uint64_t replication);

// (X'X/n + lambda I)^-1 X'Y/n; lambda == 0 gives the minimum-norm solution
// (singular values below d * eps * s_max are dropped).
Eigen::VectorXd ridge_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& Y, double lambda);
inline Eigen::VectorXd ridge_fit(const Dataset& data, double lambda) {
  return ridge_fit(data.X, data.Y, lambda);
}

// (X'X/n + (sigma2/r2)(d/n) Phi^-1)^-1 X'Y/n. Throws SingularPrior if some
// Phi value is zero.
Eigen::VectorXd oracle_fit(const Dataset& data, const Eigen::VectorXd& phi_diagonal,
                           double sigma2, double r2);

// ||Sigma^{1/2}(estimate - beta)||^2 for diagonal Sigma.
double excess_risk(const Eigen::VectorXd& estimate, const Eigen::VectorXd& beta,
                   const Eigen::VectorXd& sigma_diagonal);

struct ConditionalRisk {
  double variance;
  double bias;
  double total() const { return variance + bias; }
};

struct TraceTriple {
  double t1;  // (1/d) tr((S + lambda)^-1 Sigma)
  double t2;  // (1/d) tr((S + lambda)^-2 Sigma)
  double t3;  // (1/d) tr((S + lambda)^-1 Sigma (S + lambda)^-1 Phi)
};

// One symmetric eigendecomposition of S = X'X/n (through the n x n Gram
// matrix when d > n) reused for every lambda.
class DesignEigen {
 public:
  DesignEigen(const Eigen::MatrixXd& X, const Eigen::VectorXd& sigma_diagonal,
              const Eigen::VectorXd& phi_diagonal);

  std::size_t n() const noexcept { return n_; }
  std::size_t d() const noexcept { return d_; }
  std::size_t rank() const noexcept { return static_cast<std::size_t>(mu_.size()); }
  const Eigen::VectorXd& eigenvalues() const noexcept { return mu_; }

  // E over (noise, beta ~ prior) of the excess risk given X. lambda >= 0.
  ConditionalRisk conditional_risk(double lambda, double sigma2, double r2) const;

  // Bias lambda^2 ||Sigma^{1/2}(S + lambda)^-1 beta||^2 for a fixed beta
  // (||Sigma^{1/2} P beta||^2 with P the null-space projector when lambda == 0).
  double parameter_bias(const Eigen::VectorXd& beta, double lambda) const;

  TraceTriple traces(double lambda) const;

 private:
  std::size_t n_;
  std::size_t d_;
  Eigen::VectorXd mu_;           // retained eigenvalues of S
  Eigen::MatrixXd V_;            // d x rank eigenvectors
  Eigen::VectorXd sigma_;
  Eigen::VectorXd sigma_in_span_;  // diag(V' Sigma V)
  Eigen::VectorXd cross_;        // diag(V' Sigma Phi V) - diag(V' Phi V V' Sigma V)
  Eigen::MatrixXd hadamard_;     // (V' Sigma V) .* (V' Phi V)
  double null_sigma_phi_ = 0.0;  // tr(P Sigma P Phi), P = I - V V'
  double null_sigma_ = 0.0;      // tr(P Sigma)
};

ConditionalRisk conditional_expected_risk(const Eigen::MatrixXd& X, double lambda,
                                          const SimConfig& config);

TraceTriple empirical_trace_limits(const Eigen::MatrixXd& X, double lambda,
                                   const SimConfig& config);

// Limits of the three traces from the companion transform (lambda > 0).
TraceTriple trace_limits(const ProblemSpec& spec, double lambda);

struct McEstimate {
  std::string name;
  double mean = 0.0;
  double std_error = 0.0;  // sample std / sqrt(replications)
  std::size_t replications = 0;
};

// Mean and standard error with pairwise summation in index order.
McEstimate summarize(std::string name, std::span<const double> samples);

enum class Quantity { Risk, Bias, Variance, Traces, EstimatorComparison };

// Quantity | estimates
// Risk     | total
// Bias     | bias
// Variance | variance
// Traces   | t1, t2, t3
// EstimatorComparison | ridge, oracle, ridge_minus_oracle (realized excess risks)
std::vector<McEstimate> replicate(const SimConfig& config, Quantity quantity,
                                  unsigned threads = 1);

struct RiskGridEstimate {
  std::vector<double> lambdas;
  std::vector<McEstimate> variance;
  std::vector<McEstimate> bias;
  std::vector<McEstimate> total;
};

// Conditional risk over a lambda grid, one design eigendecomposition per replication.
RiskGridEstimate replicate_risk_grid(const SimConfig& config, std::span<const double> lambdas,
                                     unsigned threads = 1);

}  // namespace ridgerisk
