#include "ridgerisk/montecarlo.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

#include "ridgerisk/error.hpp"
#include "ridgerisk/parallel.hpp"
#include "ridgerisk/transforms.hpp"

namespace ridgerisk {

std::vector<std::size_t> apportion(std::span<const double> weights, std::size_t d) {
  std::vector<std::size_t> counts(weights.size(), 0);
  std::vector<double> remainders(weights.size(), 0.0);
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double exact = weights[i] * static_cast<double>(d);
    counts[i] = static_cast<std::size_t>(std::floor(exact));
    remainders[i] = exact - std::floor(exact);
    assigned += counts[i];
  }
  std::vector<std::size_t> order(weights.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainders[a] > remainders[b]; });
  for (std::size_t k = 0; assigned < d && k < order.size(); ++k, ++assigned) ++counts[order[k]];
  // Rounding can leave the total short only if weights sum below one.
  for (std::size_t k = 0; assigned < d; k = (k + 1) % order.size(), ++assigned) ++counts[order[k]];
  return counts;
}

SimConfig SimConfig::from_spec(const ProblemSpec& spec, std::size_t d, double lambda,
                               std::size_t replications, std::uint64_t seed) {
  if (d == 0) throw Error(ErrorCode::ValueError, "simulation dimension must be >= 1");
  if (!(lambda >= 0.0)) throw Error(ErrorCode::ValueError, "lambda must be >= 0");
  SimConfig config;
  config.d = d;
  config.gamma = spec.gamma;
  config.n = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(static_cast<double>(d) / spec.gamma)));
  std::vector<double> weights;
  for (const Atom& atom : spec.spectrum.atoms()) {
    config.taus.push_back(atom.tau);
    weights.push_back(atom.weight);
  }
  config.phis.assign(spec.source.values().begin(), spec.source.values().end());
  config.dims = apportion(weights, d);
  config.sigma2 = spec.sigma2;
  config.r2 = spec.r2;
  config.lambda = lambda;
  config.replications = replications;
  config.seed = seed;
  return config;
}

namespace {

Eigen::VectorXd expand(const std::vector<double>& values, const std::vector<std::size_t>& dims,
                       std::size_t d) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(d));
  Eigen::Index j = 0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    out.segment(j, static_cast<Eigen::Index>(dims[i])).setConstant(values[i]);
    j += static_cast<Eigen::Index>(dims[i]);
  }
  return out;
}

std::uint32_t low(std::uint64_t x) { return static_cast<std::uint32_t>(x & 0xffffffffu); }
std::uint32_t high(std::uint64_t x) { return static_cast<std::uint32_t>(x >> 32); }

}  // namespace

Eigen::VectorXd SimConfig::sigma_diagonal() const { return expand(taus, dims, d); }
Eigen::VectorXd SimConfig::phi_diagonal() const { return expand(phis, dims, d); }

std::mt19937_64 replication_engine(std::uint64_t seed, std::uint64_t replication, Stream stream) {
  const auto tag = static_cast<std::uint64_t>(stream);
  std::seed_seq sequence{low(seed), high(seed), low(replication), high(replication), low(tag),
                         0x9e3779b9u};
  return std::mt19937_64(sequence);
}

Eigen::MatrixXd sample_design(const SimConfig& config, std::uint64_t replication) {
  auto engine = replication_engine(config.seed, replication, Stream::Design);
  std::normal_distribution<double> normal;
  const Eigen::VectorXd scale = config.sigma_diagonal().array().sqrt();
  const auto n = static_cast<Eigen::Index>(config.n);
  const auto d = static_cast<Eigen::Index>(config.d);
  Eigen::MatrixXd X(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) X(i, j) = normal(engine) * scale(j);
  return X;
}

Dataset sample_dataset(const SimConfig& config, std::uint64_t replication) {
  Dataset data;
  data.X = sample_design(config, replication);

  auto beta_engine = replication_engine(config.seed, replication, Stream::Parameter);
  auto noise_engine = replication_engine(config.seed, replication, Stream::Noise);
  std::normal_distribution<double> normal;
  const Eigen::VectorXd phi = config.phi_diagonal();
  const double scale = config.r2 / static_cast<double>(config.d);
  data.beta.resize(static_cast<Eigen::Index>(config.d));
  for (Eigen::Index j = 0; j < data.beta.size(); ++j)
    data.beta(j) = std::sqrt(scale * phi(j)) * normal(beta_engine);
  data.noise.resize(static_cast<Eigen::Index>(config.n));
  for (Eigen::Index i = 0; i < data.noise.size(); ++i) data.noise(i) = normal(noise_engine);
  data.Y = data.X * data.beta + std::sqrt(config.sigma2) * data.noise;
  return data;
}

Eigen::VectorXd ridge_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& Y, double lambda) {
  if (!(lambda >= 0.0)) throw Error(ErrorCode::DomainError, "lambda must be >= 0");
  if (Y.size() != X.rows()) throw Error(ErrorCode::LengthMismatch, "Y length differs from rows of X");
  const auto n = static_cast<double>(X.rows());
  const auto d = X.cols();
  if (lambda == 0.0) {
    Eigen::BDCSVD<Eigen::MatrixXd> svd(X, Eigen::ComputeThinU | Eigen::ComputeThinV);
    svd.setThreshold(static_cast<double>(d) * std::numeric_limits<double>::epsilon());
    return svd.solve(Y);
  }
  if (d <= X.rows()) {
    Eigen::MatrixXd A = X.transpose() * X / n;
    A.diagonal().array() += lambda;
    return A.llt().solve(X.transpose() * Y / n);
  }
  // Push-through identity: (X'X/n + lambda)^-1 X'/n = X'(XX'/n + lambda)^-1 / n.
  Eigen::MatrixXd G = X * X.transpose() / n;
  G.diagonal().array() += lambda;
  return X.transpose() * G.llt().solve(Y / n);
}

Eigen::VectorXd oracle_fit(const Dataset& data, const Eigen::VectorXd& phi_diagonal,
                           double sigma2, double r2) {
  if ((phi_diagonal.array() <= 0.0).any())
    throw Error(ErrorCode::SingularPrior, "oracle estimator needs Phi > 0 on every coordinate");
  if (!(r2 > 0.0)) throw Error(ErrorCode::SingularPrior, "oracle estimator needs r2 > 0");
  const auto n = static_cast<double>(data.X.rows());
  const auto d = static_cast<double>(data.X.cols());
  Eigen::MatrixXd A = data.X.transpose() * data.X / n;
  A.diagonal().array() += (sigma2 / r2) * (d / n) / phi_diagonal.array();
  return A.llt().solve(data.X.transpose() * data.Y / n);
}

double excess_risk(const Eigen::VectorXd& estimate, const Eigen::VectorXd& beta,
                   const Eigen::VectorXd& sigma_diagonal) {
  return (sigma_diagonal.array() * (estimate - beta).array().square()).sum();
}

DesignEigen::DesignEigen(const Eigen::MatrixXd& X, const Eigen::VectorXd& sigma_diagonal,
                         const Eigen::VectorXd& phi_diagonal)
    : n_(static_cast<std::size_t>(X.rows())),
      d_(static_cast<std::size_t>(X.cols())),
      sigma_(sigma_diagonal) {
  if (sigma_diagonal.size() != X.cols() || phi_diagonal.size() != X.cols())
    throw Error(ErrorCode::LengthMismatch, "Sigma/Phi diagonals must have d entries");
  const double n = static_cast<double>(n_);
  const double eps = std::numeric_limits<double>::epsilon();
  const double cutoff_factor = std::pow(static_cast<double>(d_) * eps, 2);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  const bool wide = d_ > n_;
  if (wide) {
    solver.compute(X * X.transpose() / n);
  } else {
    solver.compute(X.transpose() * X / n);
  }
  if (solver.info() != Eigen::Success)
    throw Error(ErrorCode::DecompositionFailure, "symmetric eigensolver did not converge");

  const Eigen::VectorXd& all = solver.eigenvalues();
  const double top = all.size() > 0 ? all.maxCoeff() : 0.0;
  std::vector<Eigen::Index> keep;
  for (Eigen::Index k = 0; k < all.size(); ++k)
    if (all(k) > cutoff_factor * top && all(k) > 0.0) keep.push_back(k);

  const auto rank = static_cast<Eigen::Index>(keep.size());
  mu_.resize(rank);
  V_.resize(X.cols(), rank);
  for (Eigen::Index r = 0; r < rank; ++r) {
    const Eigen::Index k = keep[static_cast<std::size_t>(r)];
    mu_(r) = all(k);
    if (wide) {
      V_.col(r) = X.transpose() * solver.eigenvectors().col(k) / std::sqrt(n * all(k));
    } else {
      V_.col(r) = solver.eigenvectors().col(k);
    }
  }

  const Eigen::MatrixXd sigma_v = V_.array().colwise() * sigma_diagonal.array();
  const Eigen::MatrixXd phi_v = V_.array().colwise() * phi_diagonal.array();
  const Eigen::MatrixXd m_sigma = V_.transpose() * sigma_v;
  const Eigen::MatrixXd m_phi = V_.transpose() * phi_v;
  sigma_in_span_ = m_sigma.diagonal();
  hadamard_ = m_sigma.cwiseProduct(m_phi);

  if (keep.size() == d_) {
    cross_ = Eigen::VectorXd::Zero(rank);
    null_sigma_ = 0.0;
    null_sigma_phi_ = 0.0;
  } else {
    const Eigen::VectorXd sigma_phi_in_span =
        (V_.array().square().colwise() * (sigma_diagonal.array() * phi_diagonal.array()))
            .colwise()
            .sum()
            .transpose();
    cross_ = sigma_phi_in_span - hadamard_.rowwise().sum();
    null_sigma_ = sigma_diagonal.sum() - sigma_in_span_.sum();
    null_sigma_phi_ = (sigma_diagonal.array() * phi_diagonal.array()).sum() -
                      2.0 * sigma_phi_in_span.sum() + hadamard_.sum();
  }
}

ConditionalRisk DesignEigen::conditional_risk(double lambda, double sigma2, double r2) const {
  if (!(lambda >= 0.0)) throw Error(ErrorCode::DomainError, "lambda must be >= 0");
  const Eigen::ArrayXd a = (mu_.array() + lambda).inverse();
  const double variance =
      sigma2 / static_cast<double>(n_) * (mu_.array() * a.square() * sigma_in_span_.array()).sum();
  const Eigen::VectorXd av = a.matrix();
  const double quadratic = av.dot(hadamard_ * av);
  const double bias = r2 / static_cast<double>(d_) *
                      (null_sigma_phi_ + 2.0 * lambda * (a * cross_.array()).sum() +
                       lambda * lambda * quadratic);
  return {variance, std::max(0.0, bias)};
}

double DesignEigen::parameter_bias(const Eigen::VectorXd& beta, double lambda) const {
  if (beta.size() != static_cast<Eigen::Index>(d_))
    throw Error(ErrorCode::LengthMismatch, "beta must have d entries");
  const Eigen::VectorXd shrink = (mu_.array() / (mu_.array() + lambda)).matrix();
  const Eigen::VectorXd w = V_.transpose() * beta;
  const Eigen::VectorXd u = beta - V_ * shrink.cwiseProduct(w);
  return (sigma_.array() * u.array().square()).sum();
}

TraceTriple DesignEigen::traces(double lambda) const {
  if (!(lambda > 0.0)) throw Error(ErrorCode::DomainError, "trace functionals need lambda > 0");
  const Eigen::ArrayXd a = (mu_.array() + lambda).inverse();
  const double d = static_cast<double>(d_);
  const double inv = 1.0 / lambda;
  const Eigen::VectorXd av = a.matrix();
  TraceTriple out{};
  out.t1 = (inv * null_sigma_ + (a * sigma_in_span_.array()).sum()) / d;
  out.t2 = (inv * inv * null_sigma_ + (a.square() * sigma_in_span_.array()).sum()) / d;
  out.t3 = (inv * inv * null_sigma_phi_ + 2.0 * inv * (a * cross_.array()).sum() +
            av.dot(hadamard_ * av)) /
           d;
  return out;
}

ConditionalRisk conditional_expected_risk(const Eigen::MatrixXd& X, double lambda,
                                          const SimConfig& config) {
  DesignEigen design(X, config.sigma_diagonal(), config.phi_diagonal());
  return design.conditional_risk(lambda, config.sigma2, config.r2);
}

TraceTriple empirical_trace_limits(const Eigen::MatrixXd& X, double lambda,
                                   const SimConfig& config) {
  DesignEigen design(X, config.sigma_diagonal(), config.phi_diagonal());
  return design.traces(lambda);
}

TraceTriple trace_limits(const ProblemSpec& spec, double lambda) {
  if (!(lambda > 0.0)) throw Error(ErrorCode::DomainError, "trace limits need lambda > 0");
  const auto companion = solve_companion(spec.spectrum, spec.gamma, lambda);
  const double v = companion.v;
  const double vp = companion.v_prime;
  const double g = spec.gamma;
  const double lv = lambda * v;
  const auto theta = theta_phi(spec.spectrum, spec.source, g, lambda, v);
  TraceTriple out{};
  out.t1 = (1.0 - lv) / (g * lv);
  out.t2 = (v - lambda * vp) / (g * lv * lv);
  out.t3 = vp * theta.bias_integrand / (lv * lv);
  return out;
}

namespace {

double pairwise_sum(std::span<const double> values) {
  if (values.size() <= 8) {
    double sum = 0.0;
    for (double x : values) sum += x;
    return sum;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

}  // namespace

McEstimate summarize(std::string name, std::span<const double> samples) {
  McEstimate out;
  out.name = std::move(name);
  out.replications = samples.size();
  if (samples.empty()) return out;
  const double count = static_cast<double>(samples.size());
  out.mean = pairwise_sum(samples) / count;
  if (samples.size() > 1) {
    std::vector<double> squares(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const double dev = samples[i] - out.mean;
      squares[i] = dev * dev;
    }
    const double variance = pairwise_sum(squares) / (count - 1.0);
    out.std_error = std::sqrt(variance / count);
  }
  return out;
}

std::vector<McEstimate> replicate(const SimConfig& config, Quantity quantity, unsigned threads) {
  const std::size_t reps = config.replications;
  std::vector<std::array<double, 3>> rows(reps);
  const Eigen::VectorXd sigma = config.sigma_diagonal();
  const Eigen::VectorXd phi = config.phi_diagonal();

  parallel_for(reps, threads, [&](std::size_t rep) {
    auto& row = rows[rep];
    if (quantity == Quantity::EstimatorComparison) {
      const Dataset data = sample_dataset(config, rep);
      const double ridge = excess_risk(ridge_fit(data, config.lambda), data.beta, sigma);
      const double oracle =
          excess_risk(oracle_fit(data, phi, config.sigma2, config.r2), data.beta, sigma);
      row = {ridge, oracle, ridge - oracle};
      return;
    }
    const DesignEigen design(sample_design(config, rep), sigma, phi);
    if (quantity == Quantity::Traces) {
      const auto t = design.traces(config.lambda);
      row = {t.t1, t.t2, t.t3};
      return;
    }
    const auto risk = design.conditional_risk(config.lambda, config.sigma2, config.r2);
    row = {risk.total(), risk.bias, risk.variance};
  });

  auto column = [&](std::size_t c) {
    std::vector<double> values(reps);
    for (std::size_t i = 0; i < reps; ++i) values[i] = rows[i][c];
    return values;
  };
  switch (quantity) {
    case Quantity::Risk: return {summarize("total", column(0))};
    case Quantity::Bias: return {summarize("bias", column(1))};
    case Quantity::Variance: return {summarize("variance", column(2))};
    case Quantity::Traces:
      return {summarize("t1", column(0)), summarize("t2", column(1)), summarize("t3", column(2))};
    case Quantity::EstimatorComparison:
      return {summarize("ridge", column(0)), summarize("oracle", column(1)),
              summarize("ridge_minus_oracle", column(2))};
  }
  return {};
}

RiskGridEstimate replicate_risk_grid(const SimConfig& config, std::span<const double> lambdas,
                                     unsigned threads) {
  const std::size_t reps = config.replications;
  const std::size_t points = lambdas.size();
  std::vector<ConditionalRisk> cells(reps * points);
  const Eigen::VectorXd sigma = config.sigma_diagonal();
  const Eigen::VectorXd phi = config.phi_diagonal();

  parallel_for(reps, threads, [&](std::size_t rep) {
    const DesignEigen design(sample_design(config, rep), sigma, phi);
    for (std::size_t p = 0; p < points; ++p)
      cells[rep * points + p] = design.conditional_risk(lambdas[p], config.sigma2, config.r2);
  });

  RiskGridEstimate out;
  out.lambdas.assign(lambdas.begin(), lambdas.end());
  std::vector<double> variance(reps), bias(reps), total(reps);
  for (std::size_t p = 0; p < points; ++p) {
    for (std::size_t rep = 0; rep < reps; ++rep) {
      const auto& cell = cells[rep * points + p];
      variance[rep] = cell.variance;
      bias[rep] = cell.bias;
      total[rep] = cell.total();
    }
    out.variance.push_back(summarize("variance", variance));
    out.bias.push_back(summarize("bias", bias));
    out.total.push_back(summarize("total", total));
  }
  return out;
}

}  // namespace ridgerisk
