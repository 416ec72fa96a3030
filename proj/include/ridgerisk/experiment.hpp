#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ridgerisk/spectral.hpp"

namespace ridgerisk {

enum class Mode { RiskCurve, OptimalLambda, McCompare, Figure, Sweep };

const char* mode_name(Mode mode) noexcept;
Mode parse_mode(const std::string& name);  // throws ValueError

struct LambdaGrid {
  double min = 1e-3;
  double max = 10.0;
  std::size_t count = 50;
  bool log_scale = true;

  std::vector<double> values() const;
};

enum class ModelKind { Atoms, StrongWeak, NormalizedStrongWeak };

struct ModelConfig {
  ModelKind kind = ModelKind::Atoms;
  // Atoms
  std::vector<std::pair<double, double>> atoms{{1.0, 1.0}};
  SourceFamily source_family = SourceFamily::Constant;
  double source_parameter = 1.0;                       // constant value / power exponent
  std::vector<std::pair<double, double>> source_table;  // tabulated (tau, phi)
  // StrongWeak
  double rho1 = 1.0, rho2 = 1.0, psi1 = 0.5, phi1 = 1.0, phi2 = 1.0;
  // NormalizedStrongWeak (psi1 shared with StrongWeak)
  double eigen_share = 0.5;
  double coef_ratio = 1.0;
};

struct SimulationBlock {
  std::size_t d = 256;
  std::size_t replications = 0;  // 0 = theory only
  std::uint64_t seed = 0;
};

struct SweepBlock {
  std::string parameter;
  std::vector<double> values;
};

// Grids for the figure presets; only the block matching the preset is used.
struct FigureBlock {
  // fig1
  std::vector<double> eigen_shares;  // rho1/(rho1+rho2)
  std::vector<double> coef_ratios;     // phi1/phi2 (fig1, fig3)
  std::vector<double> mc_coef_ratios;  // fig1 curves that get a simulation overlay
  // fig2
  double strong_rho = 0.5;
  double strong_aspect = 1.5;          // gamma * psi1 = d1 / n
  std::vector<double> inv_psi1_path;   // 1/psi1 values for the ratio sweep
  std::vector<double> weak_ratios;     // rho2/rho1 grid
  std::vector<double> inv_psi1_tuned;  // 1/psi1 values with tuned rho2
  std::size_t tuned_d = 1024;
  // fig3
  std::vector<double> eigen_ratios;  // rho1/rho2, paired with coef_ratios
  std::vector<double> gammas;
};

struct ExperimentConfig {
  Mode mode = Mode::RiskCurve;
  std::string preset;  // fig1 | fig2 | fig3 when mode == Figure
  ModelConfig model;
  double gamma = 2.0;
  double sigma2 = 1.0;
  double r2 = 1.0;
  LambdaGrid lambda_grid;
  std::optional<double> lambda;  // fixed lambda for sweeps; nullopt = optimal
  bool lambda_optimal = false;
  SimulationBlock simulation;
  std::optional<SweepBlock> sweep;
  FigureBlock figure;
  std::string output = ".";
  unsigned threads = 1;
};

ProblemSpec build_problem(const ExperimentConfig& config);

// Built-in configurations reproducing the three figure setups.
ExperimentConfig preset_config(const std::string& name);

// Parses a JSON document. A "preset" key starts from that preset and the
// remaining keys override it. Throws SchemaError (with the field path) or
// ValueError (with the offending value).
ExperimentConfig parse_config(const std::string& text);

// Re-checks every precondition; parse_config calls it.
void validate_config(const ExperimentConfig& config);

// Full resolved configuration as JSON text.
std::string config_to_json(const ExperimentConfig& config);

// Writes the CSV file(s) plus one <stem>.meta.json sidecar into
// config.output and returns the paths written. Files from a failed run are
// removed before the error propagates.
std::vector<std::filesystem::path> run_experiment(const ExperimentConfig& config);

// Sweeps one scalar; rows follow `values` order.
std::filesystem::path sweep(const ExperimentConfig& config, const std::string& parameter,
                            const std::vector<double>& values);

std::string format_double(double value);  // 17 significant digits

}  // namespace ridgerisk
