#include "ridgerisk/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "ridgerisk/error.hpp"
#include "ridgerisk/montecarlo.hpp"
#include "ridgerisk/parallel.hpp"
#include "ridgerisk/risk.hpp"

namespace ridgerisk {

using nlohmann::json;
namespace fs = std::filesystem;

const char* mode_name(Mode mode) noexcept {
  switch (mode) {
    case Mode::RiskCurve: return "risk-curve";
    case Mode::OptimalLambda: return "optimal-lambda";
    case Mode::McCompare: return "mc-compare";
    case Mode::Figure: return "figure";
    case Mode::Sweep: return "sweep";
  }
  return "unknown";
}

Mode parse_mode(const std::string& name) {
  for (Mode mode : {Mode::RiskCurve, Mode::OptimalLambda, Mode::McCompare, Mode::Figure,
                    Mode::Sweep}) {
    if (name == mode_name(mode)) return mode;
  }
  throw Error(ErrorCode::ValueError, "unknown mode '" + name + "'");
}

namespace {

std::vector<double> spaced(double lo, double hi, std::size_t count, bool log_scale) {
  std::vector<double> out(count);
  if (count == 1) {
    out[0] = lo;
    return out;
  }
  for (std::size_t i = 0; i < count; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(count - 1);
    out[i] = log_scale ? std::exp(std::log(lo) + t * (std::log(hi) - std::log(lo)))
                       : lo + t * (hi - lo);
  }
  out.front() = lo;
  out.back() = hi;
  return out;
}

std::vector<double> stepped(double lo, double hi, double step) {
  std::vector<double> out;
  const auto count = static_cast<std::size_t>(std::llround((hi - lo) / step)) + 1;
  for (std::size_t i = 0; i < count; ++i) out.push_back(lo + step * static_cast<double>(i));
  return out;
}

}  // namespace

std::vector<double> LambdaGrid::values() const { return spaced(min, max, count, log_scale); }

ProblemSpec build_problem(const ExperimentConfig& config) {
  const ModelConfig& m = config.model;
  switch (m.kind) {
    case ModelKind::Atoms: {
      auto spectrum = AtomicSpectrum::make(m.atoms);
      auto source = m.source_family == SourceFamily::Constant
                        ? SourceFunction::constant(spectrum, m.source_parameter)
                    : m.source_family == SourceFamily::Power
                        ? SourceFunction::power(spectrum, m.source_parameter)
                        : SourceFunction::tabulated(spectrum, m.source_table);
      return ProblemSpec::make(std::move(spectrum), std::move(source), config.gamma,
                               config.sigma2, config.r2);
    }
    case ModelKind::StrongWeak: {
      auto model = strong_weak_model(m.rho1, m.rho2, m.psi1, m.phi1, m.phi2);
      return ProblemSpec::make(std::move(model.spectrum), std::move(model.source), config.gamma,
                               config.sigma2, config.r2);
    }
    case ModelKind::NormalizedStrongWeak: {
      const auto p = normalized_strong_weak(m.eigen_share, m.coef_ratio, m.psi1);
      auto model = strong_weak_model(p.rho1, p.rho2, p.psi1, p.phi1, p.phi2);
      return ProblemSpec::make(std::move(model.spectrum), std::move(model.source), config.gamma,
                               config.sigma2, config.r2);
    }
  }
  throw Error(ErrorCode::ValueError, "unknown model kind");
}

// ---------------------------------------------------------------------------
// Presets

ExperimentConfig preset_config(const std::string& name) {
  ExperimentConfig config;
  config.mode = Mode::Figure;
  config.preset = name;
  config.simulation.seed = 0;
  if (name == "fig1") {
    config.sigma2 = 0.05;
    config.r2 = 1.0;
    config.gamma = 3.5;
    config.model.kind = ModelKind::NormalizedStrongWeak;
    config.model.psi1 = 0.5;
    config.simulation.d = 1024;
    config.simulation.replications = 40;
    config.figure.eigen_shares = spaced(0.5, 0.95, 15, false);
    config.figure.coef_ratios = {1.0, 2.0, 4.0, 10.0, 100.0};
    config.figure.mc_coef_ratios = {1.0, 4.0};
  } else if (name == "fig2") {
    config.sigma2 = 1.0;
    config.r2 = 1.0;
    config.model.kind = ModelKind::StrongWeak;
    config.model.rho1 = 0.5;
    config.simulation.d = 256;
    config.simulation.replications = 20;
    config.figure.strong_rho = 0.5;
    config.figure.strong_aspect = 1.5;
    config.figure.inv_psi1_path = {2.0, 4.0, 8.0};
    config.figure.weak_ratios = spaced(1e-3, 1.0, 25, true);
    config.figure.inv_psi1_tuned = {1.5, 2.0, 3.0, 5.0, 8.0};
    config.figure.tuned_d = 1024;
  } else if (name == "fig3") {
    config.sigma2 = 1.0;
    config.r2 = 1.0;
    config.model.kind = ModelKind::NormalizedStrongWeak;
    config.model.psi1 = 0.35;
    config.simulation.d = 256;
    config.simulation.replications = 20;
    config.figure.eigen_ratios = {1000.0, 1000.0, 1000.0, 10.0};
    config.figure.coef_ratios = {0.01, 1.0, 10.0, 1.0};
    config.figure.gammas = stepped(1.05, 6.0, 0.05);
  } else {
    throw Error(ErrorCode::ValueError, "unknown figure preset '" + name + "'");
  }
  return config;
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

[[noreturn]] void schema_error(const std::string& path, const std::string& what) {
  throw Error(ErrorCode::SchemaError, path + ": " + what);
}

[[noreturn]] void value_error(const std::string& path, const std::string& what) {
  throw Error(ErrorCode::ValueError, path + ": " + what);
}

void check_keys(const json& object, const std::string& path,
                std::initializer_list<const char*> allowed) {
  if (!object.is_object()) schema_error(path, "expected an object");
  for (const auto& item : object.items()) {
    const bool known = std::any_of(allowed.begin(), allowed.end(),
                                   [&](const char* key) { return item.key() == key; });
    if (!known) schema_error(path + "." + item.key(), "unknown field");
  }
}

double read_number(const json& value, const std::string& path) {
  if (!value.is_number()) schema_error(path, "expected a number");
  const double x = value.get<double>();
  if (!std::isfinite(x)) value_error(path, "not finite");
  return x;
}

std::size_t read_count(const json& value, const std::string& path) {
  if (!value.is_number_integer()) schema_error(path, "expected an integer");
  const auto x = value.get<long long>();
  if (x < 0) value_error(path, "must be >= 0, got " + std::to_string(x));
  return static_cast<std::size_t>(x);
}

std::string read_string(const json& value, const std::string& path) {
  if (!value.is_string()) schema_error(path, "expected a string");
  return value.get<std::string>();
}

std::vector<double> read_numbers(const json& value, const std::string& path) {
  if (!value.is_array()) schema_error(path, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < value.size(); ++i)
    out.push_back(read_number(value[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

std::vector<std::pair<double, double>> read_pairs(const json& value, const std::string& path) {
  if (!value.is_array()) schema_error(path, "expected an array of [x, y] pairs");
  std::vector<std::pair<double, double>> out;
  for (std::size_t i = 0; i < value.size(); ++i) {
    const std::string item = path + "[" + std::to_string(i) + "]";
    if (!value[i].is_array() || value[i].size() != 2) schema_error(item, "expected [x, y]");
    out.emplace_back(read_number(value[i][0], item + "[0]"), read_number(value[i][1], item + "[1]"));
  }
  return out;
}

void parse_model(const json& doc, ModelConfig& model) {
  const std::string path = "model";
  if (!doc.is_object()) schema_error(path, "expected an object");
  const std::string type = doc.contains("type") ? read_string(doc["type"], path + ".type") : "atoms";
  auto number = [&](const char* key, double& target) {
    if (doc.contains(key)) target = read_number(doc[key], path + "." + key);
  };
  if (type == "atoms") {
    check_keys(doc, path, {"type", "atoms", "source"});
    model.kind = ModelKind::Atoms;
    if (doc.contains("atoms")) model.atoms = read_pairs(doc["atoms"], path + ".atoms");
    if (doc.contains("source")) {
      const json& source = doc["source"];
      const std::string spath = path + ".source";
      check_keys(source, spath, {"type", "value", "alpha", "values"});
      const std::string stype = source.contains("type") ? read_string(source["type"], spath + ".type")
                                                        : "constant";
      if (stype == "constant") {
        model.source_family = SourceFamily::Constant;
        model.source_parameter =
            source.contains("value") ? read_number(source["value"], spath + ".value") : 1.0;
      } else if (stype == "power") {
        model.source_family = SourceFamily::Power;
        if (!source.contains("alpha")) schema_error(spath + ".alpha", "required for power sources");
        model.source_parameter = read_number(source["alpha"], spath + ".alpha");
      } else if (stype == "tabulated") {
        model.source_family = SourceFamily::Tabulated;
        if (!source.contains("values")) schema_error(spath + ".values", "required for tabulated sources");
        model.source_table = read_pairs(source["values"], spath + ".values");
      } else {
        value_error(spath + ".type", "unknown source type '" + stype + "'");
      }
    }
  } else if (type == "strong_weak") {
    check_keys(doc, path, {"type", "rho1", "rho2", "psi1", "phi1", "phi2"});
    model.kind = ModelKind::StrongWeak;
    number("rho1", model.rho1);
    number("rho2", model.rho2);
    number("psi1", model.psi1);
    number("phi1", model.phi1);
    number("phi2", model.phi2);
  } else if (type == "strong_weak_normalized") {
    check_keys(doc, path, {"type", "eigen_share", "coef_ratio", "psi1"});
    model.kind = ModelKind::NormalizedStrongWeak;
    number("eigen_share", model.eigen_share);
    number("coef_ratio", model.coef_ratio);
    number("psi1", model.psi1);
  } else {
    value_error(path + ".type", "unknown model type '" + type + "'");
  }
}

void parse_figure(const json& doc, FigureBlock& figure) {
  const std::string path = "figure";
  check_keys(doc, path,
             {"eigen_shares", "coef_ratios", "mc_coef_ratios", "strong_rho", "strong_aspect",
              "inv_psi1_path", "weak_ratios", "inv_psi1_tuned", "tuned_d", "eigen_ratios",
              "gammas"});
  auto numbers = [&](const char* key, std::vector<double>& target) {
    if (doc.contains(key)) target = read_numbers(doc[key], path + "." + key);
  };
  numbers("eigen_shares", figure.eigen_shares);
  numbers("coef_ratios", figure.coef_ratios);
  numbers("mc_coef_ratios", figure.mc_coef_ratios);
  numbers("inv_psi1_path", figure.inv_psi1_path);
  numbers("weak_ratios", figure.weak_ratios);
  numbers("inv_psi1_tuned", figure.inv_psi1_tuned);
  numbers("eigen_ratios", figure.eigen_ratios);
  numbers("gammas", figure.gammas);
  if (doc.contains("strong_rho")) figure.strong_rho = read_number(doc["strong_rho"], path + ".strong_rho");
  if (doc.contains("strong_aspect"))
    figure.strong_aspect = read_number(doc["strong_aspect"], path + ".strong_aspect");
  if (doc.contains("tuned_d")) figure.tuned_d = read_count(doc["tuned_d"], path + ".tuned_d");
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::SchemaError, std::string("$: malformed JSON: ") + e.what());
  }
  check_keys(doc, "$",
             {"mode", "preset", "model", "gamma", "sigma2", "r2", "lambda_grid", "lambda",
              "simulation", "sweep", "figure", "output", "threads"});

  ExperimentConfig config;
  if (doc.contains("preset")) {
    config = preset_config(read_string(doc["preset"], "preset"));
  }
  if (doc.contains("mode")) config.mode = parse_mode(read_string(doc["mode"], "mode"));
  if (doc.contains("model")) parse_model(doc["model"], config.model);
  if (doc.contains("gamma")) config.gamma = read_number(doc["gamma"], "gamma");
  if (doc.contains("sigma2")) config.sigma2 = read_number(doc["sigma2"], "sigma2");
  if (doc.contains("r2")) config.r2 = read_number(doc["r2"], "r2");

  if (doc.contains("lambda_grid")) {
    const json& grid = doc["lambda_grid"];
    check_keys(grid, "lambda_grid", {"min", "max", "count", "scale"});
    if (grid.contains("min")) config.lambda_grid.min = read_number(grid["min"], "lambda_grid.min");
    if (grid.contains("max")) config.lambda_grid.max = read_number(grid["max"], "lambda_grid.max");
    if (grid.contains("count")) config.lambda_grid.count = read_count(grid["count"], "lambda_grid.count");
    if (grid.contains("scale")) {
      const auto scale = read_string(grid["scale"], "lambda_grid.scale");
      if (scale != "log" && scale != "linear")
        value_error("lambda_grid.scale", "expected 'log' or 'linear', got '" + scale + "'");
      config.lambda_grid.log_scale = scale == "log";
    }
  }

  if (doc.contains("lambda")) {
    const json& lambda = doc["lambda"];
    if (lambda.is_string()) {
      if (lambda.get<std::string>() != "optimal")
        value_error("lambda", "expected a number or 'optimal'");
      config.lambda.reset();
      config.lambda_optimal = true;
    } else {
      config.lambda = read_number(lambda, "lambda");
      config.lambda_optimal = false;
    }
  }

  if (doc.contains("simulation")) {
    const json& sim = doc["simulation"];
    check_keys(sim, "simulation", {"d", "replications", "seed"});
    if (sim.contains("d")) config.simulation.d = read_count(sim["d"], "simulation.d");
    if (sim.contains("replications"))
      config.simulation.replications = read_count(sim["replications"], "simulation.replications");
    if (sim.contains("seed")) {
      if (!sim["seed"].is_number_integer() || sim["seed"].is_number_float())
        schema_error("simulation.seed", "expected an unsigned integer");
      if (sim["seed"].is_number_unsigned()) {
        config.simulation.seed = sim["seed"].get<std::uint64_t>();
      } else {
        const auto seed = sim["seed"].get<long long>();
        if (seed < 0) value_error("simulation.seed", "must be >= 0");
        config.simulation.seed = static_cast<std::uint64_t>(seed);
      }
    }
  }

  if (doc.contains("sweep")) {
    const json& sw = doc["sweep"];
    check_keys(sw, "sweep", {"parameter", "values", "min", "max", "count", "scale"});
    SweepBlock block;
    if (!sw.contains("parameter")) schema_error("sweep.parameter", "required");
    block.parameter = read_string(sw["parameter"], "sweep.parameter");
    if (sw.contains("values")) {
      block.values = read_numbers(sw["values"], "sweep.values");
    } else {
      if (!sw.contains("min") || !sw.contains("max") || !sw.contains("count"))
        schema_error("sweep", "needs either values or min/max/count");
      const double lo = read_number(sw["min"], "sweep.min");
      const double hi = read_number(sw["max"], "sweep.max");
      const std::size_t count = read_count(sw["count"], "sweep.count");
      bool log_scale = false;
      if (sw.contains("scale")) {
        const auto scale = read_string(sw["scale"], "sweep.scale");
        if (scale != "log" && scale != "linear")
          value_error("sweep.scale", "expected 'log' or 'linear', got '" + scale + "'");
        log_scale = scale == "log";
      }
      if (count == 0) value_error("sweep.count", "must be >= 1");
      if (log_scale && !(lo > 0.0)) value_error("sweep.min", "log scale needs min > 0");
      block.values = spaced(lo, hi, count, log_scale);
    }
    config.sweep = std::move(block);
  }

  if (doc.contains("figure")) parse_figure(doc["figure"], config.figure);
  if (doc.contains("output")) config.output = read_string(doc["output"], "output");
  if (doc.contains("threads")) config.threads = static_cast<unsigned>(read_count(doc["threads"], "threads"));

  validate_config(config);
  return config;
}

void validate_config(const ExperimentConfig& config) {
  if (!(config.gamma > 0.0)) value_error("gamma", "must be > 0, got " + format_double(config.gamma));
  if (!(config.sigma2 >= 0.0)) value_error("sigma2", "must be >= 0, got " + format_double(config.sigma2));
  if (!(config.r2 >= 0.0)) value_error("r2", "must be >= 0, got " + format_double(config.r2));

  const LambdaGrid& grid = config.lambda_grid;
  if (grid.count < 1) value_error("lambda_grid.count", "must be >= 1");
  if (!(grid.min >= 0.0)) value_error("lambda_grid.min", "must be >= 0");
  if (grid.max < grid.min) value_error("lambda_grid.max", "must be >= min");
  if (grid.log_scale && !(grid.min > 0.0)) value_error("lambda_grid.min", "log scale needs min > 0");
  if (grid.min == 0.0 && config.gamma <= 1.0)
    value_error("lambda_grid.min", "lambda = 0 needs gamma > 1");
  if (config.lambda) {
    if (!(*config.lambda >= 0.0)) value_error("lambda", "must be >= 0");
    if (*config.lambda == 0.0 && config.gamma <= 1.0) value_error("lambda", "lambda = 0 needs gamma > 1");
  }

  if (config.simulation.replications > 0 && config.simulation.d == 0)
    value_error("simulation.d", "must be >= 1");

  if (config.mode == Mode::McCompare && config.simulation.replications == 0)
    value_error("simulation.replications", "mc-compare needs replications > 0");
  if (config.mode == Mode::Sweep && !config.sweep)
    schema_error("sweep", "required for sweep mode");
  if (config.sweep && config.sweep->values.empty()) value_error("sweep.values", "must not be empty");
  if (config.mode == Mode::Figure) {
    if (config.preset != "fig1" && config.preset != "fig2" && config.preset != "fig3")
      value_error("preset", "figure mode needs preset fig1, fig2 or fig3");
    if (config.preset == "fig3" && config.figure.eigen_ratios.size() != config.figure.coef_ratios.size())
      value_error("figure.eigen_ratios", "must pair with figure.coef_ratios");
    return;
  }

  try {
    build_problem(config);
  } catch (const Error& e) {
    value_error("model", e.what());
  }
}

std::string config_to_json(const ExperimentConfig& config) {
  json doc;
  doc["mode"] = mode_name(config.mode);
  if (!config.preset.empty()) doc["preset"] = config.preset;
  json model;
  const ModelConfig& m = config.model;
  switch (m.kind) {
    case ModelKind::Atoms: {
      model["type"] = "atoms";
      json atoms = json::array();
      for (const auto& [tau, w] : m.atoms) atoms.push_back({tau, w});
      model["atoms"] = atoms;
      json source;
      if (m.source_family == SourceFamily::Constant) {
        source = {{"type", "constant"}, {"value", m.source_parameter}};
      } else if (m.source_family == SourceFamily::Power) {
        source = {{"type", "power"}, {"alpha", m.source_parameter}};
      } else {
        json values = json::array();
        for (const auto& [tau, phi] : m.source_table) values.push_back({tau, phi});
        source = {{"type", "tabulated"}, {"values", values}};
      }
      model["source"] = source;
      break;
    }
    case ModelKind::StrongWeak:
      model = {{"type", "strong_weak"}, {"rho1", m.rho1}, {"rho2", m.rho2},
               {"psi1", m.psi1}, {"phi1", m.phi1}, {"phi2", m.phi2}};
      break;
    case ModelKind::NormalizedStrongWeak:
      model = {{"type", "strong_weak_normalized"}, {"eigen_share", m.eigen_share},
               {"coef_ratio", m.coef_ratio}, {"psi1", m.psi1}};
      break;
  }
  doc["model"] = model;
  doc["gamma"] = config.gamma;
  doc["sigma2"] = config.sigma2;
  doc["r2"] = config.r2;
  doc["lambda_grid"] = {{"min", config.lambda_grid.min}, {"max", config.lambda_grid.max},
                        {"count", config.lambda_grid.count},
                        {"scale", config.lambda_grid.log_scale ? "log" : "linear"}};
  if (config.lambda) {
    doc["lambda"] = *config.lambda;
  } else if (config.lambda_optimal) {
    doc["lambda"] = "optimal";
  }
  doc["simulation"] = {{"d", config.simulation.d},
                       {"replications", config.simulation.replications},
                       {"seed", config.simulation.seed}};
  if (config.sweep) doc["sweep"] = {{"parameter", config.sweep->parameter}, {"values", config.sweep->values}};
  if (config.mode == Mode::Figure) {
    const FigureBlock& f = config.figure;
    doc["figure"] = {{"eigen_shares", f.eigen_shares}, {"coef_ratios", f.coef_ratios},
                     {"mc_coef_ratios", f.mc_coef_ratios}, {"strong_rho", f.strong_rho},
                     {"strong_aspect", f.strong_aspect}, {"inv_psi1_path", f.inv_psi1_path},
                     {"weak_ratios", f.weak_ratios}, {"inv_psi1_tuned", f.inv_psi1_tuned},
                     {"tuned_d", f.tuned_d}, {"eigen_ratios", f.eigen_ratios},
                     {"gammas", f.gammas}};
  }
  doc["output"] = config.output;
  doc["threads"] = config.threads;
  return doc.dump(2);
}

// ---------------------------------------------------------------------------
// Output

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buffer[40];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

namespace {

using Cell = std::string;

class Table {
 public:
  explicit Table(std::vector<std::string> header) : header_(std::move(header)) {}

  void add(std::vector<Cell> row) {
    if (row.size() != header_.size())
      throw Error(ErrorCode::InvalidArgument, "CSV row width does not match header");
    rows_.push_back(std::move(row));
  }

  std::string render() const {
    std::ostringstream out;
    write_row(out, header_);
    for (const auto& row : rows_) write_row(out, row);
    return out.str();
  }

 private:
  static void write_row(std::ostringstream& out, const std::vector<Cell>& row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out << ',';
      const Cell& cell = row[i];
      if (cell.find_first_of(",\"\r\n") != std::string::npos) {
        out << '"';
        for (char c : cell) {
          if (c == '"') out << '"';
          out << c;
        }
        out << '"';
      } else {
        out << cell;
      }
    }
    out << "\r\n";
  }

  std::vector<std::string> header_;
  std::vector<std::vector<Cell>> rows_;
};

Cell num(double x) { return format_double(x); }
Cell flag(bool b) { return b ? "true" : "false"; }

// Collects output files and deletes them unless the run completes.
class OutputSet {
 public:
  explicit OutputSet(fs::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec || !fs::is_directory(dir_))
      throw Error(ErrorCode::IoError, "cannot create output directory " + dir_.string());
  }
  OutputSet(const OutputSet&) = delete;
  OutputSet& operator=(const OutputSet&) = delete;
  ~OutputSet() {
    if (committed_) return;
    std::error_code ec;
    for (const auto& path : written_) fs::remove(path, ec);
  }

  fs::path write(const std::string& name, const std::string& body) {
    const fs::path path = dir_ / name;
    const fs::path staging = dir_ / (name + ".partial");
    {
      std::ofstream out(staging, std::ios::binary | std::ios::trunc);
      if (!out) throw Error(ErrorCode::IoError, "cannot write " + staging.string());
      written_.push_back(staging);
      out << body;
      if (!out) throw Error(ErrorCode::IoError, "write failed for " + staging.string());
    }
    std::error_code ec;
    fs::rename(staging, path, ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot rename into " + path.string());
    written_.back() = path;
    return path;
  }

  std::vector<fs::path> commit() {
    committed_ = true;
    return written_;
  }

 private:
  fs::path dir_;
  std::vector<fs::path> written_;
  bool committed_ = false;
};

std::string timestamp_utc() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buffer[32];
  std::strftime(buffer, sizeof(buffer), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buffer;
}

void write_metadata(OutputSet& out, const std::string& stem, const ExperimentConfig& config,
                    const std::vector<std::string>& files, const json& extra) {
  json meta;
  meta["config"] = json::parse(config_to_json(config));
  meta["seed"] = config.simulation.seed;
  meta["generated_at"] = timestamp_utc();
  meta["files"] = files;
  meta["lambda_grid_scale"] = config.lambda_grid.log_scale ? "log" : "linear";
  meta["rng"] = "mt19937_64 per (seed, replication, stream) via std::seed_seq";
  for (const auto& item : extra.items()) meta[item.key()] = item.value();
  out.write(stem + ".meta.json", meta.dump(2) + "\n");
}

// Seed for an independent sub-experiment (sweep point, figure curve).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

const std::vector<std::string> kMcRiskColumns = {"variance_mc", "variance_mc_stderr", "bias_mc",
                                                 "bias_mc_stderr", "total_mc", "total_mc_stderr"};

void append_mc(std::vector<Cell>& row, const McEstimate& variance, const McEstimate& bias,
               const McEstimate& total) {
  row.push_back(num(variance.mean));
  row.push_back(num(variance.std_error));
  row.push_back(num(bias.mean));
  row.push_back(num(bias.std_error));
  row.push_back(num(total.mean));
  row.push_back(num(total.std_error));
}

// Minimizes f over log-spaced [lo, hi]: coarse scan, then golden section.
template <class F>
double minimize_log(F&& f, double lo, double hi, int scan = 41, double rel_tol = 1e-6) {
  const double a = std::log(lo);
  const double b = std::log(hi);
  std::vector<double> grid(static_cast<std::size_t>(scan));
  std::vector<double> values(grid.size());
  for (int i = 0; i < scan; ++i) {
    grid[i] = a + (b - a) * i / (scan - 1);
    values[i] = f(std::exp(grid[i]));
  }
  const auto best = static_cast<int>(std::min_element(values.begin(), values.end()) - values.begin());
  const double left = grid[std::max(best - 1, 0)];
  const double right = grid[std::min(best + 1, scan - 1)];
  const double t = golden_section_minimize([&](double x) { return f(std::exp(x)); }, left, right,
                                           std::log1p(rel_tol));
  const double candidate = std::exp(t);
  return f(candidate) <= values[best] ? candidate : std::exp(grid[best]);
}

// ---------------------------------------------------------------------------
// Modes

std::vector<fs::path> run_risk_curve(const ExperimentConfig& config, bool compare) {
  const ProblemSpec spec = build_problem(config);
  const auto lambdas = config.lambda_grid.values();
  std::vector<RiskBreakdown> theory(lambdas.size());
  parallel_for(lambdas.size(), config.threads,
               [&](std::size_t i) { theory[i] = asymptotic_risk(spec, lambdas[i]); });

  const bool with_mc = config.simulation.replications > 0;
  RiskGridEstimate mc;
  if (with_mc) {
    const auto sim = SimConfig::from_spec(spec, config.simulation.d, 0.0,
                                          config.simulation.replications, config.simulation.seed);
    mc = replicate_risk_grid(sim, lambdas, config.threads);
  }

  std::vector<std::string> header;
  if (compare) {
    header = {"lambda", "total_theory", "total_mc", "total_mc_stderr", "z_score",
              "variance_theory", "variance_mc", "variance_mc_stderr", "bias_theory", "bias_mc",
              "bias_mc_stderr"};
  } else {
    header = {"lambda", "v", "v_prime", "variance_theory", "bias_theory", "total_theory"};
    if (with_mc) header.insert(header.end(), kMcRiskColumns.begin(), kMcRiskColumns.end());
  }
  Table table(header);
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    const auto& t = theory[i];
    std::vector<Cell> row;
    if (compare) {
      const auto& total = mc.total[i];
      const double z = total.std_error > 0.0 ? (total.mean - t.total) / total.std_error
                                             : std::numeric_limits<double>::quiet_NaN();
      row = {num(lambdas[i]), num(t.total), num(total.mean), num(total.std_error), num(z),
             num(t.variance), num(mc.variance[i].mean), num(mc.variance[i].std_error),
             num(t.bias), num(mc.bias[i].mean), num(mc.bias[i].std_error)};
    } else {
      row = {num(lambdas[i]), num(t.companion.v), num(t.companion.v_prime), num(t.variance),
             num(t.bias), num(t.total)};
      if (with_mc) append_mc(row, mc.variance[i], mc.bias[i], mc.total[i]);
    }
    table.add(std::move(row));
  }

  const std::string stem = compare ? "mc_compare" : "risk_curve";
  OutputSet out(config.output);
  out.write(stem + ".csv", table.render());
  write_metadata(out, stem, config, {stem + ".csv"}, json::object());
  return out.commit();
}

std::vector<fs::path> run_optimal_lambda(const ExperimentConfig& config) {
  const ProblemSpec spec = build_problem(config);
  const auto best = optimal_lambda(spec);
  const auto oracle = oracle_risk_reference(spec);
  Table table({"lambda_star", "variance", "bias", "total", "boundary_derivative",
               "interior_lambda", "interior_total", "oracle_lambda"});
  table.add({num(best.lambda), num(best.risk.variance), num(best.risk.bias), num(best.risk.total),
             best.boundary_derivative ? num(*best.boundary_derivative) : Cell{},
             num(best.interior_lambda), num(best.interior_total),
             oracle.lambda ? num(*oracle.lambda) : Cell{}});
  OutputSet out(config.output);
  out.write("optimal_lambda.csv", table.render());
  write_metadata(out, "optimal_lambda", config, {"optimal_lambda.csv"},
                 json{{"oracle_note", oracle.note}});
  return out.commit();
}

// Sets one sweepable scalar on a copy of the config.
ExperimentConfig with_parameter(const ExperimentConfig& base, const std::string& name, double value) {
  ExperimentConfig config = base;
  ModelConfig& m = config.model;
  const bool two_bulk = m.kind == ModelKind::StrongWeak;
  const bool normalized = m.kind == ModelKind::NormalizedStrongWeak;
  if (name == "gamma") {
    config.gamma = value;
  } else if (name == "sigma2") {
    config.sigma2 = value;
  } else if (name == "r2") {
    config.r2 = value;
  } else if (name == "snr") {
    config.r2 = value * config.sigma2;
  } else if (name == "lambda") {
    config.lambda = value;
    config.lambda_optimal = false;
  } else if (name == "rho1" && two_bulk) {
    m.rho1 = value;
  } else if (name == "rho2" && two_bulk) {
    m.rho2 = value;
  } else if (name == "phi1" && two_bulk) {
    m.phi1 = value;
  } else if (name == "phi2" && two_bulk) {
    m.phi2 = value;
  } else if (name == "psi1" && (two_bulk || normalized)) {
    m.psi1 = value;
  } else if (name == "eigen_share" && normalized) {
    m.eigen_share = value;
  } else if (name == "coef_ratio" && normalized) {
    m.coef_ratio = value;
  } else {
    throw Error(ErrorCode::UnknownParameter,
                "'" + name + "' is not a sweepable parameter for this model");
  }
  return config;
}

double sweep_lambda(const ExperimentConfig& config, const ProblemSpec& spec) {
  if (config.lambda_optimal) return optimal_lambda(spec).lambda;
  if (config.lambda) return *config.lambda;
  return spec.gamma > 1.0 ? 0.0 : 1.0;
}

struct SweepRow {
  double lambda = 0.0;
  RiskBreakdown risk;
  double derivative = std::numeric_limits<double>::quiet_NaN();
  std::vector<McEstimate> mc;  // variance, bias, total
  std::optional<InterpolationOptimality> interpolation;
};

}  // namespace

fs::path sweep(const ExperimentConfig& base, const std::string& parameter,
               const std::vector<double>& values) {
  // Surface unknown names before any work.
  (void)with_parameter(base, parameter, values.empty() ? 1.0 : values.front());

  std::vector<SweepRow> rows(values.size());
  const bool with_mc = base.simulation.replications > 0;
  parallel_for(values.size(), base.threads, [&](std::size_t i) {
    const ExperimentConfig config = with_parameter(base, parameter, values[i]);
    const ProblemSpec spec = build_problem(config);
    SweepRow& row = rows[i];
    row.lambda = sweep_lambda(config, spec);
    row.risk = asymptotic_risk(spec, row.lambda);
    row.derivative = risk_derivative(spec, row.lambda);
    if (with_mc) {
      auto sim = SimConfig::from_spec(spec, config.simulation.d, row.lambda,
                                      config.simulation.replications,
                                      derive_seed(config.simulation.seed, i));
      const double lambda = row.lambda;
      const auto grid = replicate_risk_grid(sim, std::span<const double>(&lambda, 1), 1);
      row.mc = {grid.variance[0], grid.bias[0], grid.total[0]};
    }
    const ModelConfig& m = config.model;
    if (parameter == "snr" && m.kind == ModelKind::StrongWeak && config.gamma == 2.0 &&
        m.psi1 == 0.5 && config.sigma2 > 0.0) {
      row.interpolation = interpolation_optimality(m.rho1, m.rho2, m.phi1, m.phi2, values[i]);
    }
  });

  const bool with_rule = std::all_of(rows.begin(), rows.end(),
                                 [](const SweepRow& r) { return r.interpolation.has_value(); });
  std::vector<std::string> header = {parameter, "lambda", "v", "v_prime", "variance_theory",
                                     "bias_theory", "total_theory", "risk_derivative"};
  if (with_mc) header.insert(header.end(), kMcRiskColumns.begin(), kMcRiskColumns.end());
  if (with_rule) {
    header.push_back("lhs");
    header.push_back("interpolation_optimal");
  }
  Table table(header);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const SweepRow& r = rows[i];
    std::vector<Cell> row = {num(values[i]), num(r.lambda), num(r.risk.companion.v),
                             num(r.risk.companion.v_prime), num(r.risk.variance),
                             num(r.risk.bias), num(r.risk.total), num(r.derivative)};
    if (with_mc) append_mc(row, r.mc[0], r.mc[1], r.mc[2]);
    if (with_rule) {
      row.push_back(num(r.interpolation->lhs));
      row.push_back(flag(r.interpolation->interpolation_optimal));
    }
    table.add(std::move(row));
  }

  const std::string stem = "sweep_" + parameter;
  OutputSet out(base.output);
  const fs::path csv = out.write(stem + ".csv", table.render());
  ExperimentConfig resolved = base;
  resolved.sweep = SweepBlock{parameter, values};
  write_metadata(out, stem, resolved, {stem + ".csv"}, json::object());
  out.commit();
  return csv;
}

namespace {

// ---------------------------------------------------------------------------
// Figures

ProblemSpec normalized_problem(double eigen_share, double coef_ratio, double psi1, double gamma,
                               double sigma2, double r2, StrongWeakParameters* params = nullptr) {
  const auto p = normalized_strong_weak(eigen_share, coef_ratio, psi1);
  if (params) *params = p;
  auto model = strong_weak_model(p.rho1, p.rho2, p.psi1, p.phi1, p.phi2);
  return ProblemSpec::make(std::move(model.spectrum), std::move(model.source), gamma, sigma2, r2);
}

McEstimate mc_total(const ProblemSpec& spec, std::size_t d, double lambda, std::size_t reps,
                    std::uint64_t seed, unsigned threads, McEstimate* variance = nullptr,
                    McEstimate* bias = nullptr) {
  const auto sim = SimConfig::from_spec(spec, d, lambda, reps, seed);
  const auto grid = replicate_risk_grid(sim, std::span<const double>(&lambda, 1), threads);
  if (variance) *variance = grid.variance[0];
  if (bias) *bias = grid.bias[0];
  return grid.total[0];
}

std::vector<fs::path> run_fig1(const ExperimentConfig& config) {
  const FigureBlock& f = config.figure;
  const double psi1 = config.model.psi1;
  const bool with_mc = config.simulation.replications > 0;

  struct Point {
    double share, ratio;
    StrongWeakParameters params;
    OptimalLambda best;
    std::optional<McEstimate> mc;
  };
  std::vector<Point> points;
  for (double ratio : f.coef_ratios)
    for (double share : f.eigen_shares) points.push_back({share, ratio, {}, {}, std::nullopt});

  parallel_for(points.size(), config.threads, [&](std::size_t i) {
    Point& p = points[i];
    const auto spec = normalized_problem(p.share, p.ratio, psi1, config.gamma, config.sigma2,
                                         config.r2, &p.params);
    p.best = optimal_lambda(spec);
    const bool overlay = std::find(f.mc_coef_ratios.begin(), f.mc_coef_ratios.end(), p.ratio) !=
                         f.mc_coef_ratios.end();
    if (with_mc && overlay) {
      p.mc = mc_total(spec, config.simulation.d, p.best.lambda, config.simulation.replications,
                      derive_seed(config.simulation.seed, i), 1);
    }
  });

  std::vector<std::string> risk_header = {"eigen_share", "coef_ratio", "rho1", "rho2", "phi1",
                                          "phi2", "lambda_star", "variance_theory",
                                          "bias_theory", "total_theory"};
  if (with_mc) {
    risk_header.push_back("total_mc");
    risk_header.push_back("total_mc_stderr");
  }
  Table risk(risk_header);
  Table lambda({"eigen_share", "coef_ratio", "lambda_star", "boundary_derivative",
                "interior_lambda", "interior_total"});
  for (const Point& p : points) {
    std::vector<Cell> row = {num(p.share), num(p.ratio), num(p.params.rho1), num(p.params.rho2),
                             num(p.params.phi1), num(p.params.phi2), num(p.best.lambda),
                             num(p.best.risk.variance), num(p.best.risk.bias),
                             num(p.best.risk.total)};
    if (with_mc) {
      row.push_back(p.mc ? num(p.mc->mean) : Cell{});
      row.push_back(p.mc ? num(p.mc->std_error) : Cell{});
    }
    risk.add(std::move(row));
    lambda.add({num(p.share), num(p.ratio), num(p.best.lambda),
                p.best.boundary_derivative ? num(*p.best.boundary_derivative) : Cell{},
                num(p.best.interior_lambda), num(p.best.interior_total)});
  }

  OutputSet out(config.output);
  out.write("fig1_optimal_risk.csv", risk.render());
  out.write("fig1_optimal_lambda.csv", lambda.render());
  write_metadata(out, "fig1", config, {"fig1_optimal_risk.csv", "fig1_optimal_lambda.csv"},
                 json{{"x_axis", "rho1/(rho1+rho2)"},
                      {"normalizations", "rho1 phi1 psi1 + rho2 phi2 psi2 = 1; phi1 psi1 + phi2 psi2 = 1"},
                      {"mc_lambda", "theory-optimal lambda per point"}});
  return out.commit();
}

ProblemSpec noisy_weak_problem(const FigureBlock& f, double inv_psi1, double weak_ratio,
                               double sigma2, double r2) {
  const double psi1 = 1.0 / inv_psi1;
  const double gamma = f.strong_aspect * inv_psi1;
  auto model = strong_weak_model(f.strong_rho, weak_ratio * f.strong_rho, psi1, inv_psi1, 0.0);
  return ProblemSpec::make(std::move(model.spectrum), std::move(model.source), gamma, sigma2, r2);
}

std::vector<fs::path> run_fig2(const ExperimentConfig& config) {
  const FigureBlock& f = config.figure;
  const bool with_mc = config.simulation.replications > 0;
  const std::size_t reps = config.simulation.replications;

  // Left panel: ridgeless risk along the rho2/rho1 path.
  struct PathPoint {
    double inv_psi1, ratio;
    RiskBreakdown risk;
    McEstimate variance, bias, total;
  };
  std::vector<PathPoint> path;
  for (double inv : f.inv_psi1_path)
    for (double ratio : f.weak_ratios) path.push_back({inv, ratio, {}, {}, {}, {}});
  parallel_for(path.size(), config.threads, [&](std::size_t i) {
    PathPoint& p = path[i];
    const auto spec = noisy_weak_problem(f, p.inv_psi1, p.ratio, config.sigma2, config.r2);
    p.risk = asymptotic_risk(spec, 0.0);
    if (with_mc)
      p.total = mc_total(spec, config.simulation.d, 0.0, reps, derive_seed(config.simulation.seed, i),
                         1, &p.variance, &p.bias);
  });

  // Reference: optimally tuned ridge on the strong features alone.
  auto strong = AtomicSpectrum::make({{f.strong_rho, 1.0}});
  auto strong_source = SourceFunction::constant(strong, 1.0);
  const auto reference_spec =
      ProblemSpec::make(strong, strong_source, f.strong_aspect, config.sigma2, config.r2);
  const auto reference = optimal_lambda(reference_spec);

  // Right panel: tuned rho2 for each 1/psi1.
  struct TunedPoint {
    double inv_psi1;
    double ratio = 0.0;
    RiskBreakdown risk;
    McEstimate total;
  };
  std::vector<TunedPoint> tuned;
  for (double inv : f.inv_psi1_tuned) tuned.push_back({inv, 0.0, {}, {}});
  parallel_for(tuned.size(), config.threads, [&](std::size_t i) {
    TunedPoint& p = tuned[i];
    p.ratio = minimize_log(
        [&](double ratio) {
          return asymptotic_risk(noisy_weak_problem(f, p.inv_psi1, ratio, config.sigma2, config.r2), 0.0)
              .total;
        },
        1e-6, 1.0);
    const auto spec = noisy_weak_problem(f, p.inv_psi1, p.ratio, config.sigma2, config.r2);
    p.risk = asymptotic_risk(spec, 0.0);
    if (with_mc)
      p.total = mc_total(spec, f.tuned_d, 0.0, reps, derive_seed(config.simulation.seed, 1000 + i), 1);
  });

  std::vector<std::string> path_header = {"inv_psi1", "gamma", "rho2_over_rho1", "variance_theory",
                                          "bias_theory", "total_theory"};
  if (with_mc) path_header.insert(path_header.end(), kMcRiskColumns.begin(), kMcRiskColumns.end());
  Table left(path_header);
  for (const auto& p : path) {
    std::vector<Cell> row = {num(p.inv_psi1), num(f.strong_aspect * p.inv_psi1), num(p.ratio),
                             num(p.risk.variance), num(p.risk.bias), num(p.risk.total)};
    if (with_mc) append_mc(row, p.variance, p.bias, p.total);
    left.add(std::move(row));
  }

  std::vector<std::string> tuned_header = {"inv_psi1", "gamma", "tuned_rho2_over_rho1",
                                           "total_theory", "reference_total"};
  if (with_mc) {
    tuned_header.push_back("total_mc");
    tuned_header.push_back("total_mc_stderr");
  }
  Table right(tuned_header);
  for (const auto& p : tuned) {
    std::vector<Cell> row = {num(p.inv_psi1), num(f.strong_aspect * p.inv_psi1), num(p.ratio),
                             num(p.risk.total), num(reference.risk.total)};
    if (with_mc) {
      row.push_back(num(p.total.mean));
      row.push_back(num(p.total.std_error));
    }
    right.add(std::move(row));
  }

  Table ref({"gamma", "rho1", "lambda_star", "total"});
  ref.add({num(f.strong_aspect), num(f.strong_rho), num(reference.lambda), num(reference.risk.total)});

  OutputSet out(config.output);
  out.write("fig2_ridgeless_vs_ratio.csv", left.render());
  out.write("fig2_tuned_weak_features.csv", right.render());
  out.write("fig2_reference.csv", ref.render());
  write_metadata(out, "fig2", config,
                 {"fig2_ridgeless_vs_ratio.csv", "fig2_tuned_weak_features.csv", "fig2_reference.csv"},
                 json{{"phi", "phi1 = 1/psi1, phi2 = 0"},
                      {"gamma", "strong_aspect / psi1"},
                      {"tuning", "golden section over log(rho2/rho1) in [1e-6, 1]"},
                      {"tuned_d", f.tuned_d}});
  return out.commit();
}

std::vector<fs::path> run_fig3(const ExperimentConfig& config) {
  const FigureBlock& f = config.figure;
  const bool with_mc = config.simulation.replications > 0;
  const double psi1 = config.model.psi1;

  struct Point {
    double eigen_ratio, coef_ratio, gamma;
    RiskBreakdown risk;
    McEstimate variance, bias, total;
  };
  std::vector<Point> points;
  for (std::size_t c = 0; c < f.eigen_ratios.size(); ++c)
    for (double gamma : f.gammas) points.push_back({f.eigen_ratios[c], f.coef_ratios[c], gamma, {}, {}, {}, {}});

  parallel_for(points.size(), config.threads, [&](std::size_t i) {
    Point& p = points[i];
    const double share = p.eigen_ratio / (1.0 + p.eigen_ratio);
    const auto spec = normalized_problem(share, p.coef_ratio, psi1, p.gamma, config.sigma2, config.r2);
    p.risk = asymptotic_risk(spec, 0.0);
    if (with_mc)
      p.total = mc_total(spec, config.simulation.d, 0.0, config.simulation.replications,
                         derive_seed(config.simulation.seed, i), 1, &p.variance, &p.bias);
  });

  std::vector<std::string> header = {"eigen_ratio", "coef_ratio", "gamma", "variance_theory",
                                     "bias_theory", "total_theory"};
  if (with_mc) header.insert(header.end(), kMcRiskColumns.begin(), kMcRiskColumns.end());
  Table table(header);
  for (const auto& p : points) {
    std::vector<Cell> row = {num(p.eigen_ratio), num(p.coef_ratio), num(p.gamma),
                             num(p.risk.variance), num(p.risk.bias), num(p.risk.total)};
    if (with_mc) append_mc(row, p.variance, p.bias, p.total);
    table.add(std::move(row));
  }
  OutputSet out(config.output);
  out.write("fig3_ridgeless_bias_variance.csv", table.render());
  write_metadata(out, "fig3", config, {"fig3_ridgeless_bias_variance.csv"},
                 json{{"interpolation_peak_gamma", 1.0 / psi1},
                      {"normalizations", "rho1 phi1 psi1 + rho2 phi2 psi2 = 1; phi1 psi1 + phi2 psi2 = 1"}});
  return out.commit();
}

}  // namespace

std::vector<fs::path> run_experiment(const ExperimentConfig& config) {
  validate_config(config);
  switch (config.mode) {
    case Mode::RiskCurve: return run_risk_curve(config, false);
    case Mode::McCompare: return run_risk_curve(config, true);
    case Mode::OptimalLambda: return run_optimal_lambda(config);
    case Mode::Sweep: {
      const fs::path csv = sweep(config, config.sweep->parameter, config.sweep->values);
      return {csv, csv.parent_path() / ("sweep_" + config.sweep->parameter + ".meta.json")};
    }
    case Mode::Figure:
      if (config.preset == "fig1") return run_fig1(config);
      if (config.preset == "fig2") return run_fig2(config);
      return run_fig3(config);
  }
  throw Error(ErrorCode::ValueError, "unknown mode");
}

}  // namespace ridgerisk
