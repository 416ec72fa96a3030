#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "ridgerisk/error.hpp"
#include "ridgerisk/experiment.hpp"
#include "ridgerisk/risk.hpp"

using namespace ridgerisk;
namespace fs = std::filesystem;

namespace {

ErrorCode parse_error(const std::string& text, std::string* message = nullptr) {
  try {
    parse_config(text);
  } catch (const Error& e) {
    if (message) *message = e.what();
    return e.code();
  }
  return static_cast<ErrorCode>(-1);
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("ridgerisk_test_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(slurp(path));
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(cells);
  }
  return rows;
}

}  // namespace

TEST_CASE("minimal config gets defaults") {
  const auto c = parse_config(R"({"mode": "risk-curve", "model": {"type": "atoms", "atoms": [[1, 1]]}})");
  CHECK(c.mode == Mode::RiskCurve);
  CHECK(c.simulation.seed == 0);
  CHECK(c.simulation.replications == 0);
  CHECK(c.lambda_grid.log_scale);
  CHECK(c.gamma == 2.0);
}

TEST_CASE("presets expand to the figure setups") {
  const auto c = parse_config(R"({"preset": "fig1"})");
  CHECK(c.mode == Mode::Figure);
  CHECK(c.sigma2 == 0.05);
  CHECK(c.gamma == 3.5);
  CHECK(c.model.psi1 == 0.5);
  CHECK(c.simulation.d == 1024);
  CHECK(c.simulation.replications == 40);
  CHECK(c.figure.eigen_shares.size() == 15);

  const auto f3 = preset_config("fig3");
  CHECK(f3.model.psi1 == 0.35);
  CHECK(f3.simulation.d == 256);
  CHECK(f3.simulation.replications == 20);

  // Other keys override preset fields.
  const auto o = parse_config(R"({"preset": "fig1", "simulation": {"replications": 3}})");
  CHECK(o.simulation.replications == 3);
  CHECK(o.simulation.d == 1024);
  CHECK(parse_error(R"({"preset": "fig9"})") == ErrorCode::ValueError);
}

TEST_CASE("schema errors carry the field path") {
  std::string msg;
  CHECK(parse_error(R"({"gama": 2})", &msg) == ErrorCode::SchemaError);
  CHECK(msg.find("gama") != std::string::npos);
  CHECK(parse_error(R"({"simulation": {"seeds": 1}})", &msg) == ErrorCode::SchemaError);
  CHECK(msg.find("simulation.seeds") != std::string::npos);
  CHECK(parse_error(R"({"gamma": "two"})", &msg) == ErrorCode::SchemaError);
  CHECK(msg.find("gamma") != std::string::npos);
  CHECK(parse_error(R"({"model": {"type": "atoms", "atoms": [[1]]}})") == ErrorCode::SchemaError);
  CHECK(parse_error("{not json") == ErrorCode::SchemaError);
}

TEST_CASE("value errors name the offending value") {
  std::string msg;
  CHECK(parse_error(R"({"gamma": -1})", &msg) == ErrorCode::ValueError);
  CHECK(msg.find("-1") != std::string::npos);
  CHECK(parse_error(R"({"lambda_grid": {"min": 0, "scale": "log"}})") == ErrorCode::ValueError);
  CHECK(parse_error(R"({"lambda_grid": {"scale": "cubic"}})") == ErrorCode::ValueError);
  CHECK(parse_error(R"({"mode": "mc-compare"})") == ErrorCode::ValueError);
  CHECK(parse_error(R"({"mode": "sweep"})") == ErrorCode::SchemaError);
  CHECK(parse_error(R"({"model": {"type": "atoms", "atoms": [[1, 0.5]]}})") == ErrorCode::ValueError);
  CHECK(parse_error(R"({"gamma": 0.5, "lambda": 0})") == ErrorCode::ValueError);
  CHECK(parse_error(R"({"model": {"type": "strong_weak", "rho1": 1, "rho2": 2}})") == ErrorCode::ValueError);
}

TEST_CASE("sweep block forms") {
  const auto a = parse_config(R"({"mode": "sweep", "sweep": {"parameter": "gamma", "values": [0.5, 2]}})");
  REQUIRE(a.sweep.has_value());
  CHECK(a.sweep->values.size() == 2);
  const auto b = parse_config(
      R"({"mode": "sweep", "sweep": {"parameter": "gamma", "min": 1, "max": 100, "count": 3, "scale": "log"}})");
  REQUIRE(b.sweep->values.size() == 3);
  CHECK(b.sweep->values[1] == doctest::Approx(10.0));
}

TEST_CASE("config round-trips through JSON") {
  const auto a = parse_config(R"({"mode": "risk-curve", "model": {"type": "strong_weak", "rho1": 4,
      "rho2": 1, "psi1": 0.5, "phi1": 2, "phi2": 0}, "gamma": 2, "lambda": "optimal",
      "simulation": {"d": 64, "replications": 2, "seed": 18446744073709551615}})");
  const auto b = parse_config(config_to_json(a));
  CHECK(b.model.kind == ModelKind::StrongWeak);
  CHECK(b.model.phi1 == 2.0);
  CHECK(b.lambda_optimal);
  CHECK(b.simulation.seed == 18446744073709551615ULL);
  CHECK(config_to_json(a) == config_to_json(b));
}

TEST_CASE("risk curve CSV") {
  const auto out = scratch("curve");
  auto c = parse_config(R"({"mode": "risk-curve", "model": {"type": "atoms", "atoms": [[2, 0.5], [0.5, 0.5]],
      "source": {"type": "power", "alpha": 1}}, "lambda_grid": {"min": 0.1, "max": 10, "count": 5}})");
  c.output = out.string();
  const auto files = run_experiment(c);
  REQUIRE(files.size() == 2);
  CHECK(fs::exists(out / "risk_curve.meta.json"));
  const auto rows = read_csv(out / "risk_curve.csv");
  REQUIRE(rows.size() == 6);
  CHECK(rows[0] == std::vector<std::string>{"lambda", "v", "v_prime", "variance_theory", "bias_theory",
                                            "total_theory"});
  const auto spec = build_problem(c);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const double lambda = std::stod(rows[i][0]);
    CHECK(std::stod(rows[i][5]) == asymptotic_risk(spec, lambda).total);  // 17 digits round-trip
  }
  CHECK(std::stod(rows[1][0]) == 0.1);
  CHECK(std::stod(rows[5][0]) == 10.0);

  const auto meta = nlohmann::json::parse(slurp(out / "risk_curve.meta.json"));
  CHECK(meta["seed"] == 0);
  CHECK(meta.contains("generated_at"));
  CHECK(meta["config"]["mode"] == "risk-curve");
  fs::remove_all(out);
}

TEST_CASE("simulation columns and determinism") {
  const auto out1 = scratch("mc1");
  const auto out2 = scratch("mc2");
  auto c = parse_config(R"({"mode": "mc-compare", "gamma": 2, "lambda_grid": {"min": 0.5, "max": 2, "count": 3},
      "simulation": {"d": 32, "replications": 4, "seed": 5}})");
  c.output = out1.string();
  run_experiment(c);
  c.output = out2.string();
  c.threads = 3;
  run_experiment(c);
  CHECK(slurp(out1 / "mc_compare.csv") == slurp(out2 / "mc_compare.csv"));
  const auto rows = read_csv(out1 / "mc_compare.csv");
  CHECK(rows[0][4] == "z_score");
  CHECK(rows.size() == 4);
  fs::remove_all(out1);
  fs::remove_all(out2);
}

TEST_CASE("optimal lambda CSV") {
  const auto out = scratch("opt");
  auto c = parse_config(R"({"mode": "optimal-lambda", "gamma": 2, "sigma2": 0.5, "r2": 2})");
  c.output = out.string();
  run_experiment(c);
  const auto rows = read_csv(out / "optimal_lambda.csv");
  REQUIRE(rows.size() == 2);
  CHECK(rows[0][0] == "lambda_star");
  CHECK(std::stod(rows[1][0]) == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(std::stod(rows[1][7]) == doctest::Approx(0.5));  // oracle lambda
  fs::remove_all(out);
}

TEST_CASE("sweep writes one row per value in order") {
  const auto out = scratch("sweep");
  auto c = parse_config(R"({"mode": "sweep", "model": {"type": "strong_weak", "rho1": 4, "rho2": 1,
      "psi1": 0.5, "phi1": 2, "phi2": 0}, "gamma": 2, "lambda": 0,
      "sweep": {"parameter": "snr", "values": [7, 1, 6]}})");
  c.output = out.string();
  c.threads = 2;
  const auto files = run_experiment(c);
  CHECK(files.size() == 2);
  const auto rows = read_csv(out / "sweep_snr.csv");
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].back() == "interpolation_optimal");
  CHECK(std::stod(rows[1][0]) == 7.0);
  CHECK(rows[1].back() == "true");
  CHECK(rows[3].back() == "false");
  // Derivative column agrees in sign.
  CHECK(std::stod(rows[1][7]) > 0.0);
  CHECK(std::stod(rows[3][7]) < 0.0);
  fs::remove_all(out);
}

TEST_CASE("unknown sweep parameter") {
  auto c = parse_config(R"({"mode": "sweep", "sweep": {"parameter": "rho1", "values": [1]}})");
  c.output = scratch("unknown").string();
  try {
    run_experiment(c);
    FAIL("expected UnknownParameter");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnknownParameter);
  }
}

TEST_CASE("failed runs leave no files behind") {
  const auto out = scratch("fail");
  // gamma = 0.5 with lambda = 0 fails at the second sweep point.
  auto c = parse_config(R"({"mode": "sweep", "gamma": 2, "lambda": 0,
      "sweep": {"parameter": "gamma", "values": [2, 0.5]}})");
  c.output = out.string();
  CHECK_THROWS_AS(run_experiment(c), Error);
  CHECK((!fs::exists(out) || fs::is_empty(out)));
  fs::remove_all(out);
}

TEST_CASE("unwritable output directory is an IoError") {
  const auto blocker = fs::temp_directory_path() / "ridgerisk_test_blocker";
  fs::remove_all(blocker);
  std::ofstream(blocker) << "x";
  auto c = parse_config(R"({"mode": "risk-curve"})");
  c.output = (blocker / "sub").string();
  try {
    run_experiment(c);
    FAIL("expected IoError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::IoError);
  }
  fs::remove(blocker);
}

TEST_CASE("figure presets run theory-only") {
  for (const char* name : {"fig1", "fig2", "fig3"}) {
    const auto out = scratch(name);
    auto c = preset_config(name);
    c.simulation.replications = 0;
    c.output = out.string();
    const auto files = run_experiment(c);
    CHECK(files.size() >= 2);
    for (const auto& f : files) CHECK(fs::exists(f));
    fs::remove_all(out);
  }
}

TEST_CASE("format_double round-trips") {
  for (double x : {0.1, 1.0 / 3.0, 1e-300, 123456789.123456789}) CHECK(std::stod(format_double(x)) == x);
  CHECK(format_double(std::numeric_limits<double>::quiet_NaN()) == "nan");
}
