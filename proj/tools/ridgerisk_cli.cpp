// Command-line front end. Talks to the library only through the C API.
//
// Exit codes: 0 success, 1 bad configuration or input, 2 numerical failure.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "ridgerisk/ridgerisk.h"

namespace {

struct Options {
  std::string config_path;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  bool theory_only = false;
  std::string figure;
};

int exit_code(rr_status status) {
  if (status == RR_OK) return 0;
  return rr_status_is_numerical(status) ? 2 : 1;
}

int report(rr_status status) {
  std::fprintf(stderr, "ridgerisk: %s: %s\n", rr_status_name(status), rr_last_error_message());
  return exit_code(status);
}

bool read_file(const std::string& path, std::string& text) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  std::ostringstream buffer;
  buffer << in.rdbuf();
  text = buffer.str();
  return true;
}

int run(const std::string& mode, const Options& opt) {
  rr_experiment* experiment = nullptr;
  rr_status status;
  if (mode == "figure") {
    std::string text = "{}";
    if (!opt.config_path.empty() && !read_file(opt.config_path, text)) {
      std::fprintf(stderr, "ridgerisk: cannot read %s\n", opt.config_path.c_str());
      return 1;
    }
    status = rr_experiment_parse_preset(opt.figure.c_str(), text.c_str(), &experiment);
  } else {
    if (opt.config_path.empty()) {
      std::fprintf(stderr, "ridgerisk: %s needs --config\n", mode.c_str());
      return 1;
    }
    std::string text;
    if (!read_file(opt.config_path, text)) {
      std::fprintf(stderr, "ridgerisk: cannot read %s\n", opt.config_path.c_str());
      return 1;
    }
    status = rr_experiment_parse(text.c_str(), &experiment);
  }
  if (status != RR_OK) return report(status);

  status = rr_experiment_set_mode(experiment, mode.c_str());
  if (status == RR_OK && opt.seed) status = rr_experiment_set_seed(experiment, *opt.seed);
  if (status == RR_OK && opt.threads) status = rr_experiment_set_threads(experiment, *opt.threads);
  if (status == RR_OK && !opt.out.empty()) status = rr_experiment_set_output(experiment, opt.out.c_str());
  if (status == RR_OK && opt.theory_only) status = rr_experiment_set_theory_only(experiment);
  if (status == RR_OK) status = rr_experiment_run(experiment);
  if (status != RR_OK) {
    const int code = report(status);
    rr_experiment_free(experiment);
    return code;
  }

  size_t count = 0;
  rr_experiment_output_count(experiment, &count);
  for (size_t i = 0; i < count; ++i) {
    const char* path = nullptr;
    if (rr_experiment_output_path(experiment, i, &path) == RR_OK) std::printf("%s\n", path);
  }
  rr_experiment_free(experiment);
  return 0;
}

void add_common(CLI::App* cmd, Options& opt, bool config_required) {
  auto* config = cmd->add_option("--config", opt.config_path, "JSON configuration file");
  if (config_required) config->required();
  cmd->add_option("--out", opt.out, "Output directory (overrides the config)");
  cmd->add_option("--seed", opt.seed, "Base RNG seed");
  cmd->add_option("--threads", opt.threads, "Worker threads (0 = hardware concurrency)");
  cmd->add_flag("--theory-only", opt.theory_only, "Skip all simulation");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Asymptotic ridge regression risk under source conditions"};
  app.set_version_flag("--version", std::string(rr_version()));
  app.require_subcommand(1);

  Options opt;
  auto* risk_curve = app.add_subcommand("risk-curve", "Theoretical (and simulated) risk over a lambda grid");
  add_common(risk_curve, opt, true);
  auto* optimal = app.add_subcommand("optimal-lambda", "Risk-minimizing lambda");
  add_common(optimal, opt, true);
  auto* compare = app.add_subcommand("mc-compare", "Simulation versus theory with z-scores");
  add_common(compare, opt, true);
  auto* sweep = app.add_subcommand("sweep", "Risk along one swept parameter");
  add_common(sweep, opt, true);
  auto* figure = app.add_subcommand("figure", "Regenerate a figure's data series");
  figure->add_option("name", opt.figure, "fig1, fig2 or fig3")
      ->required()
      ->check(CLI::IsMember({"fig1", "fig2", "fig3"}));
  add_common(figure, opt, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  for (auto* cmd : {risk_curve, optimal, compare, sweep, figure}) {
    if (cmd->parsed()) return run(cmd->get_name(), opt);
  }
  return 1;
}
