#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "biloop/config.hpp"
#include "biloop/experiment.hpp"
#include "biloop/verify.hpp"

namespace {

int do_run(const std::string& config_path, bool timing) {
  biloop::harness::ExperimentConfig config = biloop::harness::load_config_file(config_path);
  if (timing) config.timing = true;
  const biloop::harness::ExperimentResult result = biloop::harness::run_experiment(config);
  std::cout << biloop::harness::render_summary_table({result.summary});
  if (!config.output_path.empty()) {
    std::cout << "trace: " << config.output_path << '\n';
  }
  return 0;
}

int do_sweep(const std::string& config_path, const std::string& axis_name,
             const std::string& values_csv, std::size_t threads) {
  const biloop::harness::ExperimentConfig base =
      biloop::harness::load_config_file(config_path);
  const biloop::harness::SweepAxis axis = biloop::harness::parse_sweep_axis(axis_name);

  std::vector<std::string> values;
  std::string token;
  std::istringstream stream(values_csv);
  while (std::getline(stream, token, ',')) {
    if (!token.empty()) values.push_back(token);
  }

  const auto rows = biloop::harness::sweep(base, axis, values, threads);
  std::cout << biloop::harness::render_summary_table(rows);
  for (const auto& row : rows) {
    if (!row.error.empty()) return 1;
  }
  return 0;
}

int do_verify(const std::string& filter) {
  const auto results = biloop::verify::run_verification(filter);
  std::cout << biloop::verify::render_report(results);
  return biloop::verify::all_passed(results) ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"biloop: AID/ITD bilevel-optimization experiment runner"};
  app.require_subcommand(1);

  std::string config_path;
  bool timing = false;
  CLI::App* run = app.add_subcommand("run", "execute one configured experiment");
  run->add_option("--config", config_path, "path to a key-value config file")->required();
  run->add_flag("--timing", timing, "fill the wall_ms CSV column (breaks byte determinism)");

  std::string sweep_config, axis, values;
  std::size_t threads = 0;
  CLI::App* sweep = app.add_subcommand("sweep", "run one experiment per axis value");
  sweep->add_option("--config", sweep_config, "base config file")->required();
  sweep->add_option("--axis", axis, "N, Q or scheme")->required();
  sweep->add_option("--values", values, "comma-separated axis values")->required();
  sweep->add_option("--threads", threads, "parallel run cap (0 = hardware)");

  std::string filter;
  CLI::App* verify = app.add_subcommand("verify", "run the built-in verification suite");
  verify->add_option("--filter", filter, "only criteria whose name contains this");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return do_run(config_path, timing);
    if (sweep->parsed()) return do_sweep(sweep_config, axis, values, threads);
    if (verify->parsed()) return do_verify(filter);
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 2;
  }
  return 0;
}
