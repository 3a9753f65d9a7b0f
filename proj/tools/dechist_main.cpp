#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>
#include <Eigen/Core>

#include "dechist/experiments.hpp"
#include "dechist/io.hpp"

namespace ex = dechist::experiments;

namespace {

int do_run(const std::string& config_path, bool seed_set, std::uint64_t seed,
           const std::string& out_flag, int threads) {
  ex::ExperimentConfig config = ex::load_config_file(config_path);
  if (seed_set) {
    config.seed = seed;
    config.has_seed = true;
  }
  if (!out_flag.empty()) {
    config.output_dir = out_flag;
  } else if (config.output_dir.empty()) {
    const char* env = std::getenv("DECHIST_OUT");
    config.output_dir = env ? env : ".";
  }
  Eigen::setNbThreads(threads);

  ex::AcceptanceReport report = ex::run(config);
  std::cout << report.version << "  experiment=" << report.experiment
            << "  config_hash=" << report.config_hash
            << "  threads=" << threads << "\n";
  for (const auto& row : report.rows)
    std::cout << "  [" << (row.pass ? "PASS" : "FAIL") << "] " << row.name
              << "  measured=" << dechist::io::format_double(row.measured)
              << "  expected=" << dechist::io::format_double(row.expected)
              << "  tolerance=" << dechist::io::format_double(row.tolerance)
              << "\n";
  std::cout << "overall: " << (report.pass ? "PASS" : "FAIL")
            << "  (artifacts in " << config.output_dir << ")\n";
  return report.pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dechist: coarse-grained density decoherence experiments"};
  app.set_version_flag("--version", ex::version_string());
  app.require_subcommand(1);

  std::string config_path, out_flag;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = 1;
  bool as_json = false;

  CLI::App* run_cmd = app.add_subcommand("run", "Run an experiment config");
  run_cmd->add_option("config", config_path, "JSON config file")->required();
  run_cmd->add_option("--seed", seed, "Override the config seed")
      ->each([&](const std::string&) { seed_set = true; });
  run_cmd->add_option("--out", out_flag,
                      "Output directory (overrides config and DECHIST_OUT)");
  run_cmd->add_option("--threads", threads, "Worker threads for linear algebra")
      ->check(CLI::PositiveNumber);

  CLI::App* list_cmd = app.add_subcommand("list", "List experiment kinds");
  list_cmd->add_flag("--json", as_json, "Emit the catalog as JSON");

  CLI::App* validate_cmd =
      app.add_subcommand("validate", "Validate a config without running it");
  validate_cmd->add_option("config", config_path, "JSON config file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) return do_run(config_path, seed_set, seed, out_flag, threads);
    if (list_cmd->parsed()) {
      if (as_json)
        std::cout << ex::catalog_json().dump(2) << "\n";
      else
        std::cout << ex::catalog_text();
      return 0;
    }
    if (validate_cmd->parsed()) {
      ex::ExperimentConfig config = ex::load_config_file(config_path);
      std::cout << "OK " << config.kind << "\n";
      return 0;
    }
  } catch (const ex::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
