#include <CLI11.hpp>
#include <cstdint>
#include <iostream>
#include <string>

#include "svie/svie.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Experiment runner for fBm-driven stochastic Volterra equations"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_override;
  int workers = 1;
  std::uint64_t seed_override = 0;
  bool has_seed = false;

  auto* run = app.add_subcommand("run", "execute an experiment config");
  run->add_option("config", config_path, "config file")->required();
  run->add_option("--out", out_override, "output directory (overrides config)");
  run->add_option("--workers", workers, "worker thread count")
      ->check(CLI::PositiveNumber);
  run->add_option("--seed", seed_override, "seed (overrides config)")
      ->each([&](const std::string&) { has_seed = true; });

  auto* validate = app.add_subcommand("validate", "check a config file");
  validate->add_option("config", config_path, "config file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    svie::ExperimentConfig cfg = svie::load_config(config_path);
    if (app.got_subcommand(validate)) {
      std::cout << "OK " << svie::detail::hex64(cfg.hash()) << "\n";
      return 0;
    }
    if (!out_override.empty()) cfg.out_dir = out_override;
    if (has_seed) cfg.seed = seed_override;
    cfg.workers = workers;
    const svie::RunManifest manifest = svie::run_experiment(cfg);
    std::cout << "wrote " << cfg.out_dir << " (config " << manifest.config_hash
              << (manifest.complete ? ", complete" : ", INCOMPLETE") << ")\n";
    return manifest.complete ? 0 : 2;
  } catch (const svie::config_error& e) {
    std::cerr << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
