#include <cstdint>
#include <iostream>

#include <CLI11.hpp>

#include "spingl/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Free-energy toolkit for mean-field vector spin glasses"};
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  bool list = false;
  bool have_seed = false;

  app.add_option("--config", config, "experiment config (JSON)");
  auto* seed_opt = app.add_option("--seed", seed, "override the master seed");
  app.add_option("--out", out, "override the output directory");
  app.add_flag("--list-commands", list, "print the known command types and exit");
  CLI11_PARSE(app, argc, argv);
  have_seed = seed_opt->count() > 0;

  if (list) {
    for (const std::string& c : spingl::known_commands()) std::cout << c << "\n";
    return 0;
  }
  if (config.empty()) {
    std::cerr << "error: --config is required (or use --list-commands)\n";
    return 2;
  }

  spingl::CliOverrides overrides;
  if (have_seed) overrides.seed = seed;
  if (!out.empty()) overrides.out_dir = out;
  return spingl::run_experiment(config, overrides, std::cout);
}
