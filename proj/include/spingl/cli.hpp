#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace spingl {

struct CliOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out_dir;
};

std::vector<std::string> known_commands();

/// Parses the experiment config and executes its commands in declaration
/// order, writing results.csv, manifest.json and summary.txt to the output
/// directory. Exit codes: 0 success, 1 a required check failed, 2 config
/// error, 3 numerical abort.
int run_experiment(const std::filesystem::path& config_file, const CliOverrides& overrides,
                   std::ostream& log);

}  // namespace spingl
