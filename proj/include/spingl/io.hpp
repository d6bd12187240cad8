#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "spingl/model.hpp"
#include "spingl/path.hpp"

namespace spingl {

/// Model description file: covariance terms plus the single-spin measure.
struct ModelFile {
  ModelXi xi;
  SpinMeasure measure;
};

ModelFile parse_model(const nlohmann::json& j, const std::string& origin);
ModelFile load_model(const std::filesystem::path& file);

ParisiPath parse_path(const nlohmann::json& j, const std::string& origin);
ParisiPath load_path(const std::filesystem::path& file);
nlohmann::json path_to_json(const ParisiPath& path);

SymMatrix parse_matrix(const nlohmann::json& j, int dim, const std::string& where);
nlohmann::json matrix_to_json(const SymMatrix& a);

/// Shortest round-trip decimal representation, locale independent.
std::string format_double(double v);

/// Fixed-schema results table: command, quantity, params, mean, stderr,
/// reps, seed. Byte-identical output for identical inputs.
class CsvWriter {
 public:
  void add(const std::string& command, const std::string& quantity, const std::string& params,
           double mean, double std_err, long reps, std::uint64_t seed);
  std::string render() const;
  void write(const std::filesystem::path& file) const;
  int rows() const { return static_cast<int>(rows_.size()); }

 private:
  std::vector<std::string> rows_;
};

nlohmann::json load_json_file(const std::filesystem::path& file);

}  // namespace spingl
