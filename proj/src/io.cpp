#include "spingl/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace spingl {

namespace {

[[noreturn]] void fail(const std::string& origin, const std::string& where,
                       const std::string& what) {
  throw ConfigError(origin + ": " + where + ": " + what);
}

const nlohmann::json& require(const nlohmann::json& j, const char* key,
                              const std::string& origin, const std::string& where) {
  if (!j.contains(key)) fail(origin, where, std::string("missing field '") + key + "'");
  return j.at(key);
}

}  // namespace

SymMatrix parse_matrix(const nlohmann::json& j, int dim, const std::string& where) {
  if (!j.is_array() || static_cast<int>(j.size()) != dim) {
    throw ConfigError(where + ": expected " + std::to_string(dim) + " rows");
  }
  Eigen::MatrixXd m(dim, dim);
  for (int i = 0; i < dim; ++i) {
    const auto& row = j.at(i);
    if (!row.is_array() || static_cast<int>(row.size()) != dim) {
      throw ConfigError(where + "/" + std::to_string(i) + ": expected " + std::to_string(dim) +
                        " columns");
    }
    for (int k = 0; k < dim; ++k) {
      if (!row.at(k).is_number()) {
        throw ConfigError(where + "/" + std::to_string(i) + "/" + std::to_string(k) +
                          ": expected a number");
      }
      m(i, k) = row.at(k).get<double>();
    }
  }
  const Eigen::MatrixXd asym = m - m.transpose();
  if (asym.cwiseAbs().maxCoeff() > 1e-9) {
    throw ConfigError(where + ": matrix is not symmetric");
  }
  return SymMatrix(m);
}

nlohmann::json matrix_to_json(const SymMatrix& a) {
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < a.dim(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int j = 0; j < a.dim(); ++j) row.push_back(a(i, j));
    rows.push_back(row);
  }
  return rows;
}

ModelFile parse_model(const nlohmann::json& j, const std::string& origin) {
  const int dim = require(j, "dim", origin, "").get<int>();
  if (dim < 1) fail(origin, "/dim", "must be positive");

  std::vector<XiTerm> terms;
  const auto& jterms = require(j, "terms", origin, "");
  for (std::size_t t = 0; t < jterms.size(); ++t) {
    const std::string where = "/terms/" + std::to_string(t);
    const auto& jt = jterms.at(t);
    const int p = require(jt, "p", origin, where).get<int>();
    SymMatrix coeff = parse_matrix(require(jt, "A", origin, where), dim, origin + where + "/A");
    terms.push_back(XiTerm{p, std::move(coeff)});
  }

  std::vector<SpinAtom> atoms;
  const auto& jm = require(j, "spin_measure", origin, "");
  const auto& jatoms = require(jm, "atoms", origin, "/spin_measure");
  for (std::size_t a = 0; a < jatoms.size(); ++a) {
    const std::string where = "/spin_measure/atoms/" + std::to_string(a);
    const auto& ja = jatoms.at(a);
    const auto& jtau = require(ja, "tau", origin, where);
    if (!jtau.is_array() || static_cast<int>(jtau.size()) != dim) {
      fail(origin, where + "/tau", "expected " + std::to_string(dim) + " entries");
    }
    Eigen::VectorXd tau(dim);
    for (int i = 0; i < dim; ++i) tau[i] = jtau.at(i).get<double>();
    const double w = require(ja, "weight", origin, where).get<double>();
    atoms.push_back(SpinAtom{std::move(tau), w});
  }

  try {
    return ModelFile{ModelXi(dim, std::move(terms)), SpinMeasure(dim, std::move(atoms))};
  } catch (const std::exception& e) {
    throw ConfigError(origin + ": " + e.what());
  }
}

nlohmann::json load_json_file(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError(file.string() + ": cannot open");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(file.string() + ": " + e.what());
  }
}

ModelFile load_model(const std::filesystem::path& file) {
  return parse_model(load_json_file(file), file.string());
}

ParisiPath parse_path(const nlohmann::json& j, const std::string& origin) {
  const int dim = require(j, "dim", origin, "").get<int>();
  const auto& jb = require(j, "breakpoints", origin, "");
  const auto& jv = require(j, "values", origin, "");
  std::vector<double> breaks;
  for (const auto& b : jb) breaks.push_back(b.get<double>());
  std::vector<SymMatrix> values;
  for (std::size_t l = 0; l < jv.size(); ++l) {
    values.push_back(parse_matrix(jv.at(l), dim, origin + "/values/" + std::to_string(l)));
  }
  try {
    return ParisiPath(std::move(breaks), std::move(values));
  } catch (const std::exception& e) {
    throw ConfigError(origin + ": " + e.what());
  }
}

ParisiPath load_path(const std::filesystem::path& file) {
  return parse_path(load_json_file(file), file.string());
}

nlohmann::json path_to_json(const ParisiPath& path) {
  nlohmann::json j;
  j["dim"] = path.dim();
  j["breakpoints"] = path.breakpoints();
  nlohmann::json values = nlohmann::json::array();
  for (int l = 1; l <= path.levels(); ++l) values.push_back(matrix_to_json(path.value(l)));
  j["values"] = values;
  return j;
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw NumericalError("format_double failed");
  return std::string(buf, ptr);
}

void CsvWriter::add(const std::string& command, const std::string& quantity,
                    const std::string& params, double mean, double std_err, long reps,
                    std::uint64_t seed) {
  std::ostringstream row;
  row << command << ',' << quantity << ',' << params << ',' << format_double(mean) << ','
      << format_double(std_err) << ',' << reps << ',' << seed;
  rows_.push_back(row.str());
}

std::string CsvWriter::render() const {
  std::string out = "command,quantity,params,mean,stderr,reps,seed\n";
  for (const std::string& r : rows_) {
    out += r;
    out += '\n';
  }
  return out;
}

void CsvWriter::write(const std::filesystem::path& file) const {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw ConfigError(file.string() + ": cannot write");
  out << render();
}

}  // namespace spingl
