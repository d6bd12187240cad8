#include "spingl/cli.hpp"

#include <chrono>
#include <optional>
#include <fstream>

#include <json.hpp>

#include "spingl/io.hpp"
#include "spingl/optimize.hpp"
#include "spingl/simulate.hpp"

namespace spingl {

namespace {

using nlohmann::json;

struct RunContext {
  std::filesystem::path config_dir;
  std::filesystem::path out_dir;
  std::optional<ModelFile> model;
  std::uint64_t master_seed = 0;
  CsvWriter csv;
  json resolved = json::array();
  std::vector<std::string> summary;
  std::vector<std::string> artifacts;
  bool check_failed = false;
};

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  return j.at(key).get<T>();
}

QuadratureSpec quad_from(const json& cmd, int dim, std::uint64_t seed) {
  if (cmd.contains("mc_samples")) {
    return QuadratureSpec::mc(cmd.at("mc_samples").get<int>(), seed);
  }
  if (cmd.contains("nodes")) return QuadratureSpec::gh(cmd.at("nodes").get<int>());
  return QuadratureSpec::default_for(dim, seed);
}

SymMatrix tilt_from(const json& cmd, int dim) {
  if (!cmd.contains("tilt")) return SymMatrix::zero(dim);
  return parse_matrix(cmd.at("tilt"), dim, "tilt");
}

std::filesystem::path resolve(const RunContext& ctx, const std::string& file) {
  const std::filesystem::path p(file);
  return p.is_absolute() ? p : ctx.config_dir / p;
}

ParisiPath path_argument(RunContext& ctx, const json& cmd) {
  if (cmd.contains("path")) return load_path(resolve(ctx, cmd.at("path").get<std::string>()));
  if (cmd.contains("q")) {
    return ParisiPath::constant(parse_matrix(cmd.at("q"), ctx.model->xi.dim(), "q"));
  }
  throw ConfigError("command needs either 'path' (file) or 'q' (matrix)");
}

void note(RunContext& ctx, const std::string& line) { ctx.summary.push_back(line); }

void cmd_parisi_eval(RunContext& ctx, const json& cmd, std::uint64_t seed) {
  const ParisiPath path = path_argument(ctx, cmd);
  const QuadratureSpec quad = quad_from(cmd, ctx.model->xi.dim(), seed);
  const SymMatrix tilt = tilt_from(cmd, ctx.model->xi.dim());
  const double rec = rsb_recursion(ctx.model->xi, ctx.model->measure, path, tilt, quad);
  const double val = rec + 0.5 * path.theta_integral(ctx.model->xi);
  const std::string params = "k=" + std::to_string(path.levels());
  ctx.csv.add("parisi-eval", "rsb_recursion", params, rec, 0.0, 1, seed);
  ctx.csv.add("parisi-eval", "parisi_functional", params, val, 0.0, 1, seed);
  note(ctx, "parisi-eval: value " + format_double(val));
}

void cmd_minimize(RunContext& ctx, const json& cmd, std::uint64_t seed) {
  std::vector<int> ks;
  if (cmd.contains("k_ladder")) {
    ks = cmd.at("k_ladder").get<std::vector<int>>();
  } else {
    ks.push_back(get_or(cmd, "k", 1));
  }
  OptimizerOptions opts;
  opts.seed = seed;
  opts.multistarts = get_or(cmd, "multistarts", opts.multistarts);
  opts.max_evaluations = get_or(cmd, "max_evaluations", opts.max_evaluations);
  opts.cap_last_value = get_or(cmd, "cap_last_value", false);
  const QuadratureSpec quad = quad_from(cmd, ctx.model->xi.dim(), seed);
  const SymMatrix tilt = tilt_from(cmd, ctx.model->xi.dim());

  const auto results = minimize_parisi_ladder(ctx.model->xi, ctx.model->measure, ks, tilt, quad, opts);
  for (std::size_t i = 0; i < results.size(); ++i) {
    const std::string params = "k=" + std::to_string(ks[i]);
    ctx.csv.add("minimize", "value", params, results[i].value, 0.0, results[i].evaluations, seed);
    ctx.csv.add("minimize", "converged", params, results[i].converged ? 1.0 : 0.0, 0.0, 1, seed);
    note(ctx, "minimize k=" + std::to_string(ks[i]) + ": " + format_double(results[i].value));
  }
  if (cmd.contains("save_path") && results.back().path) {
    const std::filesystem::path file = ctx.out_dir / cmd.at("save_path").get<std::string>();
    std::ofstream out(file);
    out << path_to_json(*results.back().path).dump(2) << "\n";
    ctx.artifacts.push_back(file.string());
  }
}

void cmd_remove_correction(RunContext& ctx, const json& cmd, std::uint64_t seed) {
  const int k = get_or(cmd, "k", 1);
  const std::string method = get_or<std::string>(cmd, "method", "both");
  OptimizerOptions opts;
  opts.seed = seed;
  opts.multistarts = get_or(cmd, "multistarts", 4);
  opts.max_evaluations = get_or(cmd, "max_evaluations", 400);
  opts.outer_max_evaluations = get_or(cmd, "outer_max_evaluations", opts.outer_max_evaluations);
  const QuadratureSpec quad = quad_from(cmd, ctx.model->xi.dim(), seed);
  const std::string params = "k=" + std::to_string(k);

  std::optional<double> hl, hopf;
  if (method == "hopf-lax" || method == "both") {
    const RemovalResult r = remove_correction_hopflax(ctx.model->xi, ctx.model->measure, k, quad, opts);
    hl = r.value;
    ctx.csv.add("remove-correction", "hopf_lax", params, r.value, 0.0, r.evaluations, seed);
    note(ctx, "remove-correction hopf-lax: " + format_double(r.value));
  }
  if (method == "hopf" || method == "both") {
    const RemovalResult r = remove_correction_hopf(ctx.model->xi, ctx.model->measure, k, quad, opts);
    hopf = r.value;
    ctx.csv.add("remove-correction", "hopf", params, r.value, 0.0, r.evaluations, seed);
    note(ctx, "remove-correction hopf: " + format_double(r.value));
  }
  if (hl && hopf) {
    ctx.csv.add("remove-correction", "method_gap", params, *hl - *hopf, 0.0, 1, seed);
  }
}

void cmd_mc_free_energy(RunContext& ctx, const json& cmd, std::uint64_t seed) {
  const auto n_spins = cmd.at("n_spins").get<std::vector<int>>();
  const int reps = get_or(cmd, "reps", 500);
  const std::int64_t budget = get_or<std::int64_t>(cmd, "budget", 1 << 16);
  const bool has_txy = cmd.contains("t") || cmd.contains("x");
  const double t = get_or(cmd, "t", 0.0);
  const SymMatrix x = cmd.contains("x")
                          ? parse_matrix(cmd.at("x"), ctx.model->xi.dim(), "x")
                          : SymMatrix::zero(ctx.model->xi.dim());
  for (int n : n_spins) {
    const ConfigSpace cs(ctx.model->measure, n, budget);
    const MeanStderr r = has_txy ? free_energy_txy(ctx.model->xi, cs, t, x, reps, seed)
                                 : corrected_free_energy(ctx.model->xi, cs, reps, seed);
    std::string params = "N=" + std::to_string(n);
    if (has_txy) params += ";t=" + format_double(t);
    ctx.csv.add("mc-free-energy", has_txy ? "free_energy_txy" : "corrected_free_energy", params,
                r.mean, r.std_err, r.reps, seed);
    note(ctx, "mc-free-energy N=" + std::to_string(n) + ": " + format_double(r.mean) + " +- " +
                  format_double(r.std_err));
  }
}

void cmd_guerra_check(RunContext& ctx, const json& cmd, std::uint64_t seed) {
  const int n = cmd.at("n_spins").get<int>();
  const int reps = get_or(cmd, "reps", 500);
  const auto r_grid = get_or(cmd, "r_grid", std::vector<double>{0.0, 0.2, 0.4, 0.6, 0.8, 1.0});
  const bool required = get_or(cmd, "required", false);
  const ParisiPath path = path_argument(ctx, cmd);
  const ConfigSpace cs(ctx.model->measure, n, get_or<std::int64_t>(cmd, "budget", 1 << 16));

  std::optional<CascadeWeights> weights;
  if (path.levels() >= 2) {
    weights = sample_cascade_weights(path, get_or(cmd, "leaves_per_node", 512), seed);
  }
  const GuerraCurve curve = guerra_curve(ctx.model->xi, ctx.model->measure, cs, path,
                                         weights ? &*weights : nullptr, r_grid, reps, seed);
  const std::string base_params = "N=" + std::to_string(n) + ";k=" + std::to_string(path.levels());
  for (const GuerraPoint& p : curve.points) {
    ctx.csv.add("guerra-check", "phi", base_params + ";r=" + format_double(p.r), p.mean, p.std_err,
                reps, seed);
  }
  for (std::size_t i = 0; i < curve.step_mean.size(); ++i) {
    ctx.csv.add("guerra-check", "phi_step",
                base_params + ";r=" + format_double(r_grid[i]) + ".." + format_double(r_grid[i + 1]),
                curve.step_mean[i], curve.step_stderr[i], reps, seed);
  }
  const bool monotone = curve.monotone_within(3.0);
  ctx.csv.add("guerra-check", "monotone", base_params, monotone ? 1.0 : 0.0, 0.0, reps, seed);
  note(ctx, std::string("guerra-check: ") + (monotone ? "monotone" : "NOT monotone"));
  if (required && !monotone) ctx.check_failed = true;
}

void cmd_perturbation_stats(RunContext& ctx, const json& cmd, std::uint64_t seed) {
  const auto n_spins = cmd.at("n_spins").get<std::vector<int>>();
  const int reps = get_or(cmd, "reps", 200);
  const int x_draws = get_or(cmd, "x_draws", 4);
  const int max_order = get_or(cmd, "max_order", 6);
  const double exponent = get_or(cmd, "exponent", 1.0 / 16.0);
  const PerturbationSpec pspec(ctx.model->xi.dim(), max_order, exponent);
  for (int n : n_spins) {
    const ConfigSpace cs(ctx.model->measure, n, get_or<std::int64_t>(cmd, "budget", 1 << 16));
    const GibbsStatsResult r =
        perturbed_gibbs_stats(ctx.model->xi, cs, pspec, x_draws, reps, {}, seed);
    ctx.csv.add("perturbation-stats", "self_overlap_concentration", "N=" + std::to_string(n),
                r.concentration.mean, r.concentration.std_err, reps, seed);
    note(ctx, "perturbation-stats N=" + std::to_string(n) + ": " +
                  format_double(r.concentration.mean));
  }
}

void cmd_ass_check(RunContext& ctx, const json& cmd, std::uint64_t seed) {
  const int n = cmd.at("n_spins").get<int>();
  const int reps = get_or(cmd, "reps", 400);
  const int max_order = get_or(cmd, "max_order", 4);
  const PerturbationSpec pspec(ctx.model->xi.dim(), max_order, get_or(cmd, "exponent", 1.0 / 16.0));
  const PerturbationX x = draw_perturbation_x(pspec, seed);
  const std::int64_t budget = get_or<std::int64_t>(cmd, "budget", 1 << 16);
  const ConfigSpace cs_small(ctx.model->measure, n, budget);
  const ConfigSpace cs_large(ctx.model->measure, n + 1, budget);
  const AssResult r = ass_difference(ctx.model->xi, cs_small, cs_large, pspec, x, reps, seed);
  const std::string params = "N=" + std::to_string(n);
  ctx.csv.add("ass-check", "lhs", params, r.lhs.mean, r.lhs.std_err, reps, seed);
  ctx.csv.add("ass-check", "rhs", params, r.rhs.mean, r.rhs.std_err, reps, seed);
  ctx.csv.add("ass-check", "gap", params, r.gap(), r.combined_stderr(), reps, seed);
  note(ctx, "ass-check N=" + std::to_string(n) + ": gap " + format_double(r.gap()));
}

void cmd_hj_residual(RunContext& ctx, const json& cmd, std::uint64_t seed) {
  const int n = cmd.at("n_spins").get<int>();
  const int reps = get_or(cmd, "reps", 300);
  const double fd_step = get_or(cmd, "fd_step", 1e-3);
  const ConfigSpace cs(ctx.model->measure, n, get_or<std::int64_t>(cmd, "budget", 1 << 16));
  const auto& points = cmd.at("points");
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double t = points.at(i).at("t").get<double>();
    const SymMatrix x = parse_matrix(points.at(i).at("x"), ctx.model->xi.dim(),
                                     "points/" + std::to_string(i) + "/x");
    const HjResidualResult r = hj_residual(ctx.model->xi, cs, t, x, fd_step, reps, seed);
    const std::string params = "N=" + std::to_string(n) + ";t=" + format_double(t);
    ctx.csv.add("hj-residual", "residual", params, r.residual, r.combined_error(), reps, seed);
    ctx.csv.add("hj-residual", "band", params, r.band, 0.0, reps, seed);
    note(ctx, "hj-residual t=" + format_double(t) + ": " + format_double(r.residual) +
                  (r.inconclusive ? " (inconclusive)" : ""));
  }
}

void cmd_enriched(RunContext& ctx, const json& cmd, std::uint64_t seed) {
  const double t = get_or(cmd, "t", 1.0);
  const int k = get_or(cmd, "k", 1);
  const QuadratureSpec quad = quad_from(cmd, ctx.model->xi.dim(), seed);
  OptimizerOptions opts;
  opts.seed = seed;
  opts.multistarts = get_or(cmd, "multistarts", opts.multistarts);
  const ParisiPath mu = cmd.contains("mu")
                            ? load_path(resolve(ctx, cmd.at("mu").get<std::string>()))
                            : ParisiPath::constant(SymMatrix::zero(ctx.model->xi.dim()));
  const EnrichedResult r =
      enriched_variational(ctx.model->xi, ctx.model->measure, t, mu, k, quad, opts);
  const std::string params = "t=" + format_double(t) + ";k=" + std::to_string(k);
  ctx.csv.add("enriched", "value", params, r.value, 0.0, 1, seed);
  note(ctx, "enriched t=" + format_double(t) + ": " + format_double(r.value));
}

}  // namespace

std::vector<std::string> known_commands() {
  return {"parisi-eval",        "minimize",  "remove-correction", "mc-free-energy",
          "guerra-check",       "ass-check", "perturbation-stats", "hj-residual",
          "enriched"};
}

int run_experiment(const std::filesystem::path& config_file, const CliOverrides& overrides,
                   std::ostream& log) {
  const auto started = std::chrono::steady_clock::now();
  RunContext ctx;
  try {
    const json config = load_json_file(config_file);
    ctx.config_dir = config_file.parent_path();
    if (!config.contains("model")) throw ConfigError(config_file.string() + ": missing 'model'");
    ctx.model = load_model(resolve(ctx, config.at("model").get<std::string>()));
    ctx.master_seed = overrides.seed.value_or(get_or<std::uint64_t>(config, "seed", 1));
    ctx.out_dir = overrides.out_dir.value_or(
        std::filesystem::path(get_or<std::string>(config, "output_dir", "out")));
    if (ctx.out_dir.is_relative()) ctx.out_dir = ctx.config_dir / ctx.out_dir;
    std::filesystem::create_directories(ctx.out_dir);

    if (!config.contains("commands") || !config.at("commands").is_array() ||
        config.at("commands").empty()) {
      throw ConfigError(config_file.string() + ": no commands");
    }

    const auto& commands = config.at("commands");
    for (std::size_t i = 0; i < commands.size(); ++i) {
      const json& cmd = commands.at(i);
      const std::string type = cmd.at("type").get<std::string>();
      const std::uint64_t seed = mix_seed(ctx.master_seed, {static_cast<std::uint64_t>(i)});
      log << "[" << (i + 1) << "/" << commands.size() << "] " << type << "\n";
      if (type == "parisi-eval") cmd_parisi_eval(ctx, cmd, seed);
      else if (type == "minimize") cmd_minimize(ctx, cmd, seed);
      else if (type == "remove-correction") cmd_remove_correction(ctx, cmd, seed);
      else if (type == "mc-free-energy") cmd_mc_free_energy(ctx, cmd, seed);
      else if (type == "guerra-check") cmd_guerra_check(ctx, cmd, seed);
      else if (type == "perturbation-stats") cmd_perturbation_stats(ctx, cmd, seed);
      else if (type == "ass-check") cmd_ass_check(ctx, cmd, seed);
      else if (type == "hj-residual") cmd_hj_residual(ctx, cmd, seed);
      else if (type == "enriched") cmd_enriched(ctx, cmd, seed);
      else throw ConfigError("unknown command type '" + type + "'");
      json resolved_cmd = cmd;
      resolved_cmd["resolved_seed"] = seed;
      ctx.resolved.push_back(resolved_cmd);
    }
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << "\n";
    return 2;
  } catch (const nlohmann::json::exception& e) {
    log << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    log << "numerical abort: " << e.what() << "\n";
    return 3;
  }

  ctx.csv.write(ctx.out_dir / "results.csv");

  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  json manifest;
  manifest["version"] = "0.1.0";
  manifest["seed"] = ctx.master_seed;
  manifest["commands"] = ctx.resolved;
  manifest["wall_time_seconds"] = wall;
  manifest["artifacts"] = ctx.artifacts;
  {
    std::ofstream out(ctx.out_dir / "manifest.json");
    out << manifest.dump(2) << "\n";
  }
  {
    std::ofstream out(ctx.out_dir / "summary.txt");
    for (const std::string& line : ctx.summary) out << line << "\n";
  }
  for (const std::string& line : ctx.summary) log << line << "\n";
  return ctx.check_failed ? 1 : 0;
}

}  // namespace spingl
