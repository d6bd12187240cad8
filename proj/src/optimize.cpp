#include "spingl/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>

#include "spingl/nelder_mead.hpp"
#include "spingl/rng.hpp"

namespace spingl {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
double logit(double p) { return std::log(p / (1.0 - p)); }

Eigen::MatrixXd lower_from_params(const Eigen::VectorXd& raw, int offset, int dim) {
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(dim, dim);
  int idx = offset;
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j <= i; ++j) l(i, j) = raw[idx++];
  return l;
}

void params_from_lower(const Eigen::MatrixXd& l, Eigen::VectorXd& raw, int offset) {
  int idx = offset;
  for (int i = 0; i < l.rows(); ++i)
    for (int j = 0; j <= i; ++j) raw[idx++] = l(i, j);
}

}  // namespace

ParisiPath PathParams::to_path(const Eigen::VectorXd& raw) const {
  if (raw.size() != size()) throw DimensionError("PathParams: wrong parameter count");

  std::vector<double> breaks;
  breaks.push_back(0.0);
  if (levels > 1) {
    std::vector<double> s(levels - 1);
    for (int i = 0; i < levels - 1; ++i) s[i] = sigmoid(raw[i]);
    std::sort(s.begin(), s.end());
    // keep the sequence strictly inside (0,1) and strictly increasing
    double prev = 0.0;
    for (int i = 0; i < levels - 1; ++i) {
      double v = std::clamp(s[i], 1e-9, 1.0 - 1e-9 * (levels - i));
      if (v <= prev) v = prev + 1e-9;
      breaks.push_back(v);
      prev = v;
    }
  }
  breaks.push_back(1.0);

  std::vector<SymMatrix> values;
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(dim, dim);
  for (int l = 0; l < levels; ++l) {
    const Eigen::MatrixXd low =
        lower_from_params(raw, breakpoint_count() + l * block_size(), dim);
    acc += low * low.transpose();
    values.emplace_back(acc);
  }
  return ParisiPath(std::move(breaks), std::move(values), 1e-8);
}

Eigen::VectorXd PathParams::from_path(const ParisiPath& path) const {
  if (path.levels() != levels || path.dim() != dim) {
    throw DimensionError("PathParams::from_path: shape mismatch");
  }
  Eigen::VectorXd raw(size());
  for (int l = 1; l < levels; ++l) raw[l - 1] = logit(path.breakpoint(l));
  SymMatrix prev = SymMatrix::zero(dim);
  for (int l = 1; l <= levels; ++l) {
    const SymMatrix inc = path.value(l) - prev;
    prev = path.value(l);
    const Eigen::MatrixXd ridge =
        inc.mat() + (1e-12 * (1.0 + inc.mat().norm())) * Eigen::MatrixXd::Identity(dim, dim);
    Eigen::LLT<Eigen::MatrixXd> llt(ridge);
    if (llt.info() != Eigen::Success) {
      throw NumericalError("PathParams::from_path: increment not factorizable");
    }
    params_from_lower(llt.matrixL(), raw, breakpoint_count() + (l - 1) * block_size());
  }
  return raw;
}

namespace {

Eigen::VectorXd random_start(const PathParams& pp, double scale, Rng& rng) {
  Eigen::VectorXd raw(pp.size());
  for (int i = 0; i < pp.breakpoint_count(); ++i) raw[i] = rng.normal();
  for (int i = pp.breakpoint_count(); i < pp.size(); ++i) raw[i] = scale * rng.normal();
  return raw;
}

struct MultistartOutcome {
  Eigen::VectorXd x;
  double value = std::numeric_limits<double>::infinity();
  long evaluations = 0;
  bool converged = false;
  std::vector<double> history;
};

MultistartOutcome run_multistart(const std::function<double(const Eigen::VectorXd&)>& f,
                                 const std::vector<Eigen::VectorXd>& starts,
                                 const NelderMeadOptions& nm) {
  MultistartOutcome out;
  for (std::size_t i = 0; i < starts.size(); ++i) {
    const NelderMeadResult r = nelder_mead(f, starts[i], nm);
    out.evaluations += r.evaluations;
    out.history.push_back(r.value);
    if (r.value < out.value) {
      out.value = r.value;
      out.x = r.x;
      out.converged = r.converged;
    }
  }
  return out;
}

}  // namespace

double hull_distance(const SymMatrix& q, const SpinMeasure& p1, int iterations) {
  const int n = p1.size();
  std::vector<SymMatrix> outers;
  outers.reserve(n);
  for (int i = 0; i < n; ++i) {
    outers.emplace_back(p1.atom(i).site * p1.atom(i).site.transpose());
  }
  // Projected gradient on the simplex for min |sum_i w_i M_i - q|^2.
  Eigen::MatrixXd gram(n, n);
  Eigen::VectorXd lin(n);
  for (int i = 0; i < n; ++i) {
    lin[i] = frobenius_dot(outers[i], q);
    for (int j = 0; j < n; ++j) gram(i, j) = frobenius_dot(outers[i], outers[j]);
  }
  Eigen::VectorXd w = Eigen::VectorXd::Constant(n, 1.0 / n);
  const double lipschitz = std::max(1e-12, gram.norm());
  const double step = 1.0 / lipschitz;

  auto project_simplex = [&](Eigen::VectorXd v) {
    std::vector<double> u(v.data(), v.data() + v.size());
    std::sort(u.begin(), u.end(), std::greater<double>());
    double css = 0.0, tau = 0.0;
    int rho = 0;
    for (int i = 0; i < n; ++i) {
      css += u[i];
      const double t = (css - 1.0) / (i + 1);
      if (u[i] - t > 0) {
        rho = i + 1;
        tau = t;
      }
    }
    (void)rho;
    for (int i = 0; i < n; ++i) v[i] = std::max(0.0, v[i] - tau);
    return v;
  };

  for (int it = 0; it < iterations; ++it) {
    const Eigen::VectorXd grad = gram * w - lin;
    const Eigen::VectorXd next = project_simplex(w - step * grad);
    if ((next - w).norm() < 1e-14) {
      w = next;
      break;
    }
    w = next;
  }
  SymMatrix combo = SymMatrix::zero(q.dim());
  for (int i = 0; i < n; ++i) combo = combo + outers[i] * w[i];
  return frobenius_norm(combo - q);
}

MinimizeResult minimize_parisi(const ModelXi& m, const SpinMeasure& p1, int k,
                               const SymMatrix& tilt, const QuadratureSpec& quad,
                               const OptimizerOptions& opts) {
  if (k < 1) throw ConfigError("minimize_parisi: k must be at least 1");
  const PathParams pp{k, m.dim()};

  const double trace_cap = p1.max_self_trace();
  double penalty_weight = 0.0;
  if (opts.cap_last_value) {
    const double base =
        std::abs(parisi_functional(m, p1, pp.to_path(Eigen::VectorXd::Zero(pp.size())), tilt, quad));
    penalty_weight = opts.penalty_scale * std::max(1.0, base);
  }

  auto objective = [&](const Eigen::VectorXd& raw) {
    const ParisiPath path = pp.to_path(raw);
    double v = parisi_functional(m, p1, path, tilt, quad);
    if (opts.cap_last_value) {
      const double excess = std::max(0.0, path.value(k).trace() - trace_cap);
      v += penalty_weight * excess * excess;
    }
    return v;
  };

  std::vector<Eigen::VectorXd> starts;
  starts.push_back(Eigen::VectorXd::Zero(pp.size()));  // the flat zero path
  Rng rng = Rng::stream(opts.seed, {0x717ULL});
  for (int r = 1; r < opts.multistarts; ++r) {
    starts.push_back(random_start(pp, opts.start_scale, rng));
  }

  NelderMeadOptions nm;
  nm.max_evaluations = opts.max_evaluations;
  nm.f_tol = opts.f_tol;
  nm.x_tol = opts.x_tol;
  const MultistartOutcome out = run_multistart(objective, starts, nm);

  MinimizeResult res;
  res.path = pp.to_path(out.x);
  res.value = parisi_functional(m, p1, *res.path, tilt, quad);
  res.evaluations = out.evaluations;
  res.converged = out.converged;
  res.history = out.history;
  if (opts.cap_last_value) {
    res.cap_feasible = hull_distance(res.path->value(k), p1) <= 1e-6;
  }
  return res;
}

std::vector<MinimizeResult> minimize_parisi_ladder(const ModelXi& m, const SpinMeasure& p1,
                                                   const std::vector<int>& ks,
                                                   const SymMatrix& tilt,
                                                   const QuadratureSpec& quad,
                                                   const OptimizerOptions& opts) {
  std::vector<MinimizeResult> results;
  std::optional<ParisiPath> warm;
  for (int k : ks) {
    OptimizerOptions o = opts;
    MinimizeResult r;
    if (warm && warm->levels() == k - 1) {
      // duplicate the last level of the previous witness; it evaluates
      // identically and gives the larger k a head start
      const double last = warm->breakpoint(k - 2);
      const double split = 0.5 * (last + 1.0);
      const ParisiPath seeded = warm->refined({split});
      const PathParams pp{k, m.dim()};
      auto objective = [&](const Eigen::VectorXd& raw) {
        return parisi_functional(m, p1, pp.to_path(raw), tilt, quad);
      };
      std::vector<Eigen::VectorXd> starts;
      starts.push_back(pp.from_path(seeded));
      starts.push_back(Eigen::VectorXd::Zero(pp.size()));
      Rng rng = Rng::stream(o.seed, {0x1adde7ULL, static_cast<std::uint64_t>(k)});
      for (int i = 2; i < o.multistarts; ++i)
        starts.push_back(random_start(pp, o.start_scale, rng));
      NelderMeadOptions nm;
      nm.max_evaluations = o.max_evaluations;
      nm.f_tol = o.f_tol;
      nm.x_tol = o.x_tol;
      const MultistartOutcome out = run_multistart(objective, starts, nm);
      r.path = pp.to_path(out.x);
      r.value = parisi_functional(m, p1, *r.path, tilt, quad);
      r.evaluations = out.evaluations;
      r.converged = out.converged;
      r.history = out.history;
    } else {
      r = minimize_parisi(m, p1, k, tilt, quad, o);
    }
    warm = r.path;
    results.push_back(std::move(r));
  }
  return results;
}

namespace {

SymMatrix psd_from_factor_params(const Eigen::VectorXd& raw, int dim) {
  const Eigen::MatrixXd l = lower_from_params(raw, 0, dim);
  return SymMatrix(l * l.transpose());
}

std::vector<Eigen::VectorXd> psd_starts(int dim, int count, double scale, Rng& rng) {
  const int n = dim * (dim + 1) / 2;
  std::vector<Eigen::VectorXd> starts;
  starts.push_back(Eigen::VectorXd::Zero(n));
  for (int i = 1; i < count; ++i) {
    Eigen::VectorXd v(n);
    for (int j = 0; j < n; ++j) v[j] = scale * rng.normal();
    starts.push_back(v);
  }
  return starts;
}

}  // namespace

RemovalResult remove_correction_hopflax(const ModelXi& m, const SpinMeasure& p1, int k,
                                        const QuadratureSpec& quad,
                                        const OptimizerOptions& opts) {
  if (!m.has_superlinear_term()) {
    throw UnsupportedModel("remove_correction_hopflax: conjugate needs a p >= 2 term");
  }
  OptimizerOptions inner = opts;
  inner.cap_last_value = false;

  bool inner_ok = true;
  auto outer_objective = [&](const Eigen::VectorXd& raw) {
    const SymMatrix y = psd_from_factor_params(raw, m.dim());
    const MinimizeResult inf_res = minimize_parisi(m, p1, k, y, quad, inner);
    const ConjugateResult conj = xi_conjugate(m, y * 2.0);
    if (!inf_res.converged || !conj.converged) inner_ok = false;
    return -(inf_res.value - 0.5 * conj.value);  // maximize
  };

  Rng rng = Rng::stream(opts.seed, {0x40f1ULL});
  const auto starts = psd_starts(m.dim(), opts.outer_multistarts, 0.4, rng);
  NelderMeadOptions nm;
  nm.max_evaluations = opts.outer_max_evaluations;
  const MultistartOutcome out = run_multistart(outer_objective, starts, nm);

  RemovalResult res;
  res.outer_witness = psd_from_factor_params(out.x, m.dim());
  const MinimizeResult inner_best = minimize_parisi(m, p1, k, res.outer_witness, quad, inner);
  res.path = inner_best.path;
  res.value = inner_best.value - 0.5 * xi_conjugate(m, res.outer_witness * 2.0).value;
  res.evaluations = out.evaluations;
  res.converged = out.converged && inner_ok;
  return res;
}

RemovalResult remove_correction_hopf(const ModelXi& m, const SpinMeasure& p1, int k,
                                     const QuadratureSpec& quad, const OptimizerOptions& opts) {
  const PathParams pp{k, m.dim()};
  const int tilt_block = m.dim() * (m.dim() + 1) / 2;

  OptimizerOptions inner = opts;
  auto inner_infimum = [&](const SymMatrix& z, Eigen::VectorXd* arg_out) {
    auto joint = [&](const Eigen::VectorXd& raw) {
      const SymMatrix y = psd_from_factor_params(raw.head(tilt_block), m.dim());
      const ParisiPath path = pp.to_path(raw.tail(pp.size()));
      return parisi_functional(m, p1, path, y, quad) - frobenius_dot(y, z);
    };
    Rng rng = Rng::stream(opts.seed, {0x0b5ULL});
    std::vector<Eigen::VectorXd> starts;
    starts.push_back(Eigen::VectorXd::Zero(tilt_block + pp.size()));
    for (int i = 1; i < std::max(2, opts.multistarts / 2); ++i) {
      Eigen::VectorXd v(tilt_block + pp.size());
      for (int j = 0; j < v.size(); ++j) v[j] = 0.35 * rng.normal();
      starts.push_back(v);
    }
    NelderMeadOptions nm;
    nm.max_evaluations = opts.max_evaluations;
    const MultistartOutcome out = run_multistart(joint, starts, nm);
    if (arg_out) *arg_out = out.x;
    return out;
  };

  bool inner_ok = true;
  auto outer_objective = [&](const Eigen::VectorXd& raw) {
    const SymMatrix z = psd_from_factor_params(raw, m.dim());
    const MultistartOutcome inf_res = inner_infimum(z, nullptr);
    if (!inf_res.converged) inner_ok = false;
    return -(inf_res.value + 0.5 * m.value(z));  // maximize over z
  };

  Rng rng = Rng::stream(opts.seed, {0x40f2ULL});
  auto starts = psd_starts(m.dim(), opts.outer_multistarts, 0.5, rng);
  // the self-overlap scale is a natural magnitude for z
  {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(tilt_block);
    int idx = 0;
    const double s = std::sqrt(std::max(1e-12, p1.max_self_trace() / m.dim()));
    for (int i = 0; i < m.dim(); ++i)
      for (int j = 0; j <= i; ++j) v[idx++] = (i == j) ? s : 0.0;
    starts.push_back(v);
  }
  NelderMeadOptions nm;
  nm.max_evaluations = opts.outer_max_evaluations;
  const MultistartOutcome out = run_multistart(outer_objective, starts, nm);

  RemovalResult res;
  res.outer_witness = psd_from_factor_params(out.x, m.dim());
  Eigen::VectorXd joint_arg;
  const MultistartOutcome inner_best = inner_infimum(res.outer_witness, &joint_arg);
  res.tilt_witness = psd_from_factor_params(joint_arg.head(tilt_block), m.dim());
  res.path = pp.to_path(joint_arg.tail(pp.size()));
  res.value = inner_best.value + 0.5 * m.value(res.outer_witness);
  res.evaluations = out.evaluations;
  res.converged = out.converged && inner_ok;
  return res;
}

double hopflax_general(const std::function<double(const SymMatrix&)>& psi, const ModelXi& m,
                       double t, const SymMatrix& x, const OptimizerOptions& opts) {
  if (t < 0.0) throw ConfigError("hopflax_general: t must be nonnegative");
  if (t == 0.0) return psi(x);

  auto objective = [&](const Eigen::VectorXd& raw) {
    const SymMatrix y = psd_from_factor_params(raw, m.dim());
    return -(psi(x + y) - t * xi_conjugate(m, y * (1.0 / t)).value);
  };
  Rng rng = Rng::stream(opts.seed, {0x0f1a7ULL});
  const auto starts = psd_starts(m.dim(), opts.outer_multistarts, 0.6, rng);
  NelderMeadOptions nm;
  nm.max_evaluations = opts.outer_max_evaluations;
  const MultistartOutcome out = run_multistart(objective, starts, nm);
  return -out.value;
}

EnrichedResult enriched_variational(const ModelXi& m, const SpinMeasure& p1, double t,
                                    const ParisiPath& mu, int k, const QuadratureSpec& quad,
                                    const OptimizerOptions& opts) {
  if (t < 0.0) throw ConfigError("enriched_variational: t must be nonnegative");
  EnrichedResult res;
  if (t == 0.0) {
    res.value = psi_enriched(m, p1, mu, quad);
    res.converged = true;
    return res;
  }

  const PathParams pp{k, m.dim()};
  auto objective = [&](const Eigen::VectorXd& raw) {
    const ParisiPath path = pp.to_path(raw);
    const ParisiPath grad_path = path.mapped([&](const SymMatrix& q) { return m.gradient(q); });
    const ParisiPath combined = path_sum(mu, grad_path, t);
    // the conjugate term collapses to theta for convex models
    return psi_enriched(m, p1, combined, quad) + 0.5 * t * path.theta_integral(m);
  };

  std::vector<Eigen::VectorXd> starts;
  starts.push_back(Eigen::VectorXd::Zero(pp.size()));
  Rng rng = Rng::stream(opts.seed, {0xe42ULL});
  for (int r = 1; r < opts.multistarts; ++r) starts.push_back(random_start(pp, 0.3, rng));
  NelderMeadOptions nm;
  nm.max_evaluations = opts.max_evaluations;
  const MultistartOutcome out = run_multistart(objective, starts, nm);

  res.path = pp.to_path(out.x);
  res.value = out.value;
  res.converged = out.converged;
  return res;
}

}  // namespace spingl
