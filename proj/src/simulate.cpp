#include "spingl/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>

#include <Eigen/Eigenvalues>

namespace spingl {

namespace {

double log_sum_exp(const Eigen::VectorXd& v) {
  const double peak = v.maxCoeff();
  return peak + std::log((v.array() - peak).exp().sum());
}

std::vector<std::pair<int, int>> batch_ranges(int reps, int batches) {
  batches = std::max(1, std::min(batches, reps));
  std::vector<std::pair<int, int>> out;
  const int base = reps / batches;
  int extra = reps % batches;
  int start = 0;
  for (int b = 0; b < batches; ++b) {
    const int len = base + (extra-- > 0 ? 1 : 0);
    out.emplace_back(start, start + len);
    start += len;
  }
  return out;
}

}  // namespace

ConfigSpace::ConfigSpace(const SpinMeasure& p1, int spins, std::int64_t budget)
    : p1_(p1), spins_(spins) {
  if (spins < 1) throw ConfigError("ConfigSpace: need at least one spin");
  std::int64_t total = 1;
  for (int i = 0; i < spins; ++i) {
    total *= p1.size();
    if (total > budget) {
      throw ConfigError("ConfigSpace: " + std::to_string(p1.size()) + "^" +
                        std::to_string(spins) + " configurations exceed budget " +
                        std::to_string(budget));
    }
  }
  const int d = p1.dim();
  configs_.reserve(total);
  log_weights_.reserve(total);
  self_overlaps_.reserve(total);
  std::vector<int> idx(spins, 0);
  for (std::int64_t c = 0; c < total; ++c) {
    Eigen::MatrixXd sigma(d, spins);
    double lw = 0.0;
    for (int j = 0; j < spins; ++j) {
      sigma.col(j) = p1.atom(idx[j]).site;
      lw += std::log(p1.atom(idx[j]).weight);
    }
    configs_.push_back(sigma);
    log_weights_.push_back(lw);
    self_overlaps_.emplace_back(Eigen::MatrixXd(sigma * sigma.transpose() / spins));
    for (int j = spins - 1; j >= 0; --j) {
      if (++idx[j] < p1.size()) break;
      idx[j] = 0;
    }
  }
}

Eigen::MatrixXd ConfigSpace::overlap(int c, int cp) const {
  return configs_[c] * configs_[cp].transpose() / spins_;
}

GaussianFieldSampler::GaussianFieldSampler(const Eigen::MatrixXd& kernel) {
  if (kernel.rows() != kernel.cols()) throw DimensionError("GaussianFieldSampler: not square");
  const Eigen::MatrixXd sym = 0.5 * (kernel + kernel.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  if (es.info() != Eigen::Success) {
    throw NumericalError("GaussianFieldSampler: eigendecomposition failed, size " +
                         std::to_string(kernel.rows()));
  }
  const double min_ev = es.eigenvalues().minCoeff();
  const double max_ev = std::max(0.0, es.eigenvalues().maxCoeff());
  max_clip_ = std::max(0.0, -min_ev);
  if (max_clip_ > 1e-6 * std::max(1.0, max_ev)) {
    throw NumericalError("GaussianFieldSampler: covariance clip " + std::to_string(max_clip_) +
                         " exceeds tolerance (matrix of size " + std::to_string(kernel.rows()) +
                         ")");
  }
  factor_ = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

Eigen::MatrixXd hamiltonian_kernel(const ModelXi& m, const ConfigSpace& cs) {
  const int n = cs.count();
  Eigen::MatrixXd k(n, n);
  for (int c = 0; c < n; ++c) {
    for (int cp = c; cp < n; ++cp) {
      const double v = cs.spins() * m.value(SymMatrix(cs.overlap(c, cp)));
      k(c, cp) = v;
      k(cp, c) = v;
    }
  }
  return k;
}

Eigen::MatrixXd cavity_hamiltonian_kernel(const ModelXi& m, const ConfigSpace& cs) {
  const int n = cs.count();
  const double big = cs.spins() + 1;
  Eigen::MatrixXd k(n, n);
  for (int c = 0; c < n; ++c) {
    for (int cp = c; cp < n; ++cp) {
      const double v =
          big * m.value(SymMatrix(cs.config(c) * cs.config(cp).transpose() / big));
      k(c, cp) = v;
      k(cp, c) = v;
    }
  }
  return k;
}

Eigen::MatrixXd cavity_vector_kernel(const ModelXi& m, const ConfigSpace& cs) {
  const int n = cs.count();
  const int d = cs.dim();
  Eigen::MatrixXd k(n * d, n * d);
  for (int c = 0; c < n; ++c) {
    for (int cp = 0; cp < n; ++cp) {
      // grad xi at a nonsymmetric overlap: entrywise formula, no
      // symmetrization (the kernel itself is symmetric under swapping
      // (c,a) with (c',b)).
      const Eigen::MatrixXd r = cs.overlap(c, cp);
      Eigen::MatrixXd g = Eigen::MatrixXd::Zero(d, d);
      for (const XiTerm& t : m.terms()) {
        if (t.power == 1) {
          g += t.coeff.mat();
        } else {
          g += t.power * t.coeff.mat().cwiseProduct(
                             r.unaryExpr([&](double v) { return std::pow(v, t.power - 1); }));
        }
      }
      k.block(c * d, cp * d, d, d) = g;
    }
  }
  return k;
}

Eigen::MatrixXd cavity_scalar_kernel(const ModelXi& m, const ConfigSpace& cs) {
  const int n = cs.count();
  Eigen::MatrixXd k(n, n);
  for (int c = 0; c < n; ++c) {
    for (int cp = 0; cp < n; ++cp) {
      const Eigen::MatrixXd r = cs.overlap(c, cp);
      double v = 0.0;
      for (const XiTerm& t : m.terms()) {
        if (t.power == 1) continue;
        v += (t.power - 1) *
             t.coeff.mat().cwiseProduct(r.unaryExpr([&](double x) {
               return std::pow(x, t.power);
             })).sum();
      }
      k(c, cp) = v;
    }
  }
  return 0.5 * (k + k.transpose());
}

Eigen::MatrixXd perturbation_kernel(const SymMatrix& a, int schur_power, int outer_power,
                                    const ConfigSpace& cs) {
  const int n = cs.count();
  Eigen::MatrixXd k(n, n);
  for (int c = 0; c < n; ++c) {
    for (int cp = 0; cp < n; ++cp) {
      const Eigen::MatrixXd r = cs.overlap(c, cp);
      const double inner =
          a.mat().cwiseProduct(r.unaryExpr([&](double x) { return std::pow(x, schur_power); }))
              .sum();
      k(c, cp) = cs.spins() * std::pow(inner, outer_power);
    }
  }
  return 0.5 * (k + k.transpose());
}

DisorderSample sample_disorder(const ModelXi& m, const ConfigSpace& cs,
                               const DisorderFields& fields, std::uint64_t seed,
                               DisorderMethod method) {
  DisorderSample out;
  out.seed = seed;
  out.method = method;
  if (fields.hamiltonian) {
    Rng rng = Rng::stream(seed, {0x4a11ULL});
    if (method == DisorderMethod::ExplicitTensor) {
      out.hamiltonian = sample_hamiltonian_tensor(m, cs, rng);
    } else {
      out.hamiltonian = GaussianFieldSampler(hamiltonian_kernel(m, cs)).sample(rng);
    }
  }
  if (fields.cavity_hamiltonian) {
    Rng rng = Rng::stream(seed, {0x4a12ULL});
    out.cavity_hamiltonian = GaussianFieldSampler(cavity_hamiltonian_kernel(m, cs)).sample(rng);
  }
  if (fields.cavity_vector) {
    Rng rng = Rng::stream(seed, {0x4a13ULL});
    const Eigen::VectorXd flat = GaussianFieldSampler(cavity_vector_kernel(m, cs)).sample(rng);
    out.cavity_vector.resize(cs.count(), cs.dim());
    for (int c = 0; c < cs.count(); ++c) {
      out.cavity_vector.row(c) = flat.segment(c * cs.dim(), cs.dim());
    }
  }
  if (fields.cavity_scalar) {
    Rng rng = Rng::stream(seed, {0x4a14ULL});
    out.cavity_scalar = GaussianFieldSampler(cavity_scalar_kernel(m, cs)).sample(rng);
  }
  return out;
}

Eigen::VectorXd sample_hamiltonian_tensor(const ModelXi& m, const ConfigSpace& cs, Rng& rng) {
  const int n = cs.count();
  const int spins = cs.spins();
  const int d = cs.dim();
  Eigen::VectorXd h = Eigen::VectorXd::Zero(n);
  for (const XiTerm& term : m.terms()) {
    const int p = term.power;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(term.coeff.mat());
    if (es.info() != Eigen::Success) throw NumericalError("tensor sampler: eigensolver failed");
    for (int mm = 0; mm < d; ++mm) {
      const double lambda = es.eigenvalues()[mm];
      if (lambda <= 1e-14) continue;
      const Eigen::VectorXd v = std::sqrt(lambda) * es.eigenvectors().col(mm);
      // row contractions u_c(j) = sum_k v_k sigma_{k,j}
      Eigen::MatrixXd u(n, spins);
      for (int c = 0; c < n; ++c) u.row(c) = v.transpose() * cs.config(c);
      const double scale = std::pow(static_cast<double>(spins), 0.5 * (1 - p));
      std::vector<int> idx(p, 0);
      while (true) {
        const double g = rng.normal();
        Eigen::ArrayXd prod = Eigen::ArrayXd::Constant(n, 1.0);
        for (int i = 0; i < p; ++i) prod *= u.col(idx[i]).array();
        h.array() += scale * g * prod;
        int i = p - 1;
        while (i >= 0 && idx[i] == spins - 1) idx[i--] = 0;
        if (i < 0) break;
        ++idx[i];
      }
    }
  }
  return h;
}

MeanStderr summarize(const std::vector<double>& values) {
  MeanStderr s;
  s.reps = static_cast<int>(values.size());
  if (values.empty()) return s;
  double acc = 0.0;
  for (double v : values) acc += v;
  s.mean = acc / s.reps;
  if (s.reps > 1) {
    double var = 0.0;
    for (double v : values) var += (v - s.mean) * (v - s.mean);
    s.std_err = std::sqrt(var / (s.reps - 1) / s.reps);
  }
  return s;
}

namespace {

struct EnumeratedModel {
  Eigen::VectorXd base;     // log w - (N/2) xi(self overlap)
  Eigen::VectorXd xi_self;  // xi(self overlap)
};

EnumeratedModel enumerate_terms(const ModelXi& m, const ConfigSpace& cs) {
  EnumeratedModel t;
  const int n = cs.count();
  t.base.resize(n);
  t.xi_self.resize(n);
  for (int c = 0; c < n; ++c) {
    t.xi_self[c] = m.value(cs.self_overlap(c));
    t.base[c] = cs.log_weight(c) - 0.5 * cs.spins() * t.xi_self[c];
  }
  return t;
}

}  // namespace

MeanStderr corrected_free_energy(const ModelXi& m, const ConfigSpace& cs, int reps,
                                 std::uint64_t seed) {
  return free_energy_txy(m, cs, 0.0, SymMatrix::zero(m.dim()), reps, seed);
}

MeanStderr free_energy_txy(const ModelXi& m, const ConfigSpace& cs, double t,
                           const SymMatrix& x, int reps, std::uint64_t seed) {
  if (x.dim() != m.dim()) throw DimensionError("free_energy_txy: tilt dimension mismatch");
  const EnumeratedModel terms = enumerate_terms(m, cs);
  const int n = cs.count();
  Eigen::VectorXd shift(n);
  for (int c = 0; c < n; ++c) {
    shift[c] = terms.base[c] + t * cs.spins() * terms.xi_self[c] +
               cs.spins() * frobenius_dot(x, cs.self_overlap(c));
  }
  const GaussianFieldSampler sampler(hamiltonian_kernel(m, cs));
  std::vector<double> values;
  values.reserve(reps);
  for (int rep = 0; rep < reps; ++rep) {
    Rng rng = Rng::stream(seed, {0xfeULL, static_cast<std::uint64_t>(rep)});
    const Eigen::VectorXd h = sampler.sample(rng);
    values.push_back(log_sum_exp(shift + h) / cs.spins());
  }
  return summarize(values);
}

HjResidualResult hj_residual(const ModelXi& m, const ConfigSpace& cs, double t,
                             const SymMatrix& x, double fd_step, int reps, std::uint64_t seed) {
  if (t <= fd_step) throw ConfigError("hj_residual: need t > fd_step");
  const OrthoBasis basis(m.dim());
  const int nb = basis.size();
  const EnumeratedModel terms = enumerate_terms(m, cs);
  const int n = cs.count();
  const int spins = cs.spins();

  // evaluation points: t+h, t-h, then x +- h e_i pairs, then the center
  std::vector<std::pair<double, SymMatrix>> points;
  points.emplace_back(t + fd_step, x);
  points.emplace_back(t - fd_step, x);
  for (int i = 0; i < nb; ++i) {
    points.emplace_back(t, x + basis.element(i) * fd_step);
    points.emplace_back(t, x - basis.element(i) * fd_step);
  }
  points.emplace_back(t, x);

  std::vector<Eigen::VectorXd> shifts;
  for (const auto& [tp, xp] : points) {
    Eigen::VectorXd s(n);
    for (int c = 0; c < n; ++c) {
      s[c] = terms.base[c] + tp * spins * terms.xi_self[c] +
             spins * frobenius_dot(xp, cs.self_overlap(c));
    }
    shifts.push_back(std::move(s));
  }

  const GaussianFieldSampler sampler(hamiltonian_kernel(m, cs));
  const int np = static_cast<int>(points.size());
  std::vector<std::vector<double>> fvals(np, std::vector<double>(reps));
  std::vector<double> gibbs_var(reps);
  std::vector<Eigen::MatrixXd> grad_hat(reps);

  for (int rep = 0; rep < reps; ++rep) {
    Rng rng = Rng::stream(seed, {0x8dULL, static_cast<std::uint64_t>(rep)});
    const Eigen::VectorXd h = sampler.sample(rng);
    for (int p = 0; p < np; ++p) fvals[p][rep] = log_sum_exp(shifts[p] + h) / spins;

    // center-point Gibbs statistics for the curvature band
    Eigen::VectorXd logits = shifts[np - 1] + h;
    const double lz = log_sum_exp(logits);
    Eigen::MatrixXd mean_r = Eigen::MatrixXd::Zero(m.dim(), m.dim());
    double mean_sq = 0.0;
    for (int c = 0; c < n; ++c) {
      const double w = std::exp(logits[c] - lz);
      mean_r += w * cs.self_overlap(c).mat();
      mean_sq += w * cs.self_overlap(c).mat().squaredNorm();
    }
    grad_hat[rep] = mean_r;
    gibbs_var[rep] = mean_sq - mean_r.squaredNorm();
  }

  auto assemble = [&](int lo, int hi, double* out_dt, Eigen::MatrixXd* out_grad) {
    std::vector<double> means(np, 0.0);
    for (int p = 0; p < np; ++p) {
      for (int r = lo; r < hi; ++r) means[p] += fvals[p][r];
      means[p] /= (hi - lo);
    }
    const double dt = (means[0] - means[1]) / (2 * fd_step);
    Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(m.dim(), m.dim());
    for (int i = 0; i < nb; ++i) {
      grad += basis.element(i).mat() * (means[2 + 2 * i] - means[3 + 2 * i]) / (2 * fd_step);
    }
    if (out_dt) *out_dt = dt;
    if (out_grad) *out_grad = grad;
    return dt - m.value(SymMatrix(grad));
  };

  HjResidualResult res;
  double dt = 0.0;
  Eigen::MatrixXd grad;
  res.residual = assemble(0, reps, &dt, &grad);
  res.time_derivative = dt;
  res.gradient = SymMatrix(grad);

  const auto ranges = batch_ranges(reps, 10);
  std::vector<double> batch_res;
  for (const auto& [lo, hi] : ranges) batch_res.push_back(assemble(lo, hi, nullptr, nullptr));
  res.std_err = summarize(batch_res).std_err;
  res.fd_allowance = fd_step * fd_step;

  double var_mean = 0.0;
  double grad_dev = 0.0;
  for (int r = 0; r < reps; ++r) var_mean += std::max(0.0, gibbs_var[r]);
  var_mean /= reps;
  for (int r = 0; r < reps; ++r) grad_dev += (grad_hat[r] - grad).norm();
  grad_dev /= reps;
  res.band = m.lipschitz_bound() * (std::sqrt(var_mean) + grad_dev);
  res.inconclusive = res.combined_error() >= std::abs(res.residual) && res.residual < 0.0;
  return res;
}

bool GuerraCurve::monotone_within(double sigmas) const {
  for (std::size_t i = 0; i < step_mean.size(); ++i) {
    if (step_mean[i] > sigmas * step_stderr[i]) return false;
  }
  return true;
}

GuerraCurve guerra_curve(const ModelXi& m, const SpinMeasure& p1, const ConfigSpace& cs,
                         const ParisiPath& path, const CascadeWeights* weights,
                         const std::vector<double>& r_grid, int reps, std::uint64_t seed) {
  if (p1.dim() != m.dim()) throw DimensionError("guerra_curve: dimension mismatch");
  const int k = path.levels();
  const int d = m.dim();
  const int spins = cs.spins();
  const int n = cs.count();
  if (k >= 2 && weights == nullptr) {
    throw ConfigError("guerra_curve: multi-level paths need cascade weights");
  }
  if (weights && weights->depth() != k - 1) {
    throw ConfigError("guerra_curve: weight tree depth does not match the path");
  }

  // increments of the gradient path and of theta
  std::vector<Eigen::MatrixXd> w_factors;
  std::vector<double> y_sd;
  SymMatrix prev_grad = SymMatrix::zero(d);
  double prev_theta = 0.0;
  for (int l = 1; l <= k; ++l) {
    const SymMatrix g = m.gradient(path.value(l));
    const SymMatrix inc = g - prev_grad;
    if (frobenius_norm(inc) < 1e-12) {
      w_factors.push_back(Eigen::MatrixXd::Zero(d, d));
    } else {
      w_factors.push_back(psd_factor(psd_project(inc), path.tol()));
    }
    prev_grad = g;
    const double th = m.theta(path.value(l));
    y_sd.push_back(std::sqrt(std::max(0.0, th - prev_theta)));
    prev_theta = th;
  }
  const SymMatrix grad_end = m.gradient(path.value(k));
  const double theta_end = m.theta(path.value(k));

  const std::int64_t leaves = weights ? weights->leaf_count() : 1;
  const int fanout = weights ? weights->leaves_per_node() : 1;
  Eigen::VectorXd leaf_log_w(leaves);
  if (weights) {
    for (std::int64_t i = 0; i < leaves; ++i) leaf_log_w[i] = std::log(weights->leaf_weights()[i]);
  } else {
    leaf_log_w[0] = 0.0;
  }

  // flattened configurations for one GEMM per replicate
  Eigen::MatrixXd sigma_flat(d * spins, n);
  Eigen::VectorXd base(n), xi_self(n), grad_dot(n);
  for (int c = 0; c < n; ++c) {
    Eigen::MatrixXd cfg = cs.config(c);
    sigma_flat.col(c) = Eigen::Map<Eigen::VectorXd>(cfg.data(), d * spins);
    xi_self[c] = m.value(cs.self_overlap(c));
    base[c] = cs.log_weight(c);
    grad_dot[c] = spins * frobenius_dot(grad_end, cs.self_overlap(c));
  }

  const GaussianFieldSampler sampler(hamiltonian_kernel(m, cs));
  const int nr = static_cast<int>(r_grid.size());
  std::vector<std::vector<double>> curve(nr, std::vector<double>(reps));

  Eigen::MatrixXd w_leaf(leaves, d * spins);
  Eigen::VectorXd y_leaf(leaves);

  for (int rep = 0; rep < reps; ++rep) {
    Rng rng = Rng::stream(seed, {0x9eaULL, static_cast<std::uint64_t>(rep)});
    const Eigen::VectorXd h = sampler.sample(rng);

    // cascade fields by walking the tree; the root increment is shared by
    // every leaf, deeper increments by the corresponding subtree
    std::function<void(int, std::int64_t, const Eigen::VectorXd&, double)> visit =
        [&](int depth, std::int64_t node, const Eigen::VectorXd& wacc, double yacc) {
          Eigen::MatrixXd gw(d, spins);
          for (int j = 0; j < spins; ++j) gw.col(j) = w_factors[depth] * rng.normal_vector(d);
          Eigen::VectorXd wnew = wacc + Eigen::Map<Eigen::VectorXd>(gw.data(), d * spins);
          const double ynew = yacc + y_sd[depth] * rng.normal();
          if (depth == k - 1) {
            w_leaf.row(node) = wnew;
            y_leaf[node] = ynew;
            return;
          }
          for (int child = 0; child < fanout; ++child) {
            visit(depth + 1, node * fanout + child, wnew, ynew);
          }
        };
    visit(0, 0, Eigen::VectorXd::Zero(d * spins), 0.0);

    const Eigen::MatrixXd w_dot = w_leaf * sigma_flat;  // leaves x configs

    for (int ri = 0; ri < nr; ++ri) {
      const double r = r_grid[ri];
      const double sr = std::sqrt(r), s1r = std::sqrt(1.0 - r);
      double peak = -std::numeric_limits<double>::infinity();
      Eigen::MatrixXd expo(leaves, n);
      for (std::int64_t a = 0; a < leaves; ++a) {
        for (int c = 0; c < n; ++c) {
          const double e = base[c] + leaf_log_w[a] + sr * h[c] - 0.5 * r * spins * xi_self[c] +
                           s1r * w_dot(a, c) - 0.5 * (1.0 - r) * grad_dot[c] +
                           std::sqrt(r * spins) * y_leaf[a] - 0.5 * r * spins * theta_end;
          expo(a, c) = e;
          peak = std::max(peak, e);
        }
      }
      curve[ri][rep] = (peak + std::log((expo.array() - peak).exp().sum())) / spins;
    }
  }

  GuerraCurve out;
  out.truncation_warning = weights && weights->truncation_warning();
  for (int ri = 0; ri < nr; ++ri) {
    const MeanStderr s = summarize(curve[ri]);
    out.points.push_back({r_grid[ri], s.mean, s.std_err});
  }
  for (int ri = 0; ri + 1 < nr; ++ri) {
    std::vector<double> diffs(reps);
    for (int rep = 0; rep < reps; ++rep) diffs[rep] = curve[ri + 1][rep] - curve[ri][rep];
    const MeanStderr s = summarize(diffs);
    out.step_mean.push_back(s.mean);
    out.step_stderr.push_back(s.std_err);
  }
  return out;
}

Eigen::MatrixXd OverlapArray::block(int l, int lp) const {
  return entries.block(l * dim, lp * dim, dim, dim);
}

bool OverlapArray::valid(double tol) const {
  for (int l = 0; l < replicas; ++l) {
    for (int lp = 0; lp < replicas; ++lp) {
      if (block(l, lp).norm() > 1.0 + tol) return false;
    }
    if (SymMatrix(block(l, l)).min_eigenvalue() < -tol) return false;
  }
  return true;
}

OverlapArray sample_overlap_array(const ConfigSpace& cs, const Eigen::VectorXd& gibbs_weights,
                                  int replicas, Rng& rng) {
  OverlapArray arr;
  arr.replicas = replicas;
  arr.dim = cs.dim();
  std::vector<int> picks(replicas);
  for (int l = 0; l < replicas; ++l) {
    const double u = rng.uniform();
    double acc = 0.0;
    int pick = cs.count() - 1;
    for (int c = 0; c < cs.count(); ++c) {
      acc += gibbs_weights[c];
      if (u < acc) {
        pick = c;
        break;
      }
    }
    picks[l] = pick;
  }
  arr.entries.resize(replicas * arr.dim, replicas * arr.dim);
  for (int l = 0; l < replicas; ++l) {
    for (int lp = 0; lp < replicas; ++lp) {
      arr.entries.block(l * arr.dim, lp * arr.dim, arr.dim, arr.dim) =
          cs.overlap(picks[l], picks[lp]);
    }
  }
  return arr;
}

namespace {

// Per-configuration deterministic parts of the cavity-sized perturbed
// Hamiltonian: log weight - (N+1)/2 xi(ss^T/(N+1)) and the basis values
// g_i(sigma) = e_i . sigma sigma^T.
struct PerturbedTerms {
  Eigen::VectorXd base;
  Eigen::MatrixXd basis_values;  // basis_size x count
};

PerturbedTerms perturbed_terms(const ModelXi& m, const ConfigSpace& cs) {
  PerturbedTerms t;
  const int n = cs.count();
  const double big = cs.spins() + 1;
  const OrthoBasis basis(m.dim());
  t.base.resize(n);
  t.basis_values.resize(basis.size(), n);
  for (int c = 0; c < n; ++c) {
    const SymMatrix shrunk(cs.config(c) * cs.config(c).transpose() / big);
    t.base[c] = cs.log_weight(c) - 0.5 * big * m.value(shrunk);
    const SymMatrix outer(cs.config(c) * cs.config(c).transpose());
    for (int i = 0; i < basis.size(); ++i) {
      t.basis_values(i, c) = frobenius_dot(basis.element(i), outer);
    }
  }
  return t;
}

double r_h_value(const SymMatrix& a, const Eigen::MatrixXd& overlap, const HIndex& h) {
  const double inner =
      a.mat()
          .cwiseProduct(overlap.unaryExpr([&](double x) { return std::pow(x, h.schur_power); }))
          .sum();
  return std::pow(inner, h.outer_power);
}

}  // namespace

GibbsStatsResult perturbed_gibbs_stats(const ModelXi& m, const ConfigSpace& cs,
                                       const PerturbationSpec& pspec, int x_draws, int reps,
                                       const std::vector<GgObservable>& observables,
                                       std::uint64_t seed) {
  const int n = cs.count();
  const int spins = cs.spins();
  const double scale = std::pow(static_cast<double>(spins), -pspec.exponent());
  const PerturbedTerms terms = perturbed_terms(m, cs);

  const GaussianFieldSampler cavity(cavity_hamiltonian_kernel(m, cs));
  std::vector<GaussianFieldSampler> field_samplers;
  field_samplers.reserve(pspec.term_count());
  for (const HIndex& h : pspec.terms()) {
    field_samplers.emplace_back(
        perturbation_kernel(pspec.matrix(h), h.schur_power, h.outer_power, cs));
  }

  // overlap tables for the replica sums
  std::vector<Eigen::MatrixXd> overlaps(n);
  for (int c = 0; c < n; ++c) {
    Eigen::MatrixXd rows(n * m.dim(), m.dim());
    for (int cp = 0; cp < n; ++cp) {
      rows.block(cp * m.dim(), 0, m.dim(), m.dim()) = cs.overlap(c, cp);
    }
    overlaps[c] = rows;
  }
  auto overlap_of = [&](int c, int cp) {
    return overlaps[c].block(cp * m.dim(), 0, m.dim(), m.dim());
  };

  struct ObsAccum {
    std::vector<double> with_extra;   // <f R^{1,n+1}_h> per rep
    std::vector<double> plain;        // <f>
    std::vector<double> pair;         // <R^{12}_h>
    std::vector<std::vector<double>> coupled;  // <f R^{1,l}_h>, l = 2..n
  };

  std::vector<double> conc_cells;
  std::vector<std::vector<double>> delta_cells(observables.size());

  for (int ix = 0; ix < x_draws; ++ix) {
    const PerturbationX x =
        draw_perturbation_x(pspec, mix_seed(seed, {0xd4a3ULL, static_cast<std::uint64_t>(ix)}));

    std::vector<Eigen::VectorXd> gibbs(reps);
    std::vector<Eigen::MatrixXd> mean_r11(reps);
    Eigen::MatrixXd grand_mean = Eigen::MatrixXd::Zero(m.dim(), m.dim());

    for (int rep = 0; rep < reps; ++rep) {
      Rng rng = Rng::stream(seed, {0x6bbULL, static_cast<std::uint64_t>(ix),
                                   static_cast<std::uint64_t>(rep)});
      Eigen::VectorXd logits = terms.base + cavity.sample(rng);
      for (int t = 0; t < pspec.term_count(); ++t) {
        logits += scale * x.field_weights[t] * pspec.coefficient(t) * field_samplers[t].sample(rng);
      }
      for (int i = 0; i < pspec.basis_size(); ++i) {
        logits += scale * x.basis_weights[i] * terms.basis_values.row(i).transpose();
      }
      const double lz = log_sum_exp(logits);
      gibbs[rep] = (logits.array() - lz).exp();

      Eigen::MatrixXd mr = Eigen::MatrixXd::Zero(m.dim(), m.dim());
      for (int c = 0; c < n; ++c) mr += gibbs[rep][c] * cs.self_overlap(c).mat();
      mean_r11[rep] = mr;
      grand_mean += mr;
    }
    grand_mean /= reps;

    // concentration statistic <|R11 - E<R11>|> with the Gibbs average inside
    const auto ranges = batch_ranges(reps, 5);
    for (const auto& [lo, hi] : ranges) {
      double acc = 0.0;
      for (int rep = lo; rep < hi; ++rep) {
        double inner = 0.0;
        for (int c = 0; c < n; ++c) {
          inner += gibbs[rep][c] * (cs.self_overlap(c).mat() - grand_mean).norm();
        }
        acc += inner;
      }
      conc_cells.push_back(acc / (hi - lo));
    }

    // replica identity defects
    for (std::size_t oi = 0; oi < observables.size(); ++oi) {
      const GgObservable& obs = observables[oi];
      const SymMatrix& a = pspec.matrix(obs.h);
      ObsAccum acc;
      acc.coupled.resize(std::max(0, obs.replicas - 1));

      for (int rep = 0; rep < reps; ++rep) {
        const Eigen::VectorXd& w = gibbs[rep];
        Eigen::VectorXd t_extra(n);
        for (int c = 0; c < n; ++c) {
          double s = 0.0;
          for (int cp = 0; cp < n; ++cp) s += w[cp] * r_h_value(a, overlap_of(c, cp), obs.h);
          t_extra[c] = s;
        }
        double pair = 0.0;
        for (int c = 0; c < n; ++c) pair += w[c] * t_extra[c];

        double v_extra = 0.0, v_plain = 0.0;
        std::vector<double> v_coupled(std::max(0, obs.replicas - 1), 0.0);
        std::vector<int> tuple(obs.replicas, 0);
        while (true) {
          double wt = 1.0;
          for (int l = 0; l < obs.replicas; ++l) wt *= w[tuple[l]];
          double f = 1.0;
          for (const auto& [l, lp, row, col] : obs.factors) {
            f *= overlap_of(tuple[l - 1], tuple[lp - 1])(row, col);
          }
          v_extra += wt * f * t_extra[tuple[0]];
          v_plain += wt * f;
          for (int l = 2; l <= obs.replicas; ++l) {
            v_coupled[l - 2] += wt * f * r_h_value(a, overlap_of(tuple[0], tuple[l - 1]), obs.h);
          }
          int i = obs.replicas - 1;
          while (i >= 0 && tuple[i] == n - 1) tuple[i--] = 0;
          if (i < 0) break;
          ++tuple[i];
        }
        acc.with_extra.push_back(v_extra);
        acc.plain.push_back(v_plain);
        acc.pair.push_back(pair);
        for (int l = 2; l <= obs.replicas; ++l) acc.coupled[l - 2].push_back(v_coupled[l - 2]);
      }

      for (const auto& [lo, hi] : ranges) {
        auto mean_of = [&](const std::vector<double>& v) {
          double s = 0.0;
          for (int r = lo; r < hi; ++r) s += v[r];
          return s / (hi - lo);
        };
        const double nrep = obs.replicas;
        double delta = mean_of(acc.with_extra) - mean_of(acc.plain) * mean_of(acc.pair) / nrep;
        for (int l = 2; l <= obs.replicas; ++l) delta -= mean_of(acc.coupled[l - 2]) / nrep;
        delta_cells[oi].push_back(std::abs(delta));
      }
    }
  }

  GibbsStatsResult out;
  out.concentration = summarize(conc_cells);
  for (std::size_t oi = 0; oi < observables.size(); ++oi) {
    const MeanStderr s = summarize(delta_cells[oi]);
    out.deltas.push_back({s.mean, s.std_err});
  }
  return out;
}

double AssResult::combined_stderr() const {
  return std::sqrt(lhs.std_err * lhs.std_err + rhs.std_err * rhs.std_err);
}

namespace {

// Corrected, perturbed free energy of one space: per-replicate values of
// (1/N) log sum exp(logw + H - (N/2) xi_self + scale * perturbation).
std::vector<double> perturbed_free_energy_values(const ModelXi& m, const ConfigSpace& cs,
                                                 const PerturbationSpec& pspec,
                                                 const PerturbationX& x, int reps,
                                                 std::uint64_t seed, std::uint64_t tag) {
  const int n = cs.count();
  const int spins = cs.spins();
  const double scale = std::pow(static_cast<double>(spins), -pspec.exponent());
  const EnumeratedModel terms = enumerate_terms(m, cs);
  const OrthoBasis basis(m.dim());

  Eigen::MatrixXd basis_values(basis.size(), n);
  for (int c = 0; c < n; ++c) {
    const SymMatrix outer(cs.config(c) * cs.config(c).transpose());
    for (int i = 0; i < basis.size(); ++i) {
      basis_values(i, c) = frobenius_dot(basis.element(i), outer);
    }
  }
  Eigen::VectorXd fixed = terms.base;
  for (int i = 0; i < pspec.basis_size(); ++i) {
    fixed += scale * x.basis_weights[i] * basis_values.row(i).transpose();
  }

  const GaussianFieldSampler sampler(hamiltonian_kernel(m, cs));
  std::vector<GaussianFieldSampler> field_samplers;
  for (const HIndex& h : pspec.terms()) {
    field_samplers.emplace_back(
        perturbation_kernel(pspec.matrix(h), h.schur_power, h.outer_power, cs));
  }

  std::vector<double> values(reps);
  for (int rep = 0; rep < reps; ++rep) {
    Rng rng = Rng::stream(seed, {tag, static_cast<std::uint64_t>(rep)});
    Eigen::VectorXd logits = fixed + sampler.sample(rng);
    for (int t = 0; t < pspec.term_count(); ++t) {
      logits += scale * x.field_weights[t] * pspec.coefficient(t) * field_samplers[t].sample(rng);
    }
    values[rep] = log_sum_exp(logits) / spins;
  }
  return values;
}

}  // namespace

AssResult ass_difference(const ModelXi& m, const ConfigSpace& cs_small,
                         const ConfigSpace& cs_large, const PerturbationSpec& pspec,
                         const PerturbationX& x, int reps, std::uint64_t seed) {
  if (cs_large.spins() != cs_small.spins() + 1) {
    throw ConfigError("ass_difference: spaces must have N and N+1 spins");
  }
  const int small_n = cs_small.spins();
  const int large_n = cs_large.spins();

  const std::vector<double> f_small =
      perturbed_free_energy_values(m, cs_small, pspec, x, reps, seed, 0xa55aULL);
  const std::vector<double> f_large =
      perturbed_free_energy_values(m, cs_large, pspec, x, reps, seed, 0xa55bULL);
  std::vector<double> lhs_vals(reps);
  for (int r = 0; r < reps; ++r) lhs_vals[r] = large_n * f_large[r] - small_n * f_small[r];

  // cavity side: Gibbs weights under the cavity-sized perturbed Hamiltonian
  const int n = cs_small.count();
  const double scale = std::pow(static_cast<double>(small_n), -pspec.exponent());
  const PerturbedTerms terms = perturbed_terms(m, cs_small);
  const GaussianFieldSampler cavity(cavity_hamiltonian_kernel(m, cs_small));
  std::vector<GaussianFieldSampler> field_samplers;
  for (const HIndex& h : pspec.terms()) {
    field_samplers.emplace_back(
        perturbation_kernel(pspec.matrix(h), h.schur_power, h.outer_power, cs_small));
  }
  const GaussianFieldSampler z_sampler(cavity_vector_kernel(m, cs_small));
  const GaussianFieldSampler y_sampler(cavity_scalar_kernel(m, cs_small));

  const SpinMeasure& p1 = cs_small.measure();
  // per-config spin integral constants: -(1/2) grad xi(self) . tau tau^T
  Eigen::MatrixXd atom_shift(n, p1.size());
  Eigen::VectorXd theta_self(n);
  for (int c = 0; c < n; ++c) {
    const SymMatrix g = m.gradient(cs_small.self_overlap(c));
    for (int a = 0; a < p1.size(); ++a) {
      const SymMatrix outer(p1.atom(a).site * p1.atom(a).site.transpose());
      atom_shift(c, a) = std::log(p1.atom(a).weight) - 0.5 * frobenius_dot(g, outer);
    }
    theta_self[c] = m.theta(cs_small.self_overlap(c));
  }

  std::vector<double> rhs_vals(reps);
  for (int rep = 0; rep < reps; ++rep) {
    Rng rng = Rng::stream(seed, {0xca71ULL, static_cast<std::uint64_t>(rep)});
    Eigen::VectorXd logits = terms.base + cavity.sample(rng);
    for (int t = 0; t < pspec.term_count(); ++t) {
      logits += scale * x.field_weights[t] * pspec.coefficient(t) * field_samplers[t].sample(rng);
    }
    for (int i = 0; i < pspec.basis_size(); ++i) {
      logits += scale * x.basis_weights[i] * terms.basis_values.row(i).transpose();
    }
    const double lz = log_sum_exp(logits);

    const Eigen::VectorXd z_flat = z_sampler.sample(rng);
    const Eigen::VectorXd y = y_sampler.sample(rng);

    Eigen::VectorXd spin_term(n), scalar_term(n);
    for (int c = 0; c < n; ++c) {
      const Eigen::VectorXd z = z_flat.segment(c * m.dim(), m.dim());
      Eigen::VectorXd e(p1.size());
      for (int a = 0; a < p1.size(); ++a) e[a] = atom_shift(c, a) + z.dot(p1.atom(a).site);
      spin_term[c] = log_sum_exp(e);
      scalar_term[c] = y[c] - 0.5 * theta_self[c];
    }
    const double term1 = log_sum_exp(logits - Eigen::VectorXd::Constant(n, lz) + spin_term);
    const double term2 = log_sum_exp(logits - Eigen::VectorXd::Constant(n, lz) + scalar_term);
    rhs_vals[rep] = term1 - term2;
  }

  AssResult out;
  out.lhs = summarize(lhs_vals);
  out.rhs = summarize(rhs_vals);
  return out;
}

}  // namespace spingl
