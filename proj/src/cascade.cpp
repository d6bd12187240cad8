#include "spingl/cascade.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

#include "spingl/rng.hpp"

namespace spingl {

namespace {

struct NodeSet {
  std::vector<double> weights;
  std::vector<Eigen::VectorXd> offsets;  // L * u per node
};

NodeSet tensor_nodes(const Eigen::MatrixXd& transform, const GaussHermiteRule& rule) {
  const int d = static_cast<int>(transform.rows());
  const int n = static_cast<int>(rule.nodes.size());
  std::int64_t total = 1;
  for (int i = 0; i < d; ++i) total *= n;

  NodeSet set;
  set.weights.reserve(total);
  set.offsets.reserve(total);
  std::vector<int> idx(d, 0);
  Eigen::VectorXd u(d);
  for (std::int64_t c = 0; c < total; ++c) {
    double w = 1.0;
    for (int i = 0; i < d; ++i) {
      u[i] = rule.nodes[idx[i]];
      w *= rule.weights[idx[i]];
    }
    set.weights.push_back(w);
    set.offsets.push_back(transform * u);
    for (int i = d - 1; i >= 0; --i) {
      if (++idx[i] < n) break;
      idx[i] = 0;
    }
  }
  return set;
}

class RecursionEval {
 public:
  RecursionEval(const std::vector<CascadeLevel>& levels, std::span<const double> exponents,
                const std::function<double(const Eigen::VectorXd&)>& innermost,
                const QuadratureSpec& quad)
      : levels_(levels), exponents_(exponents), innermost_(innermost), quad_(quad) {
    if (quad.mode == QuadratureSpec::Mode::GaussHermite) {
      const GaussHermiteRule rule = gauss_hermite(quad.nodes_per_dim);
      nodes_.resize(levels.size());
      for (std::size_t l = 0; l < levels.size(); ++l) {
        if (!levels[l].degenerate) nodes_[l] = tensor_nodes(levels[l].transform, rule);
      }
    } else {
      rng_.emplace(quad.seed);
    }
  }

  double run() {
    Eigen::VectorXd zero;
    if (!levels_.empty()) zero = Eigen::VectorXd::Zero(levels_.front().transform.rows());
    return evaluate(0, zero);
  }

 private:
  // X_l at the given accumulated field; integrates increment l+1.
  double evaluate(std::size_t l, const Eigen::VectorXd& accum) {
    if (l == levels_.size()) return innermost_(accum);
    const CascadeLevel& level = levels_[l];
    if (level.degenerate) return evaluate(l + 1, accum);

    std::vector<double> values;
    std::vector<double> weights;
    if (quad_.mode == QuadratureSpec::Mode::GaussHermite) {
      const NodeSet& set = nodes_[l];
      values.reserve(set.weights.size());
      for (std::size_t i = 0; i < set.weights.size(); ++i) {
        values.push_back(evaluate(l + 1, accum + set.offsets[i]));
      }
      weights = set.weights;
    } else {
      const int d = static_cast<int>(level.transform.rows());
      values.reserve(quad_.samples);
      weights.assign(quad_.samples, 1.0 / quad_.samples);
      for (int i = 0; i < quad_.samples; ++i) {
        const Eigen::VectorXd g = rng_->normal_vector(d);
        values.push_back(evaluate(l + 1, accum + level.transform * g));
      }
    }
    return combine(l, values, weights);
  }

  // Plain mean at the outermost level, log-moment reweighting below.
  double combine(std::size_t l, const std::vector<double>& values,
                 const std::vector<double>& weights) const {
    if (l == 0) {
      double v = 0.0;
      for (std::size_t i = 0; i < values.size(); ++i) v += weights[i] * values[i];
      return v;
    }
    const double s = exponents_[l - 1];
    const double peak = *std::max_element(values.begin(), values.end());
    double acc = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      acc += weights[i] * std::exp(s * (values[i] - peak));
    }
    return peak + std::log(acc) / s;
  }

  const std::vector<CascadeLevel>& levels_;
  std::span<const double> exponents_;
  const std::function<double(const Eigen::VectorXd&)>& innermost_;
  const QuadratureSpec& quad_;
  std::vector<NodeSet> nodes_;
  std::optional<Rng> rng_;
};

}  // namespace

double cascade_expectation(const std::vector<CascadeLevel>& levels,
                           std::span<const double> exponents,
                           const std::function<double(const Eigen::VectorXd&)>& innermost,
                           const QuadratureSpec& quad) {
  if (!levels.empty() && exponents.size() + 1 != levels.size()) {
    throw DimensionError("cascade_expectation: " + std::to_string(levels.size()) +
                         " levels need " + std::to_string(levels.size() - 1) + " exponents");
  }
  for (double s : exponents) {
    if (!(s > 0.0 && s < 1.0)) {
      throw ConfigError("cascade_expectation: exponents must lie in (0,1)");
    }
  }
  return RecursionEval(levels, exponents, innermost, quad).run();
}

std::vector<CascadeLevel> make_cascade_levels(const std::vector<SymMatrix>& increments,
                                              double tol) {
  std::vector<CascadeLevel> levels;
  levels.reserve(increments.size());
  for (std::size_t l = 0; l < increments.size(); ++l) {
    CascadeLevel level;
    if (frobenius_norm(increments[l]) < 1e-12) {
      level.degenerate = true;
      level.transform = Eigen::MatrixXd::Zero(increments[l].dim(), increments[l].dim());
    } else {
      const double ev = increments[l].min_eigenvalue();
      if (ev < -tol) {
        throw OrderViolation("cascade increment " + std::to_string(l + 1) +
                             " not PSD, min eigenvalue " + std::to_string(ev));
      }
      level.transform = psd_factor(psd_project(increments[l]), tol);
    }
    levels.push_back(std::move(level));
  }
  return levels;
}

namespace {

std::vector<double> interior_exponents(const ParisiPath& path) {
  std::vector<double> s;
  for (int l = 1; l < path.levels(); ++l) s.push_back(path.breakpoint(l));
  return s;
}

// log sum_atoms exp(log w + z.tau + c_tau), the innermost spin integral.
struct AtomIntegral {
  Eigen::MatrixXd sites;          // D x n_atoms
  Eigen::VectorXd log_w_plus_c;   // per atom

  double operator()(const Eigen::VectorXd& z) const {
    Eigen::VectorXd e = sites.transpose() * z + log_w_plus_c;
    const double peak = e.maxCoeff();
    return peak + std::log((e.array() - peak).exp().sum());
  }
};

AtomIntegral make_atom_integral(const SpinMeasure& p1, const SymMatrix& quadratic_shift) {
  AtomIntegral f;
  f.sites.resize(p1.dim(), p1.size());
  f.log_w_plus_c.resize(p1.size());
  for (int i = 0; i < p1.size(); ++i) {
    const SpinAtom& a = p1.atom(i);
    f.sites.col(i) = a.site;
    const SymMatrix outer(a.site * a.site.transpose());
    f.log_w_plus_c[i] = std::log(a.weight) + frobenius_dot(quadratic_shift, outer);
  }
  return f;
}

}  // namespace

double rsb_recursion(const ModelXi& m, const SpinMeasure& p1, const ParisiPath& path,
                     const SymMatrix& tilt, const QuadratureSpec& quad) {
  if (m.dim() != path.dim() || m.dim() != p1.dim() || tilt.dim() != m.dim()) {
    throw DimensionError("rsb_recursion: dimension mismatch");
  }
  std::vector<SymMatrix> increments;
  increments.reserve(path.levels());
  SymMatrix prev = SymMatrix::zero(m.dim());
  for (int l = 1; l <= path.levels(); ++l) {
    const SymMatrix g = m.gradient(path.value(l));
    increments.push_back(g - prev);
    prev = g;
  }
  const auto levels = make_cascade_levels(increments, path.tol());
  const auto exps = interior_exponents(path);
  const SymMatrix shift = tilt - m.gradient(path.value(path.levels())) * 0.5;
  const AtomIntegral innermost = make_atom_integral(p1, shift);
  return cascade_expectation(levels, exps, innermost, quad);
}

double parisi_functional(const ModelXi& m, const SpinMeasure& p1, const ParisiPath& path,
                         const SymMatrix& tilt, const QuadratureSpec& quad) {
  return rsb_recursion(m, p1, path, tilt, quad) + 0.5 * path.theta_integral(m);
}

double parisi_functional(const ModelXi& m, const SpinMeasure& p1, const ParisiPath& path,
                         const QuadratureSpec& quad) {
  return parisi_functional(m, p1, path, SymMatrix::zero(m.dim()), quad);
}

double psi_enriched(const ModelXi& m, const SpinMeasure& p1, const ParisiPath& mu,
                    const QuadratureSpec& quad) {
  if (m.dim() != mu.dim() || m.dim() != p1.dim()) {
    throw DimensionError("psi_enriched: dimension mismatch");
  }
  std::vector<SymMatrix> increments;
  increments.reserve(mu.levels());
  SymMatrix prev = SymMatrix::zero(m.dim());
  for (int l = 1; l <= mu.levels(); ++l) {
    increments.push_back(mu.value(l) - prev);
    prev = mu.value(l);
  }
  const auto levels = make_cascade_levels(increments, mu.tol());
  const auto exps = interior_exponents(mu);
  const SymMatrix shift = mu.value(mu.levels()) * -0.5;
  const AtomIntegral innermost = make_atom_integral(p1, shift);
  return cascade_expectation(levels, exps, innermost, quad);
}

CascadeWeights::CascadeWeights(std::vector<double> exponents, int leaves_per_node,
                               std::vector<std::vector<double>> log_points,
                               bool truncation_warning)
    : exponents_(std::move(exponents)),
      leaves_per_node_(leaves_per_node),
      log_points_(std::move(log_points)),
      truncation_warning_(truncation_warning) {
  const std::int64_t leaves = leaf_count();
  // Leaf log-weight is the sum of raw log points along the root-to-leaf
  // path; normalization is global, not per node.
  std::vector<double> log_leaf(leaves, 0.0);
  for (std::int64_t leaf = 0; leaf < leaves; ++leaf) {
    std::int64_t prefix = 0;
    std::int64_t rem = leaf;
    std::int64_t stride = leaves;
    for (int d = 0; d < depth(); ++d) {
      stride /= leaves_per_node_;
      const int digit = static_cast<int>(rem / stride);
      rem %= stride;
      prefix = prefix * leaves_per_node_ + digit;
      log_leaf[leaf] += log_points_[d][prefix];
    }
  }
  const double peak = *std::max_element(log_leaf.begin(), log_leaf.end());
  double total = 0.0;
  for (double lw : log_leaf) total += std::exp(lw - peak);
  leaf_weights_.resize(leaves);
  for (std::int64_t i = 0; i < leaves; ++i) {
    leaf_weights_[i] = std::exp(log_leaf[i] - peak) / total;
  }
}

std::int64_t CascadeWeights::leaf_count() const {
  std::int64_t n = 1;
  for (int d = 0; d < depth(); ++d) n *= leaves_per_node_;
  return n;
}

std::vector<int> CascadeWeights::leaf_digits(std::int64_t leaf) const {
  std::vector<int> digits(depth());
  std::int64_t stride = leaf_count();
  for (int d = 0; d < depth(); ++d) {
    stride /= leaves_per_node_;
    digits[d] = static_cast<int>(leaf / stride);
    leaf %= stride;
  }
  return digits;
}

int CascadeWeights::ancestor_depth(std::int64_t a, std::int64_t b) const {
  const std::vector<int> da = leaf_digits(a);
  const std::vector<int> db = leaf_digits(b);
  int d = 0;
  while (d < depth() && da[d] == db[d]) ++d;
  return d;
}

double CascadeWeights::branch_probability_below(int d) const {
  if (d < 1 || d > depth()) throw ConfigError("branch_probability_below: depth out of range");
  // Total weight per depth-(d-1)... collapse leaves by their depth-d prefix.
  const std::int64_t leaves = leaf_count();
  std::int64_t stride = leaves;
  for (int i = 0; i < d; ++i) stride /= leaves_per_node_;
  double same = 0.0;
  double acc = 0.0;
  for (std::int64_t leaf = 0; leaf < leaves; ++leaf) {
    acc += leaf_weights_[leaf];
    if ((leaf + 1) % stride == 0) {
      same += acc * acc;
      acc = 0.0;
    }
  }
  return 1.0 - same;
}

CascadeWeights sample_cascade_weights(const ParisiPath& path, int leaves_per_node,
                                      std::uint64_t seed) {
  if (path.levels() < 2) {
    throw ConfigError("sample_cascade_weights: single-level paths need no cascade");
  }
  if (leaves_per_node < 16) {
    throw ConfigError("sample_cascade_weights: need at least 16 leaves per node");
  }
  std::vector<double> exponents = {};
  for (int l = 1; l < path.levels(); ++l) exponents.push_back(path.breakpoint(l));

  const int depth = static_cast<int>(exponents.size());
  bool warn = false;
  std::vector<std::vector<double>> log_points(depth);
  std::int64_t nodes_at_depth = 1;
  for (int d = 0; d < depth; ++d) {
    nodes_at_depth *= leaves_per_node;
    log_points[d].resize(nodes_at_depth);
  }

  // Decreasing points of the Poisson process with intensity s x^{-1-s}:
  // x_i = t_i^{-1/s} for unit-rate arrival times t_i.
  std::int64_t parent_count = 1;
  for (int d = 0; d < depth; ++d) {
    const double s = exponents[d];
    for (std::int64_t parent = 0; parent < parent_count; ++parent) {
      Rng rng = Rng::stream(seed, {0xca5cadeULL, static_cast<std::uint64_t>(d),
                                   static_cast<std::uint64_t>(parent)});
      double arrival = 0.0;
      double total = 0.0;
      double last = 0.0;
      for (int i = 0; i < leaves_per_node; ++i) {
        arrival += rng.exponential();
        last = std::pow(arrival, -1.0 / s);
        total += last;
        log_points[d][parent * leaves_per_node + i] = -std::log(arrival) / s;
      }
      if (last / total > 1e-3) warn = true;
    }
    parent_count *= leaves_per_node;
  }
  return CascadeWeights(std::move(exponents), leaves_per_node, std::move(log_points), warn);
}

}  // namespace spingl
