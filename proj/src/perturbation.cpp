#include "spingl/perturbation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "spingl/rng.hpp"

namespace spingl {

namespace {

int vec_gcd(const std::vector<int>& v) {
  int g = 0;
  for (int x : v) g = std::gcd(g, std::abs(x));
  return g;
}

bool first_nonzero_positive(const std::vector<int>& v) {
  for (int x : v) {
    if (x != 0) return x > 0;
  }
  return false;
}

std::vector<Eigen::VectorXd> integer_directions(int dim, int max_coord) {
  std::vector<Eigen::VectorXd> dirs;
  for (int level = 1; level <= max_coord; ++level) {
    std::vector<int> v(dim, -level);
    while (true) {
      const bool at_level = std::any_of(v.begin(), v.end(),
                                        [&](int x) { return std::abs(x) == level; });
      if (at_level && first_nonzero_positive(v) && vec_gcd(v) == 1) {
        Eigen::VectorXd d(dim);
        for (int i = 0; i < dim; ++i) d[i] = v[i];
        dirs.push_back(d);
      }
      int i = dim - 1;
      while (i >= 0 && v[i] == level) v[i--] = -level;
      if (i < 0) break;
      ++v[i];
    }
  }
  return dirs;
}

}  // namespace

std::vector<SymMatrix> rational_psd_enumeration(int dim, int count) {
  std::vector<SymMatrix> base;
  base.push_back(SymMatrix::identity(dim) * (1.0 / dim));
  for (const Eigen::VectorXd& v : integer_directions(dim, 2)) {
    base.emplace_back(Eigen::MatrixXd(v * v.transpose() / v.squaredNorm()));
  }

  std::vector<SymMatrix> out;
  auto seen = [&](const SymMatrix& a) {
    for (const SymMatrix& b : out) {
      if ((a.mat() - b.mat()).cwiseAbs().maxCoeff() < 1e-14) return true;
    }
    return false;
  };
  double scale = 1.0;
  while (static_cast<int>(out.size()) < count) {
    for (const SymMatrix& b : base) {
      const SymMatrix scaled = b * scale;
      if (!seen(scaled)) out.push_back(scaled);
      if (static_cast<int>(out.size()) == count) break;
    }
    scale *= 0.5;
  }
  return out;
}

PerturbationSpec::PerturbationSpec(int dim, int max_order, double exponent)
    : dim_(dim), max_order_(max_order), exponent_(exponent) {
  if (max_order < 3) throw ConfigError("PerturbationSpec: max_order must be at least 3");
  matrices_ = rational_psd_enumeration(dim, max_order - 2);
  for (int a = 1; a <= max_order - 2; ++a) {
    for (int schur = 1; a + schur + 1 <= max_order; ++schur) {
      for (int outer = 1; a + schur + outer <= max_order; ++outer) {
        terms_.push_back(HIndex{a, schur, outer});
      }
    }
  }
  coefficients_.reserve(terms_.size());
  for (const HIndex& h : terms_) {
    const double bound = sup_bound(h);
    coefficients_.push_back(std::pow(2.0, -h.order()) / std::sqrt(std::max(bound, 1e-300)));
  }
}

double PerturbationSpec::sup_bound(const HIndex& h) const {
  const SymMatrix& a = matrices_[h.a_index - 1];
  // |b|_F <= 1 bounds each entry by 1; for schur power 1 the sup is |a|_F
  // (Cauchy-Schwarz), for higher powers sum |b_ij|^p <= 1 gives the max
  // absolute entry of a.
  double base;
  if (h.schur_power == 1) {
    base = frobenius_norm(a);
  } else {
    base = a.mat().cwiseAbs().maxCoeff();
  }
  return std::pow(base, h.outer_power);
}

PerturbationX draw_perturbation_x(const PerturbationSpec& spec, std::uint64_t seed) {
  Rng rng = Rng::stream(seed, {0x9e27ULL});
  PerturbationX x;
  x.field_weights.reserve(spec.term_count());
  for (int i = 0; i < spec.term_count(); ++i) x.field_weights.push_back(rng.uniform(1.0, 2.0));
  for (int i = 0; i < spec.basis_size(); ++i) x.basis_weights.push_back(rng.uniform(1.0, 2.0));
  return x;
}

}  // namespace spingl
