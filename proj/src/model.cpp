#include "spingl/model.hpp"

#include <cmath>
#include <string>

#include "spingl/rng.hpp"

namespace spingl {

ModelXi::ModelXi(int dim, std::vector<XiTerm> terms) : dim_(dim), terms_(std::move(terms)) {
  if (dim < 1) throw DimensionError("ModelXi: dim must be positive");
  for (std::size_t t = 0; t < terms_.size(); ++t) {
    const XiTerm& term = terms_[t];
    if (term.coeff.dim() != dim) {
      throw DimensionError("ModelXi: term " + std::to_string(t) + " has dim " +
                           std::to_string(term.coeff.dim()));
    }
    if (term.power < 1 || (term.power != 1 && term.power % 2 != 0)) {
      throw UnsupportedModel("ModelXi: power " + std::to_string(term.power) +
                             " must be 1 or even (odd powers break convexity)");
    }
    if (term.coeff.mat().minCoeff() < 0.0) {
      throw UnsupportedModel("ModelXi: term " + std::to_string(t) +
                             " has a negative coefficient entry");
    }
    const double ev = term.coeff.min_eigenvalue();
    if (ev < -1e-10) {
      throw OrderViolation("ModelXi: term " + std::to_string(t) +
                           " coefficient not PSD, min eigenvalue " + std::to_string(ev));
    }
  }
}

double ModelXi::value(const SymMatrix& a) const {
  if (a.dim() != dim_) throw DimensionError("ModelXi::value: dimension mismatch");
  double v = 0.0;
  for (const XiTerm& t : terms_) v += frobenius_dot(t.coeff, a.schur_pow(t.power));
  return v;
}

SymMatrix ModelXi::gradient(const SymMatrix& a) const {
  if (a.dim() != dim_) throw DimensionError("ModelXi::gradient: dimension mismatch");
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(dim_, dim_);
  for (const XiTerm& t : terms_) {
    if (t.power == 1) {
      g += t.coeff.mat();
    } else {
      g += t.power * t.coeff.mat().cwiseProduct(a.schur_pow(t.power - 1).mat());
    }
  }
  return SymMatrix(g);
}

double ModelXi::theta(const SymMatrix& a) const {
  if (a.dim() != dim_) throw DimensionError("ModelXi::theta: dimension mismatch");
  double v = 0.0;
  for (const XiTerm& t : terms_) {
    if (t.power == 1) continue;  // linear terms cancel
    v += (t.power - 1) * frobenius_dot(t.coeff, a.schur_pow(t.power));
  }
  return v;
}

bool ModelXi::has_superlinear_term() const {
  for (const XiTerm& t : terms_)
    if (t.power >= 2) return true;
  return false;
}

double ModelXi::superlinear_scale() const {
  double s = 0.0;
  for (const XiTerm& t : terms_)
    if (t.power >= 2) s = std::max(s, t.coeff.max_eigenvalue());
  return s;
}

double ModelXi::lipschitz_bound() const {
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(dim_, dim_);
  for (const XiTerm& t : terms_) g += t.power * t.coeff.mat();
  return g.norm();
}

SpinMeasure::SpinMeasure(int dim, std::vector<SpinAtom> atoms)
    : dim_(dim), atoms_(std::move(atoms)) {
  if (dim < 1) throw DimensionError("SpinMeasure: dim must be positive");
  if (atoms_.empty()) throw ConfigError("SpinMeasure: no atoms");
  double total = 0.0;
  for (std::size_t i = 0; i < atoms_.size(); ++i) {
    const SpinAtom& a = atoms_[i];
    if (a.site.size() != dim) {
      throw DimensionError("SpinMeasure: atom " + std::to_string(i) + " has dim " +
                           std::to_string(a.site.size()));
    }
    if (a.weight <= 0.0) {
      throw ConfigError("SpinMeasure: atom " + std::to_string(i) + " has nonpositive weight");
    }
    if (a.site.norm() > 1.0 + 1e-12) {
      throw ConfigError("SpinMeasure: atom " + std::to_string(i) +
                        " lies outside the unit ball, |tau| = " + std::to_string(a.site.norm()));
    }
    total += a.weight;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw ConfigError("SpinMeasure: weights sum to " + std::to_string(total));
  }
}

double SpinMeasure::max_self_trace() const {
  double best = 0.0;
  for (const SpinAtom& a : atoms_) best = std::max(best, a.site.squaredNorm());
  return best;
}

ConjugateResult xi_conjugate(const ModelXi& m, const SymMatrix& y, const ConjugateOptions& opts) {
  if (y.dim() != m.dim()) throw DimensionError("xi_conjugate: dimension mismatch");
  if (!m.has_superlinear_term()) {
    throw UnsupportedModel("xi_conjugate: model has no p >= 2 term, conjugate can be infinite");
  }

  auto objective = [&](const SymMatrix& x) { return frobenius_dot(x, y) - m.value(x); };

  SymMatrix x = psd_project(y) * (1.0 / (2.0 * std::max(1.0, m.superlinear_scale())));
  double fx = objective(x);
  double step = 1.0;
  ConjugateResult res;

  int it = 0;
  for (; it < opts.max_iterations; ++it) {
    const SymMatrix grad = SymMatrix(y.mat() - m.gradient(x).mat());
    bool moved = false;
    while (step > 1e-16) {
      const SymMatrix cand = psd_project(x + grad * step);
      const double fc = objective(cand);
      const double gain = frobenius_dot(cand - x, grad);
      if (fc >= fx + 1e-4 * gain && fc > fx - 1e-18) {
        const double displacement = frobenius_norm(cand - x);
        x = cand;
        fx = fc;
        moved = true;
        if (displacement / step <= opts.grad_tol) {
          res.converged = true;
        }
        step *= 1.5;
        break;
      }
      step *= 0.5;
    }
    if (res.converged || !moved) {
      // Not moving with a tiny step means the projected gradient vanishes.
      if (!moved) res.converged = true;
      break;
    }
    if (frobenius_norm(x) > 1e8) break;  // diverging: conjugate likely infinite here
  }

  res.value = fx;
  res.argmax = x;
  res.iterations = it;
  return res;
}

AssumptionReport validate_assumptions(const ModelXi& m, int trials, std::uint64_t seed) {
  AssumptionReport report;
  report.trials = trials;
  Rng rng = Rng::stream(seed, {0x5ca1eull});
  const int d = m.dim();

  auto random_gram = [&](double scale) {
    Eigen::MatrixXd l(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) l(i, j) = scale * rng.normal();
    return SymMatrix(l * l.transpose());
  };
  auto random_sym = [&](double scale) {
    Eigen::MatrixXd a(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) a(i, j) = scale * rng.normal();
    return SymMatrix(a);
  };

  for (int t = 0; t < trials; ++t) {
    const SymMatrix b = random_gram(0.5);
    const SymMatrix a = b + random_gram(0.5);  // a >= b by construction
    if (m.value(a) < m.value(b) - 1e-10) ++report.value_monotonicity_failures;
    if (!loewner_geq(m.gradient(a), m.gradient(b), 1e-8)) ++report.gradient_order_failures;

    const SymMatrix u = random_sym(0.7);
    const SymMatrix v = random_sym(0.7);
    const double mid = m.value((u + v) * 0.5);
    if (mid > 0.5 * (m.value(u) + m.value(v)) + 1e-9) ++report.midpoint_convexity_failures;

    if (std::abs(m.value(u) - m.value(SymMatrix(u.mat().transpose()))) > 1e-12)
      ++report.transpose_symmetry_failures;
  }
  return report;
}

}  // namespace spingl
