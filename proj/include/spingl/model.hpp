#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "spingl/sym.hpp"

namespace spingl {

/// One Hadamard-power term: coeff . a^{(.p)} where ^{(.p)} is the entrywise
/// power. The coefficient must be PSD with nonnegative entries; the power
/// must be 1 or even, which makes the whole function convex on the full
/// matrix space.
struct XiTerm {
  int power;
  SymMatrix coeff;
};

/// Mixed Hadamard-power covariance function
///   xi(a) = sum_p A_p . a^{(.p)}
/// together with its gradient and the Legendre-type weight
///   theta(a) = a . grad xi(a) - xi(a) = sum_p (p-1) A_p . a^{(.p)}.
class ModelXi {
 public:
  ModelXi(int dim, std::vector<XiTerm> terms);

  int dim() const { return dim_; }
  const std::vector<XiTerm>& terms() const { return terms_; }

  double value(const SymMatrix& a) const;
  SymMatrix gradient(const SymMatrix& a) const;
  double theta(const SymMatrix& a) const;

  bool has_superlinear_term() const;
  /// Largest eigenvalue over the coefficients of the p >= 2 terms; used to
  /// scale conjugate-solver step sizes.
  double superlinear_scale() const;
  /// Bound on |grad xi| over {|a|_F <= 1}: Frobenius norm of sum_p p A_p.
  double lipschitz_bound() const;

 private:
  int dim_;
  std::vector<XiTerm> terms_;
};

/// Finitely supported single-spin distribution on the unit ball.
struct SpinAtom {
  Eigen::VectorXd site;
  double weight;
};

class SpinMeasure {
 public:
  SpinMeasure(int dim, std::vector<SpinAtom> atoms);

  int dim() const { return dim_; }
  int size() const { return static_cast<int>(atoms_.size()); }
  const SpinAtom& atom(int i) const { return atoms_[i]; }
  const std::vector<SpinAtom>& atoms() const { return atoms_; }

  /// max_atoms tr(tau tau^T) = max |tau|^2; the trace cap used when the
  /// minimizing path's endpoint is restricted to the convex hull of the
  /// atom outer products.
  double max_self_trace() const;

 private:
  int dim_;
  std::vector<SpinAtom> atoms_;
};

struct ConjugateOptions {
  int max_iterations = 10000;
  double grad_tol = 1e-9;
};

/// Result of the cone-restricted convex conjugate
///   xi*(y) = sup_{x PSD} { x.y - xi(x) }.
struct ConjugateResult {
  double value = 0.0;
  SymMatrix argmax{1};
  bool converged = false;
  int iterations = 0;
};

/// Projected gradient ascent of the concave objective x.y - xi(x) over the
/// PSD cone. Requires a p >= 2 term, otherwise the sup can be infinite.
ConjugateResult xi_conjugate(const ModelXi& m, const SymMatrix& y,
                             const ConjugateOptions& opts = {});

struct AssumptionReport {
  int trials = 0;
  int value_monotonicity_failures = 0;
  int gradient_order_failures = 0;
  int midpoint_convexity_failures = 0;
  int transpose_symmetry_failures = 0;
  bool all_passed() const {
    return value_monotonicity_failures == 0 && gradient_order_failures == 0 &&
           midpoint_convexity_failures == 0 && transpose_symmetry_failures == 0;
  }
};

/// Randomized check of the standing assumptions: monotonicity of xi and
/// grad xi along the Loewner order on the cone, midpoint convexity on the
/// full space, and transpose symmetry. Report-only.
AssumptionReport validate_assumptions(const ModelXi& m, int trials, std::uint64_t seed);

}  // namespace spingl
