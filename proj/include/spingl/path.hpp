#pragma once

#include <functional>
#include <vector>

#include "spingl/model.hpp"
#include "spingl/sym.hpp"

namespace spingl {

/// Piecewise-constant left-continuous increasing path [0,1] -> PSD cone:
/// value(l) on [s_{l-1}, s_l), and the last value at s = 1. Breakpoints are
/// strictly increasing from 0 to 1; values form a monotone PSD chain.
class ParisiPath {
 public:
  /// breakpoints = s_0 .. s_k (k+1 entries, first 0, last 1),
  /// values = q_1 .. q_k.
  ParisiPath(std::vector<double> breakpoints, std::vector<SymMatrix> values,
             double tol = 1e-10);

  static ParisiPath constant(const SymMatrix& q, double tol = 1e-10);

  int dim() const { return chain_.dim(); }
  int levels() const { return chain_.size(); }
  double tol() const { return chain_.tol(); }

  /// s_l for l in 0..k.
  double breakpoint(int l) const { return breakpoints_[l]; }
  const std::vector<double>& breakpoints() const { return breakpoints_; }
  /// q_l for l in 1..k.
  const SymMatrix& value(int l) const { return chain_[l - 1]; }
  const PsdChain& chain() const { return chain_; }

  /// Left-continuous evaluation.
  const SymMatrix& at(double s) const;

  /// sum_l (s_l - s_{l-1}) f(q_l), i.e. the integral of f along the path.
  double integrate(const std::function<double(const SymMatrix&)>& f) const;
  /// Integral of theta along the path.
  double theta_integral(const ModelXi& m) const;

  /// Same path with extra interior breakpoints inserted (duplicate levels);
  /// evaluates identically everywhere.
  ParisiPath refined(const std::vector<double>& extra_points) const;

  /// Entrywise map of the values (breakpoints unchanged). The map must
  /// preserve chain monotonicity, e.g. a gradient of an admissible model.
  ParisiPath mapped(const std::function<SymMatrix(const SymMatrix&)>& f) const;

 private:
  std::vector<double> breakpoints_;
  PsdChain chain_;
};

/// Pointwise sum on the common refinement of the two breakpoint sets.
ParisiPath path_sum(const ParisiPath& a, const ParisiPath& b, double scale_b = 1.0);

}  // namespace spingl
