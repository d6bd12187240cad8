#pragma once

#include <cstdint>
#include <vector>

#include "spingl/sym.hpp"

namespace spingl {

/// One perturbation field index h = (h1, h2, h3): matrix a_{h1} from the
/// fixed rational-PSD enumeration, Schur power h2 of the overlap, outer
/// power h3 of the contraction.
struct HIndex {
  int a_index = 1;
  int schur_power = 1;
  int outer_power = 1;
  int order() const { return a_index + schur_power + outer_power; }
};

/// Fixed enumeration of rational PSD matrices with Frobenius norm <= 1:
/// identity/dim first, then v v^T / |v|^2 for integer vectors v ordered by
/// max coordinate then lexicographically (first nonzero positive, gcd 1),
/// then the same list at scales 1/2, 1/4, ... Duplicates are skipped.
std::vector<SymMatrix> rational_psd_enumeration(int dim, int count);

/// All h with h_i >= 1 and |h| <= max_order, with coefficients c_h chosen so
/// that c_h^2 sup_{|b|<=1} (a . b^{schur})^{outer} <= 2^{-2|h|}, and the
/// overall N^{-exponent} scale.
class PerturbationSpec {
 public:
  PerturbationSpec(int dim, int max_order, double exponent = 1.0 / 16.0);

  int dim() const { return dim_; }
  int max_order() const { return max_order_; }
  double exponent() const { return exponent_; }
  int term_count() const { return static_cast<int>(terms_.size()); }
  const std::vector<HIndex>& terms() const { return terms_; }
  const SymMatrix& matrix(const HIndex& h) const { return matrices_[h.a_index - 1]; }
  double coefficient(int term) const { return coefficients_[term]; }
  /// Rigorous bound on sup_{|b|_F <= 1} (a_{h1} . b^{(.h2)})^{h3}.
  double sup_bound(const HIndex& h) const;
  int basis_size() const { return dim_ * (dim_ + 1) / 2; }

 private:
  int dim_;
  int max_order_;
  double exponent_;
  std::vector<SymMatrix> matrices_;
  std::vector<HIndex> terms_;
  std::vector<double> coefficients_;
};

/// One draw of the perturbation parameters, i.i.d. uniform on [1,2].
struct PerturbationX {
  std::vector<double> field_weights;  // x_h, aligned with spec.terms()
  std::vector<double> basis_weights;  // x_i for the g_i half
};

PerturbationX draw_perturbation_x(const PerturbationSpec& spec, std::uint64_t seed);

}  // namespace spingl
