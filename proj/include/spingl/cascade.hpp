#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "spingl/model.hpp"
#include "spingl/path.hpp"
#include "spingl/quadrature.hpp"

namespace spingl {

/// One level of the nested Gaussian recursion: an increment with the given
/// covariance, integrated out with a log-moment reweighting.
struct CascadeLevel {
  Eigen::MatrixXd transform;  // factor L with L L^T = increment covariance
  bool degenerate = false;    // increment is numerically zero: skip integration
};

/// Core recursion shared by every cascade functional. With increments
/// z_1..z_k (z_l ~ N(0, C_l)) and exponents s_1..s_{k-1}:
///   X_k = innermost(z_1 + ... + z_k),
///   X_l = (1/s_l) log E_{z_{l+1}} exp(s_l X_{l+1}),   l = k-1 .. 1,
///   X_0 = E_{z_1} X_1.
/// Returns X_0. Expectations are realized per the quadrature spec;
/// evaluation order is fixed, so results are deterministic given the seed.
double cascade_expectation(const std::vector<CascadeLevel>& levels,
                           std::span<const double> exponents,
                           const std::function<double(const Eigen::VectorXd&)>& innermost,
                           const QuadratureSpec& quad);

/// Builds the levels from a list of increment covariances, checking each is
/// PSD within tol and marking numerically-zero increments as degenerate.
std::vector<CascadeLevel> make_cascade_levels(const std::vector<SymMatrix>& increments,
                                              double tol);

/// The cascade term of the Parisi functional: increments are the gradient
/// steps C_1 = grad xi(q_1), C_l = grad xi(q_l) - grad xi(q_{l-1}); the
/// innermost function integrates the spin measure against
///   exp(z . tau - (1/2) grad xi(q_k) . tau tau^T + tilt . tau tau^T).
double rsb_recursion(const ModelXi& m, const SpinMeasure& p1, const ParisiPath& path,
                     const SymMatrix& tilt, const QuadratureSpec& quad);

/// rsb_recursion plus the half-integral of theta along the path.
double parisi_functional(const ModelXi& m, const SpinMeasure& p1, const ParisiPath& path,
                         const SymMatrix& tilt, const QuadratureSpec& quad);
double parisi_functional(const ModelXi& m, const SpinMeasure& p1, const ParisiPath& path,
                         const QuadratureSpec& quad);

/// Free energy of a spin in a cascade field whose covariance path is mu
/// itself (no gradient composition), with the matching variance correction:
///   E log integral exp(w . tau - (1/2) mu(1) . tau tau^T) dP1 d(cascade).
double psi_enriched(const ModelXi& m, const SpinMeasure& p1, const ParisiPath& mu,
                    const QuadratureSpec& quad);

/// Truncated Poisson-Dirichlet cascade: for each internal node at depth
/// l-1 (l = 1..k-1), the M largest points of the Poisson process with
/// intensity s_l x^{-1-s_l}, globally normalized over the leaves.
class CascadeWeights {
 public:
  CascadeWeights(std::vector<double> exponents, int leaves_per_node,
                 std::vector<std::vector<double>> log_points, bool truncation_warning);

  int depth() const { return static_cast<int>(exponents_.size()); }
  int leaves_per_node() const { return leaves_per_node_; }
  const std::vector<double>& exponents() const { return exponents_; }
  bool truncation_warning() const { return truncation_warning_; }

  /// Number of leaves, M^depth.
  std::int64_t leaf_count() const;
  /// Normalized leaf weights in lexicographic order of the index tuples.
  const std::vector<double>& leaf_weights() const { return leaf_weights_; }
  /// Depth of the deepest common ancestor of two leaves (0 = branch at root).
  int ancestor_depth(std::int64_t leaf_a, std::int64_t leaf_b) const;
  /// Mixed-radix digits (depth entries) of a leaf index.
  std::vector<int> leaf_digits(std::int64_t leaf) const;

  /// Probability that two independent draws from the leaf weights branch at
  /// depth < d, i.e. their path overlap lies below breakpoint s_d.
  double branch_probability_below(int d) const;

 private:
  std::vector<double> exponents_;
  int leaves_per_node_;
  std::vector<std::vector<double>> log_points_;  // per depth, raw log weights
  std::vector<double> leaf_weights_;
  bool truncation_warning_;
};

/// Samples the weight tree for the path's interior breakpoints
/// (s_1..s_{k-1}); requires k >= 2 and at least 16 leaves per node.
CascadeWeights sample_cascade_weights(const ParisiPath& path, int leaves_per_node,
                                      std::uint64_t seed);

}  // namespace spingl
