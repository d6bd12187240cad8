#pragma once

#include <cstdint>
#include <vector>

#include "spingl/errors.hpp"

namespace spingl {

/// Nodes and weights for E[g(Z)], Z standard normal: sum_i w_i g(x_i).
/// Weights are positive and sum to one.
struct GaussHermiteRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Probabilists' Gauss-Hermite rule of order n via Golub-Welsch.
GaussHermiteRule gauss_hermite(int n);

/// How Gaussian expectations inside the cascade recursion are realized.
struct QuadratureSpec {
  enum class Mode { GaussHermite, MonteCarlo };

  Mode mode = Mode::GaussHermite;
  int nodes_per_dim = 40;
  int samples = 0;
  std::uint64_t seed = 0;

  static QuadratureSpec gh(int nodes) {
    if (nodes < 2) throw DimensionError("QuadratureSpec: need at least 2 nodes per dim");
    QuadratureSpec q;
    q.mode = Mode::GaussHermite;
    q.nodes_per_dim = nodes;
    return q;
  }

  static QuadratureSpec mc(int samples, std::uint64_t seed) {
    if (samples < 1) throw DimensionError("QuadratureSpec: need at least 1 sample");
    QuadratureSpec q;
    q.mode = Mode::MonteCarlo;
    q.samples = samples;
    q.seed = seed;
    return q;
  }

  /// GH with 40 nodes per dim for scalar state, 20 for 2x2. Beyond that the
  /// tensor grid grows too fast and Monte Carlo takes over.
  static QuadratureSpec default_for(int dim, std::uint64_t seed = 0) {
    if (dim <= 1) return gh(40);
    if (dim == 2) return gh(20);
    return mc(4000, seed);
  }
};

}  // namespace spingl
