#include "spingl/quadrature.hpp"

#include <cmath>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

namespace spingl {

GaussHermiteRule gauss_hermite(int n) {
  if (n < 1) throw DimensionError("gauss_hermite: order must be positive");
  // Jacobi matrix of the probabilists' Hermite recurrence: zero diagonal,
  // off-diagonal sqrt(i). Eigenvalues are the nodes, squared first
  // eigenvector components the weights.
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
  for (int i = 1; i < n; ++i) {
    const double b = std::sqrt(static_cast<double>(i));
    jacobi(i, i - 1) = b;
    jacobi(i - 1, i) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jacobi);
  if (es.info() != Eigen::Success) throw NumericalError("gauss_hermite: eigensolver failed");

  GaussHermiteRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    rule.nodes[i] = es.eigenvalues()[i];
    const double w = es.eigenvectors()(0, i) * es.eigenvectors()(0, i);
    rule.weights[i] = w;
    total += w;
  }
  for (double& w : rule.weights) w /= total;
  return rule;
}

}  // namespace spingl
