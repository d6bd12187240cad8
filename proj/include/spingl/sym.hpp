#pragma once

#include <vector>

#include <Eigen/Core>

#include "spingl/errors.hpp"

namespace spingl {

/// Symmetric D x D matrix with the Frobenius inner product. Symmetrized at
/// construction so entries(i,j) == entries(j,i) holds exactly.
class SymMatrix {
 public:
  explicit SymMatrix(const Eigen::MatrixXd& m);
  explicit SymMatrix(int dim) : m_(Eigen::MatrixXd::Zero(dim, dim)) {}

  static SymMatrix zero(int dim) { return SymMatrix(dim); }
  static SymMatrix identity(int dim) { return SymMatrix(Eigen::MatrixXd::Identity(dim, dim)); }
  /// 1x1 convenience (scalar models are common in tests and examples).
  static SymMatrix scalar(double v);

  int dim() const { return static_cast<int>(m_.rows()); }
  double operator()(int i, int j) const { return m_(i, j); }
  const Eigen::MatrixXd& mat() const { return m_; }

  SymMatrix operator+(const SymMatrix& o) const;
  SymMatrix operator-(const SymMatrix& o) const;
  SymMatrix operator*(double c) const;

  /// Entrywise (Schur) power.
  SymMatrix schur_pow(int p) const;

  double trace() const { return m_.trace(); }
  double min_eigenvalue() const;
  double max_eigenvalue() const;

 private:
  Eigen::MatrixXd m_;
};

inline SymMatrix operator*(double c, const SymMatrix& a) { return a * c; }

/// a . b = sum_ij a_ij b_ij = tr(a b^T).
double frobenius_dot(const SymMatrix& a, const SymMatrix& b);
double frobenius_norm(const SymMatrix& a);

/// Loewner order: a >= b iff a - b is PSD, i.e. min eigenvalue of (a-b)
/// is at least -tol.
bool loewner_geq(const SymMatrix& a, const SymMatrix& b, double tol = 1e-10);

/// Frobenius-nearest PSD matrix: eigendecompose and clip negative
/// eigenvalues to zero. Idempotent.
SymMatrix psd_project(const SymMatrix& a);

/// Factor L with L L^T == a. Cholesky when positive definite, otherwise an
/// eigenvalue square root with clipped spectrum. Throws OrderViolation when
/// a is not PSD within tol.
Eigen::MatrixXd psd_factor(const SymMatrix& a, double tol = 1e-10);

/// Canonical orthonormal basis of the symmetric matrices: unit diagonal
/// matrices E_kk, then (e_k e_k'^T + e_k' e_k^T)/sqrt(2) for k < k' in
/// row-major order. Fixed choice keeps sampled fields reproducible.
class OrthoBasis {
 public:
  explicit OrthoBasis(int dim);
  int dim() const { return dim_; }
  int size() const { return static_cast<int>(elements_.size()); }
  const SymMatrix& element(int i) const { return elements_[i]; }
  const std::vector<SymMatrix>& elements() const { return elements_; }

 private:
  int dim_;
  std::vector<SymMatrix> elements_;
};

/// Ordered chain 0 <= q_1 <= ... <= q_k in the Loewner order, each entry PSD
/// within tol. Validated at construction; the error names the first
/// violating level and the offending eigenvalue.
class PsdChain {
 public:
  PsdChain(std::vector<SymMatrix> matrices, double tol = 1e-10);

  int dim() const { return matrices_.empty() ? 0 : matrices_.front().dim(); }
  int size() const { return static_cast<int>(matrices_.size()); }
  const SymMatrix& operator[](int l) const { return matrices_[l]; }
  const std::vector<SymMatrix>& matrices() const { return matrices_; }
  double tol() const { return tol_; }

 private:
  std::vector<SymMatrix> matrices_;
  double tol_;
};

}  // namespace spingl
