#include "spingl/sym.hpp"

#include <cmath>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

namespace spingl {

namespace {

void check_same_dim(const SymMatrix& a, const SymMatrix& b, const char* op) {
  if (a.dim() != b.dim()) {
    throw DimensionError(std::string(op) + ": dimension mismatch " +
                         std::to_string(a.dim()) + " vs " + std::to_string(b.dim()));
  }
}

}  // namespace

SymMatrix::SymMatrix(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) {
    throw DimensionError("SymMatrix: input is " + std::to_string(m.rows()) + "x" +
                         std::to_string(m.cols()));
  }
  m_ = 0.5 * (m + m.transpose());
}

SymMatrix SymMatrix::scalar(double v) {
  Eigen::MatrixXd m(1, 1);
  m(0, 0) = v;
  return SymMatrix(m);
}

SymMatrix SymMatrix::operator+(const SymMatrix& o) const {
  check_same_dim(*this, o, "operator+");
  return SymMatrix(m_ + o.m_);
}

SymMatrix SymMatrix::operator-(const SymMatrix& o) const {
  check_same_dim(*this, o, "operator-");
  return SymMatrix(m_ - o.m_);
}

SymMatrix SymMatrix::operator*(double c) const { return SymMatrix(m_ * c); }

SymMatrix SymMatrix::schur_pow(int p) const {
  Eigen::MatrixXd out = m_;
  for (int i = 0; i < dim(); ++i)
    for (int j = 0; j < dim(); ++j) out(i, j) = std::pow(m_(i, j), p);
  return SymMatrix(out);
}

double SymMatrix::min_eigenvalue() const {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m_, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");
  return es.eigenvalues().minCoeff();
}

double SymMatrix::max_eigenvalue() const {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m_, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");
  return es.eigenvalues().maxCoeff();
}

double frobenius_dot(const SymMatrix& a, const SymMatrix& b) {
  check_same_dim(a, b, "frobenius_dot");
  return a.mat().cwiseProduct(b.mat()).sum();
}

double frobenius_norm(const SymMatrix& a) { return a.mat().norm(); }

bool loewner_geq(const SymMatrix& a, const SymMatrix& b, double tol) {
  check_same_dim(a, b, "loewner_geq");
  return (a - b).min_eigenvalue() >= -tol;
}

SymMatrix psd_project(const SymMatrix& a) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a.mat());
  if (es.info() != Eigen::Success) {
    throw NumericalError("psd_project: eigendecomposition failed for matrix of dim " +
                         std::to_string(a.dim()));
  }
  if (es.eigenvalues().minCoeff() >= 0.0) return a;
  Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0);
  return SymMatrix(es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose());
}

Eigen::MatrixXd psd_factor(const SymMatrix& a, double tol) {
  // Try Cholesky first; rank-deficient or marginal matrices fall through to
  // the eigenvalue square root.
  Eigen::LLT<Eigen::MatrixXd> llt(a.mat());
  if (llt.info() == Eigen::Success) {
    Eigen::MatrixXd l = llt.matrixL();
    if ((l * l.transpose() - a.mat()).norm() <= 10 * tol * a.mat().norm() + 1e-12) return l;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a.mat());
  if (es.info() != Eigen::Success) {
    throw NumericalError("psd_factor: eigendecomposition failed for matrix of dim " +
                         std::to_string(a.dim()));
  }
  const double min_ev = es.eigenvalues().minCoeff();
  if (min_ev < -tol) {
    throw OrderViolation("psd_factor: matrix not PSD within tol, min eigenvalue " +
                         std::to_string(min_ev));
  }
  Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal();
}

OrthoBasis::OrthoBasis(int dim) : dim_(dim) {
  if (dim < 1) throw DimensionError("OrthoBasis: dim must be positive");
  elements_.reserve(dim * (dim + 1) / 2);
  for (int k = 0; k < dim; ++k) {
    Eigen::MatrixXd e = Eigen::MatrixXd::Zero(dim, dim);
    e(k, k) = 1.0;
    elements_.emplace_back(e);
  }
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  for (int k = 0; k < dim; ++k) {
    for (int kp = k + 1; kp < dim; ++kp) {
      Eigen::MatrixXd e = Eigen::MatrixXd::Zero(dim, dim);
      e(k, kp) = inv_sqrt2;
      e(kp, k) = inv_sqrt2;
      elements_.emplace_back(e);
    }
  }
}

PsdChain::PsdChain(std::vector<SymMatrix> matrices, double tol)
    : matrices_(std::move(matrices)), tol_(tol) {
  if (tol < 0) throw DimensionError("PsdChain: tol must be nonnegative");
  for (std::size_t l = 0; l < matrices_.size(); ++l) {
    if (matrices_[l].dim() != matrices_.front().dim()) {
      throw DimensionError("PsdChain: mixed dimensions at level " + std::to_string(l + 1));
    }
    const double ev = matrices_[l].min_eigenvalue();
    if (ev < -tol_) {
      throw OrderViolation("PsdChain: level " + std::to_string(l + 1) +
                           " not PSD, min eigenvalue " + std::to_string(ev));
    }
    if (l > 0) {
      const double dev = (matrices_[l] - matrices_[l - 1]).min_eigenvalue();
      if (dev < -tol_) {
        throw OrderViolation("PsdChain: levels " + std::to_string(l) + " -> " +
                             std::to_string(l + 1) + " not monotone, min eigenvalue " +
                             std::to_string(dev));
      }
    }
  }
}

}  // namespace spingl
