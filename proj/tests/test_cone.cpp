#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Core>

#include "spingl/rng.hpp"
#include "spingl/sym.hpp"

using namespace spingl;

namespace {

SymMatrix random_sym(int d, double scale, Rng& rng) {
  Eigen::MatrixXd m(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) m(i, j) = scale * rng.normal();
  return SymMatrix(m);
}

SymMatrix random_psd(int d, double scale, Rng& rng) {
  Eigen::MatrixXd l(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) l(i, j) = scale * rng.normal();
  return SymMatrix(l * l.transpose());
}

SymMatrix diag2(double a, double b) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(2, 2);
  m(0, 0) = a;
  m(1, 1) = b;
  return SymMatrix(m);
}

}  // namespace

TEST_CASE("frobenius dot") {
  CHECK(frobenius_dot(SymMatrix::identity(2), SymMatrix::identity(2)) == doctest::Approx(2.0));
  Rng rng(7);
  const SymMatrix a = random_sym(3, 1.0, rng);
  CHECK(frobenius_dot(a, SymMatrix::zero(3)) == 0.0);

  Eigen::MatrixXd am(2, 2), bm(2, 2);
  am << 1, 2, 2, 3;
  bm << 0, 1, 1, 0;
  CHECK(frobenius_dot(SymMatrix(am), SymMatrix(bm)) == doctest::Approx(4.0));
  CHECK(frobenius_dot(SymMatrix(am), SymMatrix(bm)) ==
        frobenius_dot(SymMatrix(bm), SymMatrix(am)));

  CHECK_THROWS_AS(frobenius_dot(SymMatrix::identity(2), SymMatrix::identity(3)), DimensionError);
}

TEST_CASE("loewner order") {
  CHECK(loewner_geq(SymMatrix::identity(2), SymMatrix::zero(2)));
  Rng rng(3);
  const SymMatrix a = random_sym(2, 1.0, rng);
  CHECK(loewner_geq(a, a));
  CHECK_FALSE(loewner_geq(diag2(1, 0), diag2(0, 1)));
}

TEST_CASE("loewner transitivity with tripled tolerance") {
  Rng rng(11);
  for (int t = 0; t < 50; ++t) {
    const SymMatrix c = random_psd(3, 0.7, rng);
    const SymMatrix b = c + random_psd(3, 0.7, rng);
    const SymMatrix a = b + random_psd(3, 0.7, rng);
    CHECK(loewner_geq(a, b, 1e-10));
    CHECK(loewner_geq(b, c, 1e-10));
    CHECK(loewner_geq(a, c, 3e-10));
  }
}

TEST_CASE("psd projection") {
  const SymMatrix kept = psd_project(diag2(2, 3));
  CHECK((kept.mat() - diag2(2, 3).mat()).norm() == doctest::Approx(0.0));
  const SymMatrix clipped = psd_project(diag2(-1, 1));
  CHECK((clipped.mat() - diag2(0, 1).mat()).norm() == doctest::Approx(0.0));
  CHECK(frobenius_norm(psd_project(SymMatrix::zero(2))) == 0.0);

  Rng rng(5);
  for (int t = 0; t < 100; ++t) {
    const SymMatrix a = random_sym(3, 1.5, rng);
    const SymMatrix once = psd_project(a);
    const SymMatrix twice = psd_project(once);
    CHECK((once.mat() - twice.mat()).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(once.min_eigenvalue() >= -1e-12);
  }
}

TEST_CASE("psd factor") {
  const Eigen::MatrixXd li = psd_factor(SymMatrix::identity(3));
  CHECK((li * li.transpose() - Eigen::MatrixXd::Identity(3, 3)).norm() <= 1e-12);

  const Eigen::MatrixXd ld = psd_factor(diag2(4, 9));
  CHECK((ld * ld.transpose() - diag2(4, 9).mat()).norm() <= 1e-12);

  Eigen::VectorXd v(2);
  v << 1, 1;
  const SymMatrix rank1{Eigen::MatrixXd(v * v.transpose())};
  const Eigen::MatrixXd lr = psd_factor(rank1);
  CHECK((lr * lr.transpose() - rank1.mat()).norm() <= 1e-10);

  CHECK_THROWS_AS(psd_factor(diag2(-1, 1)), OrderViolation);

  Rng rng(9);
  for (int t = 0; t < 50; ++t) {
    const SymMatrix a = random_psd(3, 1.0, rng);
    const Eigen::MatrixXd l = psd_factor(a);
    CHECK((l * l.transpose() - a.mat()).norm() <= 10 * 1e-10 * a.mat().norm() + 1e-12);
  }
}

TEST_CASE("psd self-duality") {
  Rng rng(13);
  for (int t = 0; t < 100; ++t) {
    const SymMatrix a = random_psd(3, 1.0, rng);
    const SymMatrix b = random_psd(3, 1.0, rng);
    CHECK(frobenius_dot(a, b) >= -1e-12);
  }
}

TEST_CASE("orthonormal basis") {
  for (int d : {1, 2, 3, 4}) {
    const OrthoBasis basis(d);
    CHECK(basis.size() == d * (d + 1) / 2);
    for (int i = 0; i < basis.size(); ++i) {
      for (int j = 0; j < basis.size(); ++j) {
        const double expected = (i == j) ? 1.0 : 0.0;
        CHECK(std::abs(frobenius_dot(basis.element(i), basis.element(j)) - expected) <= 1e-12);
      }
    }
  }
}

TEST_CASE("orthonormal basis reconstructs symmetric matrices") {
  Rng rng(17);
  const OrthoBasis basis(3);
  for (int t = 0; t < 50; ++t) {
    const SymMatrix a = random_sym(3, 2.0, rng);
    SymMatrix rebuilt = SymMatrix::zero(3);
    for (int i = 0; i < basis.size(); ++i) {
      rebuilt = rebuilt + basis.element(i) * frobenius_dot(basis.element(i), a);
    }
    CHECK((rebuilt.mat() - a.mat()).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("psd chain validation") {
  Rng rng(23);
  const SymMatrix q1 = random_psd(2, 0.5, rng);
  const SymMatrix q2 = q1 + random_psd(2, 0.5, rng);
  CHECK_NOTHROW(PsdChain({q1, q2}));

  CHECK_THROWS_AS(PsdChain({q2, q1}), OrderViolation);
  CHECK_THROWS_AS(PsdChain({diag2(-1, 1)}), OrderViolation);
  try {
    PsdChain({q2, q1});
  } catch (const OrderViolation& e) {
    CHECK(std::string(e.what()).find("level") != std::string::npos);
    CHECK(std::string(e.what()).find("eigenvalue") != std::string::npos);
  }
}
