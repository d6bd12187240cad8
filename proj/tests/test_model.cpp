#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "spingl/model.hpp"
#include "spingl/rng.hpp"

using namespace spingl;

namespace {

ModelXi scalar_model(double b, int p = 2) {
  return ModelXi(1, {XiTerm{p, SymMatrix::scalar(b)}});
}

ModelXi two_dim_model() {
  Eigen::MatrixXd a1(2, 2), a2(2, 2);
  a1 << 0.2, 0.1, 0.1, 0.2;
  a2 << 0.3, 0.15, 0.15, 0.3;
  return ModelXi(2, {XiTerm{1, SymMatrix(a1)}, XiTerm{2, SymMatrix(a2)}});
}

SymMatrix random_psd(int d, double scale, Rng& rng) {
  Eigen::MatrixXd l(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) l(i, j) = scale * rng.normal();
  return SymMatrix(l * l.transpose());
}

SymMatrix random_sym(int d, double scale, Rng& rng) {
  Eigen::MatrixXd m(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) m(i, j) = scale * rng.normal();
  return SymMatrix(m);
}

SpinMeasure ising() {
  Eigen::VectorXd up(1), down(1);
  up << 1.0;
  down << -1.0;
  return SpinMeasure(1, {{up, 0.5}, {down, 0.5}});
}

}  // namespace

TEST_CASE("xi evaluation") {
  const ModelXi sk = scalar_model(1.0);
  CHECK(sk.value(SymMatrix::scalar(0.0)) == 0.0);

  const double beta2 = 0.25;
  const ModelXi skb = scalar_model(beta2);
  CHECK(skb.value(SymMatrix::scalar(0.7)) == doctest::Approx(beta2 * 0.49));

  Eigen::MatrixXd ones(2, 2);
  ones << 1, 1, 1, 1;
  const ModelXi m2(2, {XiTerm{2, SymMatrix(ones)}});
  CHECK(m2.value(SymMatrix::identity(2)) == doctest::Approx(2.0));
}

TEST_CASE("xi gradient closed form and finite differences") {
  const double b = 0.25;
  const ModelXi sk = scalar_model(b);
  CHECK(sk.gradient(SymMatrix::scalar(0.6))(0, 0) == doctest::Approx(2 * b * 0.6));
  CHECK(frobenius_norm(sk.gradient(SymMatrix::scalar(0.0))) == 0.0);

  const ModelXi m = two_dim_model();
  Rng rng(41);
  const double h = 1e-5;
  for (int t = 0; t < 100; ++t) {
    const SymMatrix a = random_sym(2, 0.5, rng);
    const SymMatrix dir = random_sym(2, 0.5, rng);
    const double fd = (m.value(a + dir * h) - m.value(a - dir * h)) / (2 * h);
    const double exact = frobenius_dot(dir, m.gradient(a));
    CHECK(std::abs(fd - exact) <= 1e-6 * std::max(1.0, std::abs(exact)));
  }
}

TEST_CASE("theta closed form") {
  const double b = 0.16;
  const ModelXi sk = scalar_model(b);
  CHECK(sk.theta(SymMatrix::scalar(0.5)) == doctest::Approx(b * 0.25));
  CHECK(sk.theta(SymMatrix::scalar(0.0)) == 0.0);

  const ModelXi lin(1, {XiTerm{1, SymMatrix::scalar(0.8)}});
  CHECK(lin.theta(SymMatrix::scalar(0.9)) == 0.0);

  const ModelXi m = two_dim_model();
  Rng rng(43);
  for (int t = 0; t < 50; ++t) {
    const SymMatrix a = random_sym(2, 0.8, rng);
    const double direct = frobenius_dot(a, m.gradient(a)) - m.value(a);
    CHECK(std::abs(m.theta(a) - direct) <= 1e-12);
  }
}

TEST_CASE("theta nonnegative on the cone") {
  const ModelXi m = two_dim_model();
  Rng rng(47);
  for (int t = 0; t < 100; ++t) {
    CHECK(m.theta(random_psd(2, 0.8, rng)) >= -1e-12);
  }
}

TEST_CASE("xi monotone along psd increments") {
  const ModelXi m = two_dim_model();
  Rng rng(53);
  for (int t = 0; t < 100; ++t) {
    const SymMatrix b = random_psd(2, 0.7, rng);
    const SymMatrix c = random_psd(2, 0.7, rng);
    CHECK(m.value(b + c) >= m.value(b) - 1e-12);
  }
}

TEST_CASE("conjugate: scalar calculus oracle") {
  const double b = 0.3;
  const ModelXi m = scalar_model(b);
  for (double y : {0.1, 0.5, 1.3}) {
    const ConjugateResult r = xi_conjugate(m, SymMatrix::scalar(y));
    CHECK(r.converged);
    CHECK(r.value == doctest::Approx(y * y / (4 * b)).epsilon(1e-8));
    CHECK(r.argmax(0, 0) == doctest::Approx(y / (2 * b)).epsilon(1e-6));
  }

  const ConjugateResult zero = xi_conjugate(m, SymMatrix::scalar(0.0));
  CHECK(zero.value == doctest::Approx(0.0));
  CHECK(frobenius_norm(zero.argmax) <= 1e-12);
}

TEST_CASE("conjugate: grid cross-check in two dimensions") {
  const ModelXi m(2, {XiTerm{2, SymMatrix::identity(2)}});  // xi(x) = x11^2 + x22^2
  Eigen::MatrixXd ym(2, 2);
  ym << 0.8, 0.0, 0.0, 0.5;
  const SymMatrix y(ym);
  const ConjugateResult r = xi_conjugate(m, y);

  double best = -1e30;  // diagonal grid search
  for (double x1 = 0.0; x1 <= 2.0; x1 += 1e-3) {
    for (double x2 = 0.0; x2 <= 2.0; x2 += 1e-3) {
      best = std::max(best, x1 * 0.8 + x2 * 0.5 - x1 * x1 - x2 * x2);
    }
  }
  CHECK(r.value == doctest::Approx(best).epsilon(1e-4));
}

TEST_CASE("conjugate duality identity") {
  const ModelXi sk = scalar_model(0.25);
  const ModelXi m2 = two_dim_model();
  Rng rng(59);
  for (int t = 0; t < 100; ++t) {
    const SymMatrix x1 = random_psd(1, 0.7, rng);
    const ConjugateResult r1 = xi_conjugate(sk, sk.gradient(x1));
    CHECK(std::abs(r1.value - sk.theta(x1)) <= 1e-6);

    const SymMatrix x2 = random_psd(2, 0.6, rng);
    const ConjugateResult r2 = xi_conjugate(m2, m2.gradient(x2));
    CHECK(std::abs(r2.value - m2.theta(x2)) <= 1e-6);
  }
}

TEST_CASE("conjugate requires a superlinear term") {
  const ModelXi lin(1, {XiTerm{1, SymMatrix::scalar(1.0)}});
  CHECK_THROWS_AS(xi_conjugate(lin, SymMatrix::scalar(1.0)), UnsupportedModel);
}

TEST_CASE("model construction rejects bad terms") {
  Eigen::MatrixXd neg(2, 2);
  neg << 1.0, -0.2, -0.2, 1.0;  // PSD but negative entry
  CHECK_THROWS_AS(ModelXi(2, {XiTerm{2, SymMatrix(neg)}}), UnsupportedModel);
  CHECK_THROWS_AS(ModelXi(1, {XiTerm{3, SymMatrix::scalar(1.0)}}), UnsupportedModel);
  CHECK_NOTHROW(ModelXi(1, {XiTerm{4, SymMatrix::scalar(1.0)}}));

  Eigen::MatrixXd npsd(2, 2);
  npsd << 1.0, 2.0, 2.0, 1.0;  // entrywise fine, eigenvalue -1
  CHECK_THROWS_AS(ModelXi(2, {XiTerm{2, SymMatrix(npsd)}}), OrderViolation);
}

TEST_CASE("assumption validation passes on admissible models") {
  CHECK(validate_assumptions(scalar_model(0.25), 200, 1).all_passed());
  CHECK(validate_assumptions(two_dim_model(), 200, 2).all_passed());
  const ModelXi quartic(1, {XiTerm{4, SymMatrix::scalar(0.4)}});
  CHECK(validate_assumptions(quartic, 200, 3).all_passed());
}

TEST_CASE("spin measure invariants") {
  Eigen::VectorXd up(1), down(1);
  up << 1.0;
  down << -1.0;
  CHECK_THROWS_AS(SpinMeasure(1, {{up, 0.6}, {down, 0.6}}), ConfigError);
  Eigen::VectorXd big(1);
  big << 1.5;
  CHECK_THROWS_AS(SpinMeasure(1, {{big, 1.0}}), ConfigError);
  CHECK(ising().max_self_trace() == doctest::Approx(1.0));
}

TEST_CASE("scalar oracle self-check") {
  // E log cosh of a tiny Gaussian ~ variance/2
  const double v = oracles::gaussian_mean([](double z) { return std::log(std::cosh(z)); }, 1e-6);
  CHECK(v == doctest::Approx(5e-7).epsilon(1e-3));
  CHECK(oracles::scalar_rs_value(0.25, 0.0) == doctest::Approx(0.0));
}
