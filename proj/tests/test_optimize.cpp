#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "spingl/nelder_mead.hpp"
#include "spingl/optimize.hpp"
#include "spingl/rng.hpp"

using namespace spingl;

namespace {

ModelXi scalar_model(double b) { return ModelXi(1, {XiTerm{2, SymMatrix::scalar(b)}}); }

SpinMeasure ising() {
  Eigen::VectorXd up(1), down(1);
  up << 1.0;
  down << -1.0;
  return SpinMeasure(1, {{up, 0.5}, {down, 0.5}});
}

ModelXi mixed_model_2d() {
  Eigen::MatrixXd a2(2, 2);
  a2 << 0.15, 0.08, 0.08, 0.12;
  return ModelXi(2, {XiTerm{2, SymMatrix(a2)}});
}

SpinMeasure two_atoms_2d() {
  Eigen::VectorXd t1(2), t2(2);
  t1 << 0.9, 0.0;
  t2 << 0.1, 0.7;
  return SpinMeasure(2, {{t1, 0.6}, {t2, 0.4}});
}

}  // namespace

TEST_CASE("nelder-mead on a quadratic") {
  auto f = [](const Eigen::VectorXd& x) {
    return (x[0] - 1.0) * (x[0] - 1.0) + 2.0 * (x[1] + 0.5) * (x[1] + 0.5);
  };
  NelderMeadOptions opts;
  opts.max_evaluations = 500;
  const NelderMeadResult r = nelder_mead(f, Eigen::VectorXd::Zero(2), opts);
  CHECK(r.value <= 1e-10);
  CHECK(std::abs(r.x[0] - 1.0) <= 1e-4);
  CHECK(std::abs(r.x[1] + 0.5) <= 1e-4);
}

TEST_CASE("path parametrization produces valid paths and round-trips") {
  const PathParams pp{3, 2};
  Rng rng(7);
  for (int t = 0; t < 20; ++t) {
    Eigen::VectorXd raw(pp.size());
    for (int i = 0; i < raw.size(); ++i) raw[i] = rng.normal();
    const ParisiPath path = pp.to_path(raw);
    CHECK(path.levels() == 3);
    CHECK(path.breakpoint(0) == 0.0);
    CHECK(path.breakpoint(3) == 1.0);

    const Eigen::VectorXd back = pp.from_path(path);
    const ParisiPath again = pp.to_path(back);
    for (int l = 1; l <= 3; ++l) {
      CHECK((again.value(l).mat() - path.value(l).mat()).norm() <= 1e-5);
      CHECK(std::abs(again.breakpoint(l) - path.breakpoint(l)) <= 1e-9);
    }
  }
}

TEST_CASE("level-one minimization matches the grid oracle") {
  const SpinMeasure p1 = ising();
  // beta = 0.9 has a nontrivial stationary point; smaller betas sit at zero
  for (double beta : {0.3, 0.9}) {
    const double b = beta * beta;
    const ModelXi m = scalar_model(b);
    OptimizerOptions opts;
    opts.seed = 5;
    const MinimizeResult r =
        minimize_parisi(m, p1, 1, SymMatrix::scalar(0.0), QuadratureSpec::gh(40), opts);
    const double oracle = oracles::scalar_rs_minimum(b);
    CHECK(std::abs(r.value - oracle) <= 1e-3);
    CHECK(r.path.has_value());
    const double reeval =
        parisi_functional(m, p1, *r.path, SymMatrix::scalar(0.0), QuadratureSpec::gh(40));
    CHECK(std::abs(r.value - reeval) <= 1e-9);
  }
}

TEST_CASE("two levels never beat one by construction") {
  const ModelXi m = scalar_model(0.81);
  OptimizerOptions opts;
  opts.seed = 11;
  const auto ladder = minimize_parisi_ladder(m, ising(), {1, 2}, SymMatrix::scalar(0.0),
                                             QuadratureSpec::gh(40), opts);
  CHECK(ladder[1].value <= ladder[0].value + 1e-9);
}

TEST_CASE("no disorder means the flat path and value zero") {
  const ModelXi m = scalar_model(0.0);
  OptimizerOptions opts;
  opts.seed = 3;
  opts.multistarts = 3;
  const MinimizeResult r =
      minimize_parisi(m, ising(), 1, SymMatrix::scalar(0.0), QuadratureSpec::gh(20), opts);
  CHECK(std::abs(r.value) <= 1e-9);
}

TEST_CASE("multistart stability across seeds") {
  const ModelXi m = scalar_model(0.81);
  OptimizerOptions a, b;
  a.seed = 21;
  b.seed = 1234;
  const double va =
      minimize_parisi(m, ising(), 1, SymMatrix::scalar(0.0), QuadratureSpec::gh(40), a).value;
  const double vb =
      minimize_parisi(m, ising(), 1, SymMatrix::scalar(0.0), QuadratureSpec::gh(40), b).value;
  CHECK(std::abs(va - vb) <= 1e-3);
}

TEST_CASE("endpoint cap does not change the value") {
  const ModelXi m = mixed_model_2d();
  const SpinMeasure p1 = two_atoms_2d();
  OptimizerOptions plain, capped;
  plain.seed = capped.seed = 9;
  capped.cap_last_value = true;
  const QuadratureSpec quad = QuadratureSpec::gh(16);
  const double v0 = minimize_parisi(m, p1, 1, SymMatrix::zero(2), quad, plain).value;
  const MinimizeResult r1 = minimize_parisi(m, p1, 1, SymMatrix::zero(2), quad, capped);
  CHECK(std::abs(r1.value - v0) <= 1e-6);
}

TEST_CASE("hull distance") {
  const SpinMeasure p1 = two_atoms_2d();
  Eigen::VectorXd t1(2), t2(2);
  t1 << 0.9, 0.0;
  t2 << 0.1, 0.7;
  const SymMatrix inside{
      Eigen::MatrixXd(0.5 * t1 * t1.transpose() + 0.5 * t2 * t2.transpose())};
  CHECK(hull_distance(inside, p1) <= 1e-6);
  const SymMatrix outside{Eigen::MatrixXd(3.0 * Eigen::MatrixXd::Identity(2, 2))};
  CHECK(hull_distance(outside, p1) > 1.0);
}

TEST_CASE("hopf-lax solver on a linear datum") {
  const double b = 0.3;
  const ModelXi m = scalar_model(b);
  const double c = 0.7;
  auto psi = [&](const SymMatrix& x) { return c * x(0, 0); };
  OptimizerOptions opts;
  opts.seed = 13;
  for (double t : {0.25, 1.0}) {
    const double got = hopflax_general(psi, m, t, SymMatrix::scalar(0.4), opts);
    const double want = c * 0.4 + t * m.value(SymMatrix::scalar(c));
    CHECK(got == doctest::Approx(want).epsilon(1e-5));
  }
  CHECK(hopflax_general(psi, m, 0.0, SymMatrix::scalar(0.4), opts) == doctest::Approx(c * 0.4));
  // the zero candidate makes the solution at least the datum
  CHECK(hopflax_general(psi, m, 0.5, SymMatrix::scalar(0.4), opts) >= c * 0.4 - 1e-9);
}

TEST_CASE("correction removal: scalar two-point model identity") {
  // sigma sigma^T is constant for two-point spins, so removing the
  // correction shifts the minimum by exactly xi(1)/2
  const double beta = 0.3;
  const ModelXi m = scalar_model(beta * beta);
  const SpinMeasure p1 = ising();
  OptimizerOptions opts;
  opts.seed = 17;
  opts.multistarts = 4;
  opts.max_evaluations = 300;
  const QuadratureSpec quad = QuadratureSpec::gh(40);

  const double base = minimize_parisi(m, p1, 1, SymMatrix::scalar(0.0), quad, opts).value;
  const RemovalResult hl = remove_correction_hopflax(m, p1, 1, quad, opts);
  CHECK(std::abs(hl.value - (base + 0.5 * m.value(SymMatrix::scalar(1.0)))) <= 1e-3);

  const RemovalResult hopf = remove_correction_hopf(m, p1, 1, quad, opts);
  CHECK(std::abs(hopf.value - hl.value) <= 1e-3);
}

TEST_CASE("enriched variational consistency") {
  const ModelXi m = scalar_model(0.25);
  const SpinMeasure p1 = ising();
  const ParisiPath zero = ParisiPath::constant(SymMatrix::scalar(0.0));
  OptimizerOptions opts;
  opts.seed = 23;

  const EnrichedResult at0 = enriched_variational(m, p1, 0.0, zero, 1, QuadratureSpec::gh(40), opts);
  CHECK(at0.value == doctest::Approx(psi_enriched(m, p1, zero, QuadratureSpec::gh(40))));

  // t=1 with a zero external path must reproduce the plain minimization
  const EnrichedResult at1 = enriched_variational(m, p1, 1.0, zero, 1, QuadratureSpec::gh(40), opts);
  const double direct =
      minimize_parisi(m, p1, 1, SymMatrix::scalar(0.0), QuadratureSpec::gh(40), opts).value;
  CHECK(std::abs(at1.value - direct) <= 1e-3);
}

TEST_CASE("enriched variational against a scalar grid") {
  const ModelXi m = scalar_model(0.81);
  const SpinMeasure p1 = ising();
  const ParisiPath mu = ParisiPath::constant(SymMatrix::scalar(0.1));
  OptimizerOptions opts;
  opts.seed = 29;
  const double t = 0.8;
  const EnrichedResult r = enriched_variational(m, p1, t, mu, 1, QuadratureSpec::gh(40), opts);

  double best = 1e300;  // scan constant paths q
  for (double q = 0.0; q <= 1.0 + 1e-12; q += 1e-3) {
    const ParisiPath path = ParisiPath::constant(SymMatrix::scalar(q));
    const ParisiPath grad_path = path.mapped([&](const SymMatrix& v) { return m.gradient(v); });
    const double val = psi_enriched(m, p1, path_sum(mu, grad_path, t), QuadratureSpec::gh(40)) +
                       0.5 * t * path.theta_integral(m);
    best = std::min(best, val);
  }
  CHECK(std::abs(r.value - best) <= 1e-4);
}
