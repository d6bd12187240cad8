#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "spingl/cascade.hpp"
#include "spingl/rng.hpp"

using namespace spingl;

namespace {

ModelXi scalar_model(double b) { return ModelXi(1, {XiTerm{2, SymMatrix::scalar(b)}}); }

ModelXi mixed_model_2d() {
  Eigen::MatrixXd a1(2, 2), a2(2, 2);
  a1 << 0.2, 0.1, 0.1, 0.2;
  a2 << 0.3, 0.15, 0.15, 0.3;
  return ModelXi(2, {XiTerm{1, SymMatrix(a1)}, XiTerm{2, SymMatrix(a2)}});
}

SpinMeasure ising() {
  Eigen::VectorXd up(1), down(1);
  up << 1.0;
  down << -1.0;
  return SpinMeasure(1, {{up, 0.5}, {down, 0.5}});
}

SpinMeasure two_atoms_2d() {
  Eigen::VectorXd t1(2), t2(2);
  t1 << 0.9, 0.0;
  t2 << 0.1, 0.7;
  return SpinMeasure(2, {{t1, 0.6}, {t2, 0.4}});
}

ParisiPath random_path(int dim, int k, Rng& rng, double scale = 0.45) {
  std::vector<double> breaks{0.0};
  std::vector<double> interior;
  for (int l = 1; l < k; ++l) interior.push_back(0.05 + 0.9 * rng.uniform());
  std::sort(interior.begin(), interior.end());
  for (std::size_t i = 0; i < interior.size(); ++i) {
    // keep strictly increasing
    if (!breaks.empty() && interior[i] <= breaks.back() + 1e-4) interior[i] = breaks.back() + 1e-4;
    breaks.push_back(interior[i]);
  }
  breaks.push_back(1.0);

  std::vector<SymMatrix> values;
  SymMatrix acc = SymMatrix::zero(dim);
  for (int l = 0; l < k; ++l) {
    Eigen::MatrixXd low(dim, dim);
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j) low(i, j) = scale * rng.normal();
    acc = acc + SymMatrix(Eigen::MatrixXd(low * low.transpose()));
    values.push_back(acc);
  }
  return ParisiPath(breaks, values, 1e-8);
}

/// Closed form of the log-moment ladder applied to a pure Gaussian field:
/// (1/2) sum_l s_l (theta(q_{l+1}) - theta(q_l)) with s_0 = 0.
double logexpy_closed_form(const ModelXi& m, const ParisiPath& path) {
  double acc = 0.0;
  double prev_theta = m.theta(path.value(1));  // l = 0 term has s_0 = 0
  for (int l = 1; l < path.levels(); ++l) {
    const double th = m.theta(path.value(l + 1));
    acc += 0.5 * path.breakpoint(l) * (th - prev_theta);
    prev_theta = th;
  }
  return acc;
}

/// Runs the engine on the scalar surrogate whose innermost value is the
/// accumulated Gaussian field itself, with increments theta(q_l)-theta(q_{l-1}).
double surrogate_value(const ModelXi& m, const ParisiPath& path, const QuadratureSpec& quad) {
  std::vector<SymMatrix> increments;
  double prev = 0.0;
  for (int l = 1; l <= path.levels(); ++l) {
    const double th = m.theta(path.value(l));
    increments.push_back(SymMatrix::scalar(th - prev));
    prev = th;
  }
  std::vector<double> exps;
  for (int l = 1; l < path.levels(); ++l) exps.push_back(path.breakpoint(l));
  const auto levels = make_cascade_levels(increments, 1e-9);
  return cascade_expectation(levels, exps, [](const Eigen::VectorXd& z) { return z[0]; }, quad);
}

}  // namespace

TEST_CASE("gauss-hermite rule moments") {
  const GaussHermiteRule rule = gauss_hermite(40);
  double m0 = 0, m1 = 0, m2 = 0, m4 = 0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    m0 += rule.weights[i];
    m1 += rule.weights[i] * rule.nodes[i];
    m2 += rule.weights[i] * rule.nodes[i] * rule.nodes[i];
    m4 += rule.weights[i] * std::pow(rule.nodes[i], 4);
  }
  CHECK(m0 == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(std::abs(m1) <= 1e-13);
  CHECK(m2 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(m4 == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("level-1 recursion against an independent quadrature oracle") {
  const double b = 0.25;  // beta = 0.5
  const ModelXi m = scalar_model(b);
  for (double q : {0.2, 0.5, 0.9}) {
    const double got = rsb_recursion(m, ising(), ParisiPath::constant(SymMatrix::scalar(q)),
                                     SymMatrix::scalar(0.0), QuadratureSpec::gh(40));
    const double want =
        oracles::gaussian_mean([](double z) { return std::log(std::cosh(z)); }, 2 * b * q) - b * q;
    CHECK(got == doctest::Approx(want).epsilon(1e-8));
  }
}

TEST_CASE("degenerate multi-level path collapses to level one") {
  const ModelXi m = scalar_model(0.25);
  const SymMatrix q = SymMatrix::scalar(0.4);
  const double base = parisi_functional(m, ising(), ParisiPath::constant(q), QuadratureSpec::gh(40));
  const ParisiPath repeated({0.0, 0.3, 0.7, 1.0}, {q, q, q}, 1e-10);
  const double rep = parisi_functional(m, ising(), repeated, QuadratureSpec::gh(40));
  CHECK(rep == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("gaussian-linear surrogate reproduces the closed form") {
  Rng rng(101);
  const ModelXi m1 = scalar_model(0.3);
  const ModelXi m2 = mixed_model_2d();
  for (int k = 1; k <= 4; ++k) {
    for (int t = 0; t < 6; ++t) {
      const ParisiPath p1 = random_path(1, k, rng);
      CHECK(surrogate_value(m1, p1, QuadratureSpec::gh(40)) ==
            doctest::Approx(logexpy_closed_form(m1, p1)).epsilon(1e-9));
      const ParisiPath p2 = random_path(2, k, rng);
      CHECK(surrogate_value(m2, p2, QuadratureSpec::gh(40)) ==
            doctest::Approx(logexpy_closed_form(m2, p2)).epsilon(1e-9));
    }
  }
}

TEST_CASE("single-atom spin measure has an explicit value") {
  Eigen::VectorXd tau(2);
  tau << 0.6, 0.5;
  const SpinMeasure single(2, {{tau, 1.0}});
  const ModelXi m = mixed_model_2d();
  Rng rng(103);
  const SymMatrix tilt = SymMatrix(Eigen::MatrixXd(0.1 * Eigen::MatrixXd::Identity(2, 2)));
  const SymMatrix outer{Eigen::MatrixXd(tau * tau.transpose())};

  for (int k : {1, 2, 3}) {
    const ParisiPath path = random_path(2, k, rng);
    // With one atom the spin integral is a single exponential; the ladder
    // adds (s_{l-1}/2) tau^T C_l tau per level, nothing at level one.
    double expect = frobenius_dot(tilt - m.gradient(path.value(k)) * 0.5, outer);
    for (int l = 2; l <= k; ++l) {
      const SymMatrix inc = m.gradient(path.value(l)) - m.gradient(path.value(l - 1));
      expect += 0.5 * path.breakpoint(l - 1) * tau.dot(inc.mat() * tau);
    }
    const double got = rsb_recursion(m, single, path, tilt, QuadratureSpec::gh(24));
    CHECK(got == doctest::Approx(expect).epsilon(1e-8));
  }
}

TEST_CASE("refinement invariance") {
  Rng rng(107);
  const ModelXi m = scalar_model(0.3);
  for (int t = 0; t < 5; ++t) {
    const ParisiPath path = random_path(1, 2, rng);
    const ParisiPath fine = path.refined({0.5 * path.breakpoint(1), 0.97});
    const double a = parisi_functional(m, ising(), path, QuadratureSpec::gh(40));
    const double b = parisi_functional(m, ising(), fine, QuadratureSpec::gh(40));
    CHECK(a == doctest::Approx(b).epsilon(1e-9));
  }
}

TEST_CASE("functional is nondecreasing in the tilt along psd directions") {
  const ModelXi m = mixed_model_2d();
  const SpinMeasure p1 = two_atoms_2d();
  Rng rng(109);
  const QuadratureSpec quad = QuadratureSpec::gh(16);
  for (int t = 0; t < 5; ++t) {
    const ParisiPath path = random_path(2, 2, rng);
    Eigen::MatrixXd l(2, 2);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) l(i, j) = 0.4 * rng.normal();
    const SymMatrix dir{Eigen::MatrixXd(l * l.transpose())};
    const SymMatrix tilt = SymMatrix::zero(2);
    const double lo = parisi_functional(m, p1, path, tilt, quad);
    const double hi = parisi_functional(m, p1, path, tilt + dir * 1e-3, quad);
    CHECK(hi >= lo - 1e-9);
  }
}

TEST_CASE("monte carlo mode agrees with quadrature") {
  const ModelXi m = scalar_model(0.3);
  Rng rng(113);
  const ParisiPath path = random_path(1, 2, rng);
  const double gh = parisi_functional(m, ising(), path, QuadratureSpec::gh(40));

  std::vector<double> runs;
  for (int i = 0; i < 10; ++i) {
    runs.push_back(parisi_functional(m, ising(), path, QuadratureSpec::mc(4000, 1000 + i)));
  }
  double mean = 0;
  for (double v : runs) mean += v;
  mean /= runs.size();
  double sd = 0;
  for (double v : runs) sd += (v - mean) * (v - mean);
  sd = std::sqrt(sd / (runs.size() - 1));
  CHECK(std::abs(gh - mean) <= 4.0 * sd / std::sqrt(static_cast<double>(runs.size())) + 1e-9);
}

TEST_CASE("enriched functional basics") {
  const ModelXi m = scalar_model(0.3);
  const SpinMeasure p1 = ising();
  const ParisiPath zero = ParisiPath::constant(SymMatrix::scalar(0.0));
  CHECK(psi_enriched(m, p1, zero, QuadratureSpec::gh(20)) == doctest::Approx(0.0));

  // psi(grad xi o path) + (1/2) integral theta o path equals the functional
  Rng rng(127);
  for (int t = 0; t < 5; ++t) {
    const ParisiPath path = random_path(1, 3, rng);
    const ParisiPath grad_path =
        path.mapped([&](const SymMatrix& q) { return m.gradient(q); });
    const double lhs =
        psi_enriched(m, p1, grad_path, QuadratureSpec::gh(40)) + 0.5 * path.theta_integral(m);
    const double rhs = parisi_functional(m, p1, path, QuadratureSpec::gh(40));
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-9));
  }
}

TEST_CASE("cascade weights: normalization and truncation flag") {
  Rng rng(131);
  const ParisiPath path({0.0, 0.5, 1.0},
                        {SymMatrix::scalar(0.2), SymMatrix::scalar(0.6)}, 1e-10);
  const CascadeWeights w = sample_cascade_weights(path, 2048, 7);
  double total = 0.0;
  for (double v : w.leaf_weights()) total += v;
  CHECK(std::abs(total - 1.0) <= 1e-10);
  CHECK(w.leaf_count() == 2048);
  CHECK_THROWS_AS(sample_cascade_weights(path, 8, 7), ConfigError);
  CHECK_THROWS_AS(sample_cascade_weights(ParisiPath::constant(SymMatrix::scalar(0.3)), 64, 7),
                  ConfigError);
}

TEST_CASE("cascade weights: two-point branch probability near its mean") {
  const ParisiPath path({0.0, 0.5, 1.0},
                        {SymMatrix::scalar(0.2), SymMatrix::scalar(0.6)}, 1e-10);
  double acc = 0.0;
  const int draws = 24;
  for (int i = 0; i < draws; ++i) {
    acc += sample_cascade_weights(path, 2048, 100 + i).branch_probability_below(1);
  }
  CHECK(std::abs(acc / draws - 0.5) <= 0.05);
}

TEST_CASE("cascade weights: sampled tree reproduces the closed form") {
  const ModelXi m = scalar_model(0.3);
  const ParisiPath path({0.0, 0.5, 1.0},
                        {SymMatrix::scalar(0.25), SymMatrix::scalar(0.8)}, 1e-10);
  const double th1 = m.theta(path.value(1));
  const double th2 = m.theta(path.value(2));
  const double sd1 = std::sqrt(th1), sd2 = std::sqrt(th2 - th1);

  // E log sum_a v_a exp(g(a)): a fresh tree and field per replicate
  const int reps = 400;
  std::vector<double> vals(reps);
  for (int rep = 0; rep < reps; ++rep) {
    const CascadeWeights w = sample_cascade_weights(path, 2048, 9000 + rep);
    const auto& leaf_w = w.leaf_weights();
    Rng rng = Rng::stream(2024, {static_cast<std::uint64_t>(rep)});
    const double shared = sd1 * rng.normal();
    double peak = -1e300;
    std::vector<double> expo(leaf_w.size());
    for (std::size_t a = 0; a < leaf_w.size(); ++a) {
      expo[a] = std::log(leaf_w[a]) + shared + sd2 * rng.normal();
      peak = std::max(peak, expo[a]);
    }
    double acc = 0.0;
    for (double e : expo) acc += std::exp(e - peak);
    vals[rep] = peak + std::log(acc);
  }
  double mean = 0.0;
  for (double v : vals) mean += v;
  mean /= reps;
  double sd = 0.0;
  for (double v : vals) sd += (v - mean) * (v - mean);
  sd = std::sqrt(sd / (reps - 1.0));
  const double se = sd / std::sqrt(static_cast<double>(reps));

  const double want = 0.5 * path.breakpoint(1) * (th2 - th1);  // closed form
  CHECK(std::abs(mean - want) <= 3.0 * se + 1e-3);
}
