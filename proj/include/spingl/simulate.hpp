#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "spingl/cascade.hpp"
#include "spingl/model.hpp"
#include "spingl/path.hpp"
#include "spingl/perturbation.hpp"
#include "spingl/rng.hpp"
#include "spingl/sym.hpp"

namespace spingl {

/// Exact enumeration of (supp P1)^N with product log-weights. Configurations
/// are D x N matrices whose columns are atom sites.
class ConfigSpace {
 public:
  ConfigSpace(const SpinMeasure& p1, int spins, std::int64_t budget = 1 << 16);

  int spins() const { return spins_; }
  int dim() const { return p1_.dim(); }
  int count() const { return static_cast<int>(log_weights_.size()); }
  const SpinMeasure& measure() const { return p1_; }

  const Eigen::MatrixXd& config(int c) const { return configs_[c]; }
  double log_weight(int c) const { return log_weights_[c]; }
  /// sigma sigma^T / N.
  const SymMatrix& self_overlap(int c) const { return self_overlaps_[c]; }
  /// sigma_c sigma_c'^T / N (not symmetric in general).
  Eigen::MatrixXd overlap(int c, int cp) const;

 private:
  SpinMeasure p1_;
  int spins_;
  std::vector<Eigen::MatrixXd> configs_;
  std::vector<double> log_weights_;
  std::vector<SymMatrix> self_overlaps_;
};

/// Centered Gaussian field over an enumerated index set, sampled through an
/// eigenvalue factorization of its covariance. Tiny negative eigenvalues
/// from rounding are clipped; a clip beyond tolerance aborts.
class GaussianFieldSampler {
 public:
  explicit GaussianFieldSampler(const Eigen::MatrixXd& kernel);

  int size() const { return static_cast<int>(factor_.rows()); }
  double max_clip() const { return max_clip_; }
  Eigen::VectorXd sample(Rng& rng) const { return factor_ * rng.normal_vector(size()); }

 private:
  Eigen::MatrixXd factor_;
  double max_clip_ = 0.0;
};

/// Covariance N xi(sigma sigma'^T / N) of the Hamiltonian over the
/// enumerated configurations.
Eigen::MatrixXd hamiltonian_kernel(const ModelXi& m, const ConfigSpace& cs);
/// Covariance (N+1) xi(sigma sigma'^T / (N+1)): the cavity-sized field on N
/// spins.
Eigen::MatrixXd cavity_hamiltonian_kernel(const ModelXi& m, const ConfigSpace& cs);
/// Covariance of the R^D-valued cavity field: block (c,c') equals
/// grad xi(overlap); index layout is config-major, component-minor.
Eigen::MatrixXd cavity_vector_kernel(const ModelXi& m, const ConfigSpace& cs);
/// Covariance theta(overlap) of the scalar cavity field.
Eigen::MatrixXd cavity_scalar_kernel(const ModelXi& m, const ConfigSpace& cs);
/// Covariance N (a . (overlap)^{(. schur)})^{outer} of one perturbation field.
Eigen::MatrixXd perturbation_kernel(const SymMatrix& a, int schur_power, int outer_power,
                                    const ConfigSpace& cs);

enum class DisorderMethod { CovarianceFactor, ExplicitTensor };

struct DisorderFields {
  bool hamiltonian = true;
  bool cavity_hamiltonian = false;
  bool cavity_vector = false;
  bool cavity_scalar = false;
};

/// One realization of the requested Gaussian fields over a configuration
/// space, reproducible from the seed.
struct DisorderSample {
  std::uint64_t seed = 0;
  DisorderMethod method = DisorderMethod::CovarianceFactor;
  Eigen::VectorXd hamiltonian;
  Eigen::VectorXd cavity_hamiltonian;
  Eigen::MatrixXd cavity_vector;  // count x D, row c is Z(sigma_c)
  Eigen::VectorXd cavity_scalar;
};

DisorderSample sample_disorder(const ModelXi& m, const ConfigSpace& cs,
                               const DisorderFields& fields, std::uint64_t seed,
                               DisorderMethod method = DisorderMethod::CovarianceFactor);

/// Direct p-spin construction of the Hamiltonian: Gaussian coefficient
/// tensors contracted against spin columns, realizing the same covariance as
/// the factorized sampler. Used to cross-validate the covariance algebra.
Eigen::VectorXd sample_hamiltonian_tensor(const ModelXi& m, const ConfigSpace& cs, Rng& rng);

struct MeanStderr {
  double mean = 0.0;
  double std_err = 0.0;
  int reps = 0;
};

MeanStderr summarize(const std::vector<double>& values);

/// (1/N) E log integral exp(H - (N/2) xi(self-overlap)) dP_N by exact
/// enumeration under sampled disorder.
MeanStderr corrected_free_energy(const ModelXi& m, const ConfigSpace& cs, int reps,
                                 std::uint64_t seed);

/// Same with the external field t N xi(self-overlap) + x . sigma sigma^T;
/// (t,x) = (1/2, 0) recovers the uncorrected free energy.
MeanStderr free_energy_txy(const ModelXi& m, const ConfigSpace& cs, double t,
                           const SymMatrix& x, int reps, std::uint64_t seed);

struct HjResidualResult {
  double time_derivative = 0.0;
  SymMatrix gradient;
  double residual = 0.0;   // dt F - xi(grad F), finite differences
  double std_err = 0.0;     // batch std_err of the residual
  double fd_allowance = 0.0;
  double band = 0.0;       // Lip * (sqrt(Delta F / N) + E|grad Fhat - grad F|)
  bool inconclusive = false;

  HjResidualResult() : gradient(1) {}
  double combined_error() const { return std_err + fd_allowance; }
};

/// Central finite differences of free_energy_txy in t and along the
/// orthonormal basis, with common disorder across evaluation points.
HjResidualResult hj_residual(const ModelXi& m, const ConfigSpace& cs, double t,
                             const SymMatrix& x, double fd_step, int reps, std::uint64_t seed);

struct GuerraPoint {
  double r = 0.0;
  double mean = 0.0;
  double std_err = 0.0;
};

struct GuerraCurve {
  std::vector<GuerraPoint> points;
  /// Per adjacent pair: mean and std_err of phi(r_{i+1}) - phi(r_i) under
  /// common disorder (sharp monotonicity statistics).
  std::vector<double> step_mean;
  std::vector<double> step_stderr;
  bool truncation_warning = false;

  bool monotone_within(double sigmas) const;
};

/// Interpolating free energy between the model (r=1) and a cascade system
/// (r=0) along the given path; weights are required once the path has more
/// than one level.
GuerraCurve guerra_curve(const ModelXi& m, const SpinMeasure& p1, const ConfigSpace& cs,
                         const ParisiPath& path, const CascadeWeights* weights,
                         const std::vector<double>& r_grid, int reps, std::uint64_t seed);

/// Pairwise overlaps of replicas drawn independently from one Gibbs weight
/// vector; block (l,l') is sigma^l (sigma^l')^T / N.
struct OverlapArray {
  int replicas = 0;
  int dim = 0;
  Eigen::MatrixXd entries;  // (replicas*dim) x (replicas*dim)

  Eigen::MatrixXd block(int l, int lp) const;
  /// |R^{l,l'}| <= 1 for all pairs and PSD diagonal blocks.
  bool valid(double tol = 1e-9) const;
};

OverlapArray sample_overlap_array(const ConfigSpace& cs, const Eigen::VectorXd& gibbs_weights,
                                  int replicas, Rng& rng);

/// A monomial of overlap entries over the first n replicas, multiplied
/// against the perturbation kernel entry R^{1,n+1}_h in the identity check.
struct GgObservable {
  int replicas = 2;                            // n
  std::vector<std::array<int, 4>> factors;     // (l, l', row, col), replicas 1-based
  HIndex h;
};

struct DeltaStat {
  double mean = 0.0;
  double std_err = 0.0;
};

struct GibbsStatsResult {
  MeanStderr concentration;          // E_x E< |R11 - E<R11>_x| >_x
  std::vector<DeltaStat> deltas;     // one per observable
};

/// Gibbs statistics under the cavity-sized, perturbed Hamiltonian:
/// self-overlap concentration and the multi-replica identity defects, with
/// the perturbation parameters drawn uniformly from [1,2].
GibbsStatsResult perturbed_gibbs_stats(const ModelXi& m, const ConfigSpace& cs,
                                       const PerturbationSpec& pspec, int x_draws, int reps,
                                       const std::vector<GgObservable>& observables,
                                       std::uint64_t seed);

struct AssResult {
  MeanStderr lhs;  // (N+1) F_{N+1} - N F_N, perturbed and corrected
  MeanStderr rhs;  // cavity functional
  double gap() const { return lhs.mean - rhs.mean; }
  double combined_stderr() const;
};

/// Both sides of the cavity representation of the free-energy increment,
/// with a shared perturbation parameter draw.
AssResult ass_difference(const ModelXi& m, const ConfigSpace& cs_small,
                         const ConfigSpace& cs_large, const PerturbationSpec& pspec,
                         const PerturbationX& x, int reps, std::uint64_t seed);

}  // namespace spingl
