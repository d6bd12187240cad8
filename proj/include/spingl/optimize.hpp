#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "spingl/cascade.hpp"
#include "spingl/model.hpp"
#include "spingl/path.hpp"
#include "spingl/quadrature.hpp"

namespace spingl {

/// Smooth unconstrained parametrization of k-level increasing paths:
/// k-1 reals mapped to ordered breakpoints through sorted logistics, and k
/// lower-triangular blocks L_l giving the chain q_l = sum_{j<=l} L_j L_j^T.
struct PathParams {
  int levels = 1;
  int dim = 1;

  int breakpoint_count() const { return levels - 1; }
  int block_size() const { return dim * (dim + 1) / 2; }
  int size() const { return breakpoint_count() + levels * block_size(); }

  ParisiPath to_path(const Eigen::VectorXd& raw) const;
  /// Inverse map up to factor choice; to_path(from_path(p)) evaluates like p.
  Eigen::VectorXd from_path(const ParisiPath& path) const;
};

struct OptimizerOptions {
  int multistarts = 8;
  int max_evaluations = 600;       // per Nelder-Mead run
  double f_tol = 1e-12;
  double x_tol = 1e-10;
  double start_scale = 0.35;       // scale of random start parameters
  std::uint64_t seed = 1;
  bool cap_last_value = false;     // restrict the path endpoint toward the
                                   // convex hull of the atom outer products
  double penalty_scale = 1e3;
  int outer_max_evaluations = 220; // sup-side searches in the removal formulas
  int outer_multistarts = 3;
};

struct MinimizeResult {
  double value = 0.0;
  std::optional<ParisiPath> path;
  long evaluations = 0;
  bool converged = false;
  std::vector<double> history;     // best value per start
  bool cap_feasible = true;        // endpoint lies in the hull (when capped)
};

/// inf over k-level paths of the Parisi functional at the given tilt,
/// by multistart Nelder-Mead over PathParams.
MinimizeResult minimize_parisi(const ModelXi& m, const SpinMeasure& p1, int k,
                               const SymMatrix& tilt, const QuadratureSpec& quad,
                               const OptimizerOptions& opts = {});

/// Runs minimize_parisi over increasing level counts, warm-starting each k
/// from the previous witness with its last level duplicated.
std::vector<MinimizeResult> minimize_parisi_ladder(const ModelXi& m, const SpinMeasure& p1,
                                                   const std::vector<int>& ks,
                                                   const SymMatrix& tilt,
                                                   const QuadratureSpec& quad,
                                                   const OptimizerOptions& opts = {});

struct RemovalResult {
  double value = 0.0;
  SymMatrix outer_witness{1};          // y* (Hopf-Lax) or z* (Hopf)
  std::optional<SymMatrix> tilt_witness;  // y* in the Hopf formula
  std::optional<ParisiPath> path;
  long evaluations = 0;
  bool converged = false;
};

/// sup_{y PSD} { inf_path P(path, y) - (1/2) xi*(2y) }: the uncorrected
/// free-energy limit in its sup-inf form.
RemovalResult remove_correction_hopflax(const ModelXi& m, const SpinMeasure& p1, int k,
                                        const QuadratureSpec& quad,
                                        const OptimizerOptions& opts = {});

/// sup_{z PSD} inf_{y PSD, path} { P(path, y) - y.z + (1/2) xi(z) }.
RemovalResult remove_correction_hopf(const ModelXi& m, const SpinMeasure& p1, int k,
                                     const QuadratureSpec& quad,
                                     const OptimizerOptions& opts = {});

/// Variational solution f(t,x) = sup_{y PSD} { psi(x+y) - t xi*(y/t) } of
/// the cone-restricted transport equation with initial datum psi; returns
/// psi(x) at t = 0.
double hopflax_general(const std::function<double(const SymMatrix&)>& psi, const ModelXi& m,
                       double t, const SymMatrix& x, const OptimizerOptions& opts = {});

struct EnrichedResult {
  double value = 0.0;
  std::optional<ParisiPath> path;
  bool converged = false;
};

/// inf over k-level paths of
///   psi_enriched(mu + t grad xi o path) + (t/2) integral of theta o path,
/// the enriched free-energy limit; the conjugate term uses the closed form
/// theta = xi*(grad xi(.)) valid for convex models.
EnrichedResult enriched_variational(const ModelXi& m, const SpinMeasure& p1, double t,
                                    const ParisiPath& mu, int k, const QuadratureSpec& quad,
                                    const OptimizerOptions& opts = {});

/// Distance from q to the convex hull of {tau tau^T} over the measure's
/// atoms (simplex-constrained least squares); feasible when <= tol.
double hull_distance(const SymMatrix& q, const SpinMeasure& p1, int iterations = 4000);

}  // namespace spingl
