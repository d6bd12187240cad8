#pragma once

#include <functional>

#include <Eigen/Core>

namespace spingl {

struct NelderMeadOptions {
  int max_evaluations = 600;
  double f_tol = 1e-12;
  double x_tol = 1e-10;
  double init_scale = 0.3;
};

struct NelderMeadResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int evaluations = 0;
  bool converged = false;
};

/// Derivative-free simplex minimization with the classic coefficients
/// (reflect 1, expand 2, contract 1/2, shrink 1/2).
NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                             const Eigen::VectorXd& start, const NelderMeadOptions& opts = {});

}  // namespace spingl
