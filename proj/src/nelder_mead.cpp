#include "spingl/nelder_mead.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace spingl {

NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                             const Eigen::VectorXd& start, const NelderMeadOptions& opts) {
  const int n = static_cast<int>(start.size());
  NelderMeadResult res;
  int evals = 0;
  auto eval = [&](const Eigen::VectorXd& x) {
    ++evals;
    return f(x);
  };

  if (n == 0) {
    res.x = start;
    res.value = eval(start);
    res.evaluations = evals;
    res.converged = true;
    return res;
  }

  std::vector<Eigen::VectorXd> xs(n + 1, start);
  std::vector<double> fs(n + 1);
  for (int i = 0; i < n; ++i) {
    xs[i + 1][i] += opts.init_scale * (std::abs(start[i]) > 1.0 ? std::abs(start[i]) : 1.0);
  }
  for (int i = 0; i <= n; ++i) fs[i] = eval(xs[i]);

  std::vector<int> order(n + 1);
  auto sort_simplex = [&] {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return fs[a] < fs[b]; });
  };

  while (evals < opts.max_evaluations) {
    sort_simplex();
    const int best = order[0], worst = order[n], second = order[n - 1];

    double diam = 0.0;
    for (int i = 1; i <= n; ++i) diam = std::max(diam, (xs[order[i]] - xs[best]).norm());
    if (fs[worst] - fs[best] <= opts.f_tol * (1.0 + std::abs(fs[best])) && diam <= opts.x_tol) {
      res.converged = true;
      break;
    }

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n; ++i) centroid += xs[order[i]];
    centroid /= n;

    const Eigen::VectorXd reflected = centroid + (centroid - xs[worst]);
    const double fr = eval(reflected);
    if (fr < fs[best]) {
      const Eigen::VectorXd expanded = centroid + 2.0 * (centroid - xs[worst]);
      const double fe = eval(expanded);
      if (fe < fr) {
        xs[worst] = expanded;
        fs[worst] = fe;
      } else {
        xs[worst] = reflected;
        fs[worst] = fr;
      }
    } else if (fr < fs[second]) {
      xs[worst] = reflected;
      fs[worst] = fr;
    } else {
      const bool outside = fr < fs[worst];
      const Eigen::VectorXd contracted =
          outside ? centroid + 0.5 * (reflected - centroid) : centroid + 0.5 * (xs[worst] - centroid);
      const double fc = eval(contracted);
      if (fc < std::min(fr, fs[worst])) {
        xs[worst] = contracted;
        fs[worst] = fc;
      } else {
        for (int i = 1; i <= n; ++i) {
          const int j = order[i];
          xs[j] = xs[best] + 0.5 * (xs[j] - xs[best]);
          fs[j] = eval(xs[j]);
        }
      }
    }
  }

  sort_simplex();
  res.x = xs[order[0]];
  res.value = fs[order[0]];
  res.evaluations = evals;
  return res;
}

}  // namespace spingl
