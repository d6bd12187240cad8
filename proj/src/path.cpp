#include "spingl/path.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace spingl {

ParisiPath::ParisiPath(std::vector<double> breakpoints, std::vector<SymMatrix> values, double tol)
    : breakpoints_(std::move(breakpoints)), chain_(std::move(values), tol) {
  const std::size_t k = chain_.matrices().size();
  if (k == 0) throw ConfigError("ParisiPath: needs at least one level");
  if (breakpoints_.size() != k + 1) {
    throw ConfigError("ParisiPath: " + std::to_string(k) + " values need " +
                      std::to_string(k + 1) + " breakpoints, got " +
                      std::to_string(breakpoints_.size()));
  }
  if (breakpoints_.front() != 0.0 || breakpoints_.back() != 1.0) {
    throw ConfigError("ParisiPath: breakpoints must start at 0 and end at 1");
  }
  for (std::size_t l = 1; l < breakpoints_.size(); ++l) {
    if (!(breakpoints_[l] > breakpoints_[l - 1])) {
      throw ConfigError("ParisiPath: breakpoints not strictly increasing at index " +
                        std::to_string(l));
    }
  }
}

ParisiPath ParisiPath::constant(const SymMatrix& q, double tol) {
  return ParisiPath({0.0, 1.0}, {q}, tol);
}

const SymMatrix& ParisiPath::at(double s) const {
  if (s < 0.0 || s > 1.0) throw ConfigError("ParisiPath::at: argument outside [0,1]");
  if (s >= breakpoints_[levels() - 1]) return chain_[levels() - 1];
  for (int l = 1; l <= levels(); ++l) {
    if (s < breakpoints_[l]) return chain_[l - 1];
  }
  return chain_[levels() - 1];
}

double ParisiPath::integrate(const std::function<double(const SymMatrix&)>& f) const {
  double v = 0.0;
  for (int l = 1; l <= levels(); ++l) {
    v += (breakpoints_[l] - breakpoints_[l - 1]) * f(chain_[l - 1]);
  }
  return v;
}

double ParisiPath::theta_integral(const ModelXi& m) const {
  return integrate([&](const SymMatrix& q) { return m.theta(q); });
}

ParisiPath ParisiPath::refined(const std::vector<double>& extra_points) const {
  std::vector<double> pts = breakpoints_;
  pts.insert(pts.end(), extra_points.begin(), extra_points.end());
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.front() < 0.0 || pts.back() > 1.0) {
    throw ConfigError("ParisiPath::refined: extra points outside [0,1]");
  }
  std::vector<SymMatrix> vals;
  vals.reserve(pts.size() - 1);
  for (std::size_t l = 1; l < pts.size(); ++l) {
    vals.push_back(at(0.5 * (pts[l - 1] + pts[l])));
  }
  return ParisiPath(pts, std::move(vals), tol());
}

ParisiPath ParisiPath::mapped(const std::function<SymMatrix(const SymMatrix&)>& f) const {
  std::vector<SymMatrix> vals;
  vals.reserve(levels());
  for (int l = 1; l <= levels(); ++l) vals.push_back(f(chain_[l - 1]));
  return ParisiPath(breakpoints_, std::move(vals), std::max(tol(), 1e-8));
}

ParisiPath path_sum(const ParisiPath& a, const ParisiPath& b, double scale_b) {
  if (a.dim() != b.dim()) throw DimensionError("path_sum: dimension mismatch");
  std::vector<double> pts = a.breakpoints();
  pts.insert(pts.end(), b.breakpoints().begin(), b.breakpoints().end());
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  std::vector<SymMatrix> vals;
  vals.reserve(pts.size() - 1);
  for (std::size_t l = 1; l < pts.size(); ++l) {
    const double mid = 0.5 * (pts[l - 1] + pts[l]);
    vals.push_back(a.at(mid) + b.at(mid) * scale_b);
  }
  return ParisiPath(pts, std::move(vals), std::max({a.tol(), b.tol(), 1e-8}));
}

}  // namespace spingl
