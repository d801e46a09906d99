#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "svie/errors.hpp"

namespace svie {

/// Uniform partition of [0,T] with n subintervals, nodes t_k = kT/n.
class TimeGrid {
public:
  TimeGrid(double horizon, int subintervals)
      : horizon_(horizon), n_(subintervals) {
    if (!(horizon > 0.0) || !std::isfinite(horizon))
      throw std::invalid_argument("TimeGrid: horizon must be positive");
    if (subintervals < 1)
      throw std::invalid_argument("TimeGrid: need at least one subinterval");
  }

  double horizon() const { return horizon_; }
  int subintervals() const { return n_; }
  int node_count() const { return n_ + 1; }
  double dt() const { return horizon_ / n_; }
  double node(int k) const { return horizon_ * (static_cast<double>(k) / n_); }

  /// Index of the node closest to time x.
  int nearest_node(double x) const {
    int k = static_cast<int>(std::lround(x / horizon_ * n_));
    return std::clamp(k, 0, n_);
  }

  bool operator==(const TimeGrid& other) const {
    return horizon_ == other.horizon_ && n_ == other.n_;
  }

private:
  double horizon_;
  int n_;
};

inline TimeGrid make_uniform_grid(double horizon, int subintervals) {
  return TimeGrid(horizon, subintervals);
}

/// Vector-valued path sampled on a TimeGrid. Values are stored column-per-node
/// so a state vector is contiguous.
class SampledPath {
public:
  SampledPath(const TimeGrid& grid, int dim)
      : grid_(grid), values_(Eigen::MatrixXd::Zero(dim, grid.node_count())) {
    if (dim < 1) throw std::invalid_argument("SampledPath: dim must be >= 1");
  }

  const TimeGrid& grid() const { return grid_; }
  int dim() const { return static_cast<int>(values_.rows()); }
  int node_count() const { return static_cast<int>(values_.cols()); }

  Eigen::MatrixXd& values() { return values_; }
  const Eigen::MatrixXd& values() const { return values_; }

  Eigen::VectorXd value(int k) const { return values_.col(k); }
  auto col(int k) { return values_.col(k); }
  auto col(int k) const { return values_.col(k); }

  double& at(int k, int c = 0) { return values_(c, k); }
  double at(int k, int c = 0) const { return values_(c, k); }

  bool all_finite() const { return values_.allFinite(); }

  bool same_grid(const SampledPath& other) const { return grid_ == other.grid_; }

private:
  TimeGrid grid_;
  Eigen::MatrixXd values_;
};

/// Samples a scalar function onto a 1-d path.
template <typename F>
SampledPath sample_scalar(const TimeGrid& grid, F&& f) {
  SampledPath p(grid, 1);
  for (int k = 0; k < grid.node_count(); ++k) p.at(k) = f(grid.node(k));
  return p;
}

/// Samples a vector function t -> R^dim.
template <typename F>
SampledPath sample_vector(const TimeGrid& grid, int dim, F&& f) {
  SampledPath p(grid, dim);
  for (int k = 0; k < grid.node_count(); ++k) p.col(k) = f(grid.node(k));
  return p;
}

inline SampledPath constant_path(const TimeGrid& grid, const Eigen::VectorXd& c) {
  SampledPath p(grid, static_cast<int>(c.size()));
  for (int k = 0; k < grid.node_count(); ++k) p.col(k) = c;
  return p;
}

/// a + scale * b, nodewise.
inline SampledPath path_add_scaled(const SampledPath& a, double scale,
                                   const SampledPath& b) {
  if (!a.same_grid(b) || a.dim() != b.dim())
    throw std::invalid_argument("path_add_scaled: incompatible paths");
  SampledPath out = a;
  out.values() += scale * b.values();
  return out;
}

enum class NormKind { WAlpha1, W1MinusAlpha2, Holder, Sup };

namespace detail {

inline void check_interval_nodes(const TimeGrid& grid, double a, double b,
                                 int& ka, int& kb) {
  if (!(a < b))
    throw std::invalid_argument("norm interval: need a < b");
  ka = grid.nearest_node(a);
  kb = grid.nearest_node(b);
  if (ka >= kb)
    throw std::invalid_argument("norm interval: empty node range after snapping");
}

// Exact integral of (A + B*u) * u^(-alpha-1) over [u0, u1], 0 <= u0 < u1.
// When u0 == 0 the caller guarantees A == 0 so the singular part drops out.
inline double weight_int_left(double A, double B, double u0, double u1,
                              double alpha) {
  double acc = B * (std::pow(u1, 1.0 - alpha) - std::pow(u0, 1.0 - alpha)) /
               (1.0 - alpha);
  if (A != 0.0)
    acc += A * (std::pow(u1, -alpha) - std::pow(u0, -alpha)) / (-alpha);
  return acc;
}

// Exact integral of (A + B*u) * u^(alpha-2) over [u0, u1].
inline double weight_int_right(double A, double B, double u0, double u1,
                               double alpha) {
  double acc = B * (std::pow(u1, alpha) - std::pow(u0, alpha)) / alpha;
  if (A != 0.0)
    acc += A * (std::pow(u1, alpha - 1.0) - std::pow(u0, alpha - 1.0)) /
           (alpha - 1.0);
  return acc;
}

} // namespace detail

/// sup_{t in [a,b]} |f(t)| over grid nodes, with a, b snapped to nodes.
inline double sup_norm(const SampledPath& path, double a, double b) {
  int ka, kb;
  detail::check_interval_nodes(path.grid(), a, b, ka, kb);
  double m = 0.0;
  for (int k = ka; k <= kb; ++k) m = std::max(m, path.col(k).norm());
  return m;
}

inline double sup_norm(const SampledPath& path) {
  return sup_norm(path, 0.0, path.grid().horizon());
}

/// Discrete lambda-Hoelder norm on [a,b]: sup norm plus the maximum
/// difference quotient over all node pairs. A lower bound on the continuum
/// norm. O(n^2).
inline double holder_norm(const SampledPath& path, double lambda, double a,
                          double b) {
  if (!(lambda > 0.0) || lambda > 1.0)
    throw std::invalid_argument("holder_norm: lambda must lie in (0,1]");
  int ka, kb;
  detail::check_interval_nodes(path.grid(), a, b, ka, kb);
  const auto& grid = path.grid();
  double ratio = 0.0;
  for (int i = ka; i < kb; ++i) {
    for (int j = i + 1; j <= kb; ++j) {
      const double num = (path.col(j) - path.col(i)).norm();
      const double den = std::pow(grid.node(j) - grid.node(i), lambda);
      ratio = std::max(ratio, num / den);
    }
  }
  return sup_norm(path, a, b) + ratio;
}

inline double holder_norm(const SampledPath& path, double lambda) {
  return holder_norm(path, lambda, 0.0, path.grid().horizon());
}

/// Only the difference-quotient supremum (no sup-norm term).
inline double holder_seminorm(const SampledPath& path, double lambda) {
  return holder_norm(path, lambda) - sup_norm(path);
}

/// Discrete W^alpha_1 norm:
///   sup_t ( |f(t)| + int_0^t |f(t)-f(s)| / (t-s)^(alpha+1) ds ).
/// The singular integral is evaluated in closed form against the
/// piecewise-linear interpolant of s -> |f(t)-f(s)| on each grid cell, which
/// keeps the s -> t endpoint finite: the numerator vanishes linearly there.
inline double w_alpha_1_norm(const SampledPath& path, double alpha) {
  if (!(alpha > 0.0) || !(alpha < 0.5))
    throw std::invalid_argument("w_alpha_1_norm: alpha must lie in (0,1/2)");
  const auto& grid = path.grid();
  const int n = grid.subintervals();
  const double dt = grid.dt();
  double best = path.col(0).norm();
  std::vector<double> phi(n + 1);
  for (int k = 1; k <= n; ++k) {
    const double tk = grid.node(k);
    for (int j = 0; j <= k; ++j) phi[j] = (path.col(k) - path.col(j)).norm();
    double integral = 0.0;
    for (int j = 0; j < k; ++j) {
      // substitute u = t_k - s on [t_j, t_{j+1}]: u in [ua, ub]
      const double ua = tk - grid.node(j + 1);
      const double ub = tk - grid.node(j);
      const double B = (phi[j] - phi[j + 1]) / dt;
      const double A = phi[j + 1] - B * ua;
      integral += detail::weight_int_left(j + 1 == k ? 0.0 : A, B, ua, ub, alpha);
    }
    best = std::max(best, path.col(k).norm() + integral);
  }
  return best;
}

/// Unified entry point over the norm family; `param` is lambda for Holder
/// and alpha for the two W norms, ignored for Sup.
inline double path_norm(const SampledPath& path, NormKind kind,
                        double param = 0.0);

/// Discrete W^{1-alpha}_2 norm:
///   sup_{s<t} ( |g(t)-g(s)|/(t-s)^(1-alpha)
///             + int_s^t |g(y)-g(s)| / (y-s)^(2-alpha) dy ).
/// Same closed-form treatment of the weight against the piecewise-linear
/// interpolant of y -> |g(y)-g(s)|. O(n^2).
inline double w_1malpha_2_norm(const SampledPath& path, double alpha) {
  if (!(alpha > 0.0) || !(alpha < 0.5))
    throw std::invalid_argument("w_1malpha_2_norm: alpha must lie in (0,1/2)");
  const auto& grid = path.grid();
  const int n = grid.subintervals();
  const double dt = grid.dt();
  double best = 0.0;
  std::vector<double> phi(n + 1);
  for (int i = 0; i < n; ++i) {
    const double ti = grid.node(i);
    for (int j = i; j <= n; ++j) phi[j] = (path.col(j) - path.col(i)).norm();
    double integral = 0.0;
    for (int j = i + 1; j <= n; ++j) {
      const double u0 = grid.node(j - 1) - ti;
      const double u1 = grid.node(j) - ti;
      const double B = (phi[j] - phi[j - 1]) / dt;
      const double A = phi[j - 1] - B * u0;
      integral += detail::weight_int_right(j == i + 1 ? 0.0 : A, B, u0, u1, alpha);
      const double quotient = phi[j] / std::pow(u1, 1.0 - alpha);
      best = std::max(best, quotient + integral);
    }
  }
  return best;
}

inline double path_norm(const SampledPath& path, NormKind kind, double param) {
  switch (kind) {
    case NormKind::Sup:
      return sup_norm(path);
    case NormKind::Holder:
      return holder_norm(path, param);
    case NormKind::WAlpha1:
      return w_alpha_1_norm(path, param);
    case NormKind::W1MinusAlpha2:
      return w_1malpha_2_norm(path, param);
  }
  throw std::invalid_argument("path_norm: unknown norm kind");
}

} // namespace svie
