#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "svie/grid.hpp"

namespace svie {

enum class FracSide { LeftAPlus, RightBMinus };

/// A one-sided fractional derivative pinned to an interval [a,b].
struct FracDerivSpec {
  FracSide side = FracSide::LeftAPlus;
  double alpha = 0.3;
  double a = 0.0;
  double b = 1.0;

  void validate() const {
    if (!(a < b)) throw std::invalid_argument("FracDerivSpec: need a < b");
    if (!(alpha > 0.0) || !(alpha < 1.0))
      throw std::invalid_argument("FracDerivSpec: alpha must lie in (0,1)");
  }

  Eigen::VectorXd evaluate(const SampledPath& f, double t) const;
};

namespace detail {

// Linear interpolation of the sampled path at an arbitrary time.
inline Eigen::VectorXd interp(const SampledPath& p, double t) {
  const auto& grid = p.grid();
  if (t <= 0.0) return p.value(0);
  if (t >= grid.horizon()) return p.value(grid.subintervals());
  const double pos = t / grid.dt();
  const int j = std::min(static_cast<int>(pos), grid.subintervals() - 1);
  const double w = pos - j;
  return (1.0 - w) * p.col(j) + w * p.col(j + 1);
}

} // namespace detail

/// Left-sided fractional derivative of order alpha at time t:
///   D^a_{a+} f(t) = (1/Gamma(1-a)) ( f(t)/(t-a)^a
///                   + a int_a^t (f(t)-f(s)) / (t-s)^(a+1) ds ).
/// f is read as its piecewise-linear interpolant, so the singular integral
/// has a closed form on every cell and the value is exact for that
/// interpolant. a is snapped to a grid node; t may be any point in (a, T].
inline Eigen::VectorXd frac_deriv_left(const SampledPath& f, double a,
                                       double alpha, double t) {
  if (!(alpha > 0.0) || !(alpha < 1.0))
    throw std::invalid_argument("frac_deriv_left: alpha must lie in (0,1)");
  const auto& grid = f.grid();
  const double anode = grid.node(grid.nearest_node(a));
  if (!(t > anode))
    throw std::invalid_argument("frac_deriv_left: requires t > a");
  if (t > grid.horizon() * (1.0 + 1e-12))
    throw std::invalid_argument("frac_deriv_left: t beyond grid horizon");

  const int d = f.dim();
  const double dt = grid.dt();
  const Eigen::VectorXd ft = detail::interp(f, t);
  Eigen::VectorXd integral = Eigen::VectorXd::Zero(d);
  for (int j = grid.nearest_node(anode); grid.node(j) < t; ++j) {
    const double c0 = grid.node(j);
    const double c1 = std::min(grid.node(j + 1), t);
    const bool touches_t = (c1 >= t);
    const double ua = t - c1;
    const double ub = t - c0;
    for (int c = 0; c < d; ++c) {
      const double slope = (f.at(j + 1, c) - f.at(j, c)) / dt;
      const double A = touches_t ? 0.0 : ft(c) - f.at(j, c) - (t - c0) * slope;
      integral(c) += detail::weight_int_left(A, slope, ua, ub, alpha);
    }
  }
  const double gamma_fac = 1.0 / std::tgamma(1.0 - alpha);
  return gamma_fac *
         (ft / std::pow(t - anode, alpha) + alpha * integral).eval();
}

/// Right-sided fractional derivative of order alpha at time t:
///   (1/Gamma(1-a)) ( f(t)/(b-t)^a + a int_t^b (f(t)-f(s)) / (s-t)^(a+1) ds ).
/// This is the real bracket of the classical definition; the (-1)^a phase is
/// omitted here (so the alpha -> 0 limit is the identity) and accounted for
/// inside rs_integral_forpart, where the two phases combine to -1.
inline Eigen::VectorXd frac_deriv_right(const SampledPath& f, double b,
                                        double alpha, double t) {
  if (!(alpha > 0.0) || !(alpha < 1.0))
    throw std::invalid_argument("frac_deriv_right: alpha must lie in (0,1)");
  const auto& grid = f.grid();
  const int kb = grid.nearest_node(b);
  const double bnode = grid.node(kb);
  if (!(t < bnode))
    throw std::invalid_argument("frac_deriv_right: requires t < b");
  if (t < -1e-12)
    throw std::invalid_argument("frac_deriv_right: t below grid start");

  const int d = f.dim();
  const double dt = grid.dt();
  const Eigen::VectorXd ft = detail::interp(f, t);
  Eigen::VectorXd integral = Eigen::VectorXd::Zero(d);
  const int jt = std::min(static_cast<int>(t / dt), grid.subintervals() - 1);
  for (int j = jt; j < kb; ++j) {
    const double c0 = std::max(grid.node(j), t);
    const double c1 = grid.node(j + 1);
    if (!(c1 > c0)) continue;
    const bool touches_t = (c0 <= t);
    const double ua = c0 - t;
    const double ub = c1 - t;
    for (int c = 0; c < d; ++c) {
      const double slope = (f.at(j + 1, c) - f.at(j, c)) / dt;
      // phi(u) = f(t) - f(t+u) = A - slope*u on this cell
      const double A =
          touches_t ? 0.0 : ft(c) - f.at(j, c) - (t - grid.node(j)) * slope;
      integral(c) += detail::weight_int_left(A, -slope, ua, ub, alpha);
    }
  }
  const double gamma_fac = 1.0 / std::tgamma(1.0 - alpha);
  return gamma_fac *
         (ft / std::pow(bnode - t, alpha) + alpha * integral).eval();
}

inline Eigen::VectorXd FracDerivSpec::evaluate(const SampledPath& f,
                                               double t) const {
  validate();
  return side == FracSide::LeftAPlus ? frac_deriv_left(f, a, alpha, t)
                                     : frac_deriv_right(f, b, alpha, t);
}

/// Left-point Riemann-Stieltjes sum of int f dg over [a,b], componentwise.
/// Serves as the independent refinement-sum oracle for the fractional route.
inline Eigen::VectorXd rs_integral_sums(const SampledPath& f,
                                        const SampledPath& g, double a,
                                        double b) {
  if (!f.same_grid(g))
    throw std::invalid_argument("rs_integral_sums: grid mismatch");
  if (f.dim() != g.dim())
    throw std::invalid_argument("rs_integral_sums: dimension mismatch");
  int ka, kb;
  detail::check_interval_nodes(f.grid(), a, b, ka, kb);
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(f.dim());
  for (int k = ka; k < kb; ++k)
    acc += f.value(k).cwiseProduct(g.value(k + 1) - g.value(k));
  return acc;
}

/// Young integral via the fractional integration-by-parts representation:
///   int_a^b f dg = - int_a^b D^alpha_{a+} f(t) * D^{1-alpha}_{b-} g_{b-}(t) dt
/// with real-valued one-sided derivatives (the product of the two omitted
/// phases is -1). The outer integral uses the composite midpoint rule over
/// grid cells, since both derivative factors are singular at the endpoints.
inline Eigen::VectorXd rs_integral_forpart(const SampledPath& f,
                                           const SampledPath& g, double a,
                                           double b, double alpha) {
  if (!f.same_grid(g))
    throw std::invalid_argument("rs_integral_forpart: grid mismatch");
  if (f.dim() != g.dim())
    throw std::invalid_argument("rs_integral_forpart: dimension mismatch");
  if (!(alpha > 0.0) || !(alpha < 0.5))
    throw std::invalid_argument("rs_integral_forpart: alpha must lie in (0,1/2)");
  int ka, kb;
  detail::check_interval_nodes(f.grid(), a, b, ka, kb);
  const auto& grid = f.grid();
  const double anode = grid.node(ka);
  const double bnode = grid.node(kb);

  SampledPath g_bm = g;
  const Eigen::VectorXd gb = g.value(kb);
  for (int k = 0; k < g.node_count(); ++k) g_bm.col(k) -= gb;

  Eigen::VectorXd acc = Eigen::VectorXd::Zero(f.dim());
  const double dt = grid.dt();
  for (int c = ka; c < kb; ++c) {
    const double tm = 0.5 * (grid.node(c) + grid.node(c + 1));
    const Eigen::VectorXd dl = frac_deriv_left(f, anode, alpha, tm);
    const Eigen::VectorXd dr = frac_deriv_right(g_bm, bnode, 1.0 - alpha, tm);
    acc += dl.cwiseProduct(dr) * dt;
  }
  return -acc;
}

} // namespace svie
