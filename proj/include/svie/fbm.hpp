#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "svie/errors.hpp"
#include "svie/grid.hpp"
#include "svie/quadrature.hpp"
#include "svie/rng.hpp"

namespace svie {

/// Regularity parameters (H, alpha, beta, delta, mu) with the admissibility
/// constraints 1-H < alpha < min{1/2, beta, delta/(1+delta)} and 1-mu < alpha.
struct FracParams {
  double H;
  double alpha;
  double beta = 1.0;
  double delta = 1.0;
  double mu = 1.0;

  /// Collects every violated constraint; empty means admissible.
  std::vector<std::string> violations() const {
    std::vector<std::string> v;
    auto say = [&](const std::string& s) { v.push_back(s); };
    if (!(H > 0.5 && H < 1.0)) say("H must lie in (1/2,1), got " + std::to_string(H));
    if (!(beta > 0.0 && beta <= 1.0)) say("beta must lie in (0,1]");
    if (!(delta > 0.0 && delta <= 1.0)) say("delta must lie in (0,1]");
    if (!(mu > 0.0 && mu <= 1.0)) say("mu must lie in (0,1]");
    if (!(alpha > 1.0 - H))
      say("alpha must exceed 1-H=" + std::to_string(1.0 - H));
    if (!(alpha < 0.5)) say("alpha must be below 1/2");
    if (!(alpha < beta)) say("alpha must be below beta");
    if (!(alpha < delta / (1.0 + delta)))
      say("alpha must be below delta/(1+delta)=" + std::to_string(delta / (1.0 + delta)));
    if (!(1.0 - mu < alpha))
      say("alpha must exceed 1-mu=" + std::to_string(1.0 - mu));
    return v;
  }

  bool admissible() const { return violations().empty(); }
};

/// Default integration order for a driver of Hurst index H: 1.2*(1-H),
/// clipped into the open interval (1-H, 1/2).
inline double default_alpha(double H) {
  const double lo = 1.0 - H;
  const double a = 1.2 * lo;
  if (a < 0.5) return a;
  return 0.5 * (lo + 0.5);
}

inline void check_hurst(double H) {
  if (!(H > 0.5) || !(H < 1.0))
    throw std::invalid_argument("Hurst parameter must lie in (1/2,1)");
}

/// fBm covariance R_H(t,s) = (t^{2H} + s^{2H} - |t-s|^{2H}) / 2.
inline double covariance_rh(double t, double s, double H) {
  check_hurst(H);
  if (t < 0.0 || s < 0.0)
    throw std::invalid_argument("covariance_rh: times must be nonnegative");
  const double h2 = 2.0 * H;
  return 0.5 * (std::pow(t, h2) + std::pow(s, h2) - std::pow(std::abs(t - s), h2));
}

/// Normalization constant c_H = sqrt(H(2H-1) / B(2-2H, H-1/2)), with the Beta
/// function evaluated through log-gamma.
inline double kernel_ch(double H) {
  check_hurst(H);
  const double log_beta =
      std::lgamma(2.0 - 2.0 * H) + std::lgamma(H - 0.5) - std::lgamma(1.5 - H);
  return std::sqrt(H * (2.0 * H - 1.0) / std::exp(log_beta));
}

/// Square-integrable Volterra kernel
///   K_H(t,s) = c_H s^{1/2-H} int_s^t (u-s)^{H-3/2} u^{H-1/2} du,  t > s > 0,
/// and 0 for t <= s. The substitution v = (u-s)^{H-1/2} removes the endpoint
/// singularity exactly, leaving a bounded integrand for Gauss-Legendre.
inline double kernel_kh(double t, double s, double H) {
  check_hurst(H);
  if (!(s > 0.0)) throw std::invalid_argument("kernel_kh: requires s > 0");
  if (t <= s) return 0.0;
  const double theta = H - 0.5;
  const double vmax = std::pow(t - s, theta);
  const double integral = gauss_legendre_64(
      [&](double v) { return std::pow(s + std::pow(v, 1.0 / theta), theta); },
      0.0, vmax);
  return kernel_ch(H) * std::pow(s, -theta) * integral / theta;
}

/// dK_H/dt (t,s) = c_H (t/s)^{H-1/2} (t-s)^{H-3/2} for 0 < s < t.
inline double kernel_kh_dt(double t, double s, double H) {
  check_hurst(H);
  if (!(s > 0.0)) throw std::invalid_argument("kernel_kh_dt: requires s > 0");
  if (!(t > s)) throw std::invalid_argument("kernel_kh_dt: requires t > s");
  return kernel_ch(H) * std::pow(t / s, H - 0.5) * std::pow(t - s, H - 1.5);
}

/// Exact Gaussian sampler for fBm on a fixed grid: dense Cholesky of the node
/// covariance, computed once and reused across paths. Immutable afterwards
/// and safe to share between workers.
class GaussianSampler {
public:
  GaussianSampler(const TimeGrid& grid, double H) : grid_(grid), H_(H) {
    check_hurst(H);
    const int n = grid.subintervals();
    Eigen::MatrixXd cov(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j <= i; ++j) {
        const double v = covariance_rh(grid.node(i + 1), grid.node(j + 1), H);
        cov(i, j) = v;
        cov(j, i) = v;
      }
    // Jitter ladder: the matrix is SPD in exact arithmetic, jitter only
    // patches rounding. 1e-12 escalating tenfold up to 1e-8, then fail.
    double jitter = 0.0;
    for (;;) {
      Eigen::MatrixXd work = cov;
      if (jitter > 0.0)
        work.diagonal().array() += jitter;
      Eigen::LLT<Eigen::MatrixXd> llt(work);
      if (llt.info() == Eigen::Success) {
        factor_ = llt.matrixL();
        return;
      }
      jitter = (jitter == 0.0) ? 1e-12 : jitter * 10.0;
      if (jitter > 1.000001e-8)
        throw numeric_error("GaussianSampler: Cholesky failed after jitter ladder");
    }
  }

  const TimeGrid& grid() const { return grid_; }
  double hurst() const { return H_; }
  const Eigen::MatrixXd& cholesky_factor() const { return factor_; }

  /// m independent scalar fBm components; node 0 is exactly 0. Deterministic
  /// in (seed): same seed gives bit-identical paths.
  SampledPath sample(int m, std::uint64_t seed) const {
    if (m < 1) throw std::invalid_argument("GaussianSampler: m must be >= 1");
    const int n = grid_.subintervals();
    Rng rng(seed);
    SampledPath path(grid_, m);
    Eigen::VectorXd z(n);
    for (int c = 0; c < m; ++c) {
      for (int i = 0; i < n; ++i) z(i) = rng.next_normal();
      Eigen::VectorXd w = factor_.triangularView<Eigen::Lower>() * z;
      path.at(0, c) = 0.0;
      for (int k = 1; k <= n; ++k) path.at(k, c) = w(k - 1);
    }
    return path;
  }

private:
  TimeGrid grid_;
  double H_;
  Eigen::MatrixXd factor_;
};

/// One-shot convenience wrapper; ensembles should construct the sampler once.
inline SampledPath sample_fbm(const TimeGrid& grid, double H, int m,
                              std::uint64_t seed) {
  return GaussianSampler(grid, H).sample(m, seed);
}

namespace detail {

/// Second difference of k -> (k dt)^{2H}, which is exactly
/// H(2H-1) times the double integral of |r-s|^{2H-2} over a cell pair at that
/// lag. Positive since x^{2H} is convex.
inline std::vector<double> cell_lag_weights(const TimeGrid& grid, double H,
                                            int cells) {
  std::vector<double> pw(cells + 2);
  for (int k = 0; k < cells + 2; ++k)
    pw[k] = std::pow(k * grid.dt(), 2.0 * H);
  std::vector<double> w(cells + 1);
  for (int k = 0; k <= cells; ++k) {
    const double lo = (k == 0) ? pw[1] : pw[k - 1];
    w[k] = 0.5 * (pw[k + 1] + lo - 2.0 * pw[k]);
  }
  return w;
}

} // namespace detail

/// Inner product of the fBm Hilbert space,
///   <phi,psi>_H = H(2H-1) sum_j intint phi^j(s) psi^j(r) |r-s|^{2H-2} ds dr,
/// with paths treated as piecewise constant per grid cell (left node value)
/// and the singular weight integrated in closed form over each cell pair.
inline double h_inner_product(const SampledPath& phi, const SampledPath& psi,
                              double H) {
  check_hurst(H);
  if (!phi.same_grid(psi) || phi.dim() != psi.dim())
    throw std::invalid_argument("h_inner_product: paths must share grid and dim");
  const int cells = phi.grid().subintervals();
  const auto w = detail::cell_lag_weights(phi.grid(), H, cells);
  double acc = 0.0;
  for (int c = 0; c < phi.dim(); ++c) {
    for (int i = 0; i < cells; ++i) {
      const double pi_ = phi.at(i, c);
      if (pi_ == 0.0) continue;
      double row = 0.0;
      for (int j = 0; j < cells; ++j)
        row += psi.at(j, c) * w[std::abs(i - j)];
      acc += pi_ * row;
    }
  }
  return acc;
}

/// Test-only discretization of (K*_H phi)(s) = int_s^T phi(t) dK_H/dt (t,s) dt.
/// Applied to an indicator it reproduces the kernel itself. The (t-s)^{H-3/2}
/// factor is integrated exactly per cell; the smooth (t/s)^{H-1/2} factor is
/// frozen at the cell midpoint. Node 0 is left at zero (kernel singular there).
inline SampledPath kstar_apply(const SampledPath& phi, double H) {
  check_hurst(H);
  const auto& grid = phi.grid();
  const int n = grid.subintervals();
  const double ch = kernel_ch(H);
  const double theta = H - 0.5;
  SampledPath out(grid, phi.dim());
  for (int k = 1; k <= n; ++k) {
    const double s = grid.node(k);
    for (int c = 0; c < phi.dim(); ++c) {
      double acc = 0.0;
      for (int j = k; j < n; ++j) {
        const double v = phi.at(j, c);
        if (v == 0.0) continue;
        const double t0 = grid.node(j), t1 = grid.node(j + 1);
        const double tm = 0.5 * (t0 + t1);
        const double smooth = ch * std::pow(tm / s, theta);
        const double sing =
            (std::pow(t1 - s, theta) - std::pow(t0 - s, theta)) / theta;
        acc += v * smooth * sing;
      }
      out.at(k, c) = acc;
    }
  }
  return out;
}

} // namespace svie
