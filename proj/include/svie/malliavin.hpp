#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "svie/errors.hpp"
#include "svie/fbm.hpp"
#include "svie/grid.hpp"
#include "svie/stats.hpp"
#include "svie/volterra.hpp"

namespace svie {

/// The Malliavin derivative D_s X_t solves the same linear Volterra equation
/// as the Frechet sensitivity field with the fBm path as driver, so this is
/// the sensitivity solver under its probabilistic name.
template <differentiable_model M>
SensitivityField malliavin_field(const M& model, const SampledPath& x,
                                 const SampledPath& w, const TimeGrid& grid,
                                 int workers = 1) {
  return solve_sensitivity_field(model, x, w, grid, workers);
}

struct MalliavinMatrix {
  int t_index = 0;
  double t = 0.0;
  Eigen::MatrixXd gamma;
};

/// Gram matrix Gamma_t^{ij} = <D X_t^i, D X_t^j>_H restricted to [0,t], using
/// the |r-s|^{2H-2} kernel integrated in closed form per cell pair (the same
/// lag weights as h_inner_product).
inline MalliavinMatrix malliavin_matrix(const SensitivityField& field,
                                        int t_index, double H) {
  check_hurst(H);
  const auto& grid = field.grid();
  if (t_index < 0 || t_index > grid.subintervals())
    throw std::invalid_argument("malliavin_matrix: t outside grid");
  const int d = field.state_dim();
  const int cells = t_index;
  const auto w = detail::cell_lag_weights(grid, H, std::max(cells, 1));
  MalliavinMatrix out;
  out.t_index = t_index;
  out.t = grid.node(t_index);
  out.gamma = Eigen::MatrixXd::Zero(d, d);
  Eigen::MatrixXd tmp(d, d);
  for (int c = 0; c < cells; ++c) {
    const auto phi_c = field.phi(t_index, c);
    for (int cp = 0; cp < cells; ++cp) {
      tmp.noalias() = phi_c * field.phi(t_index, cp).transpose();
      out.gamma += w[std::abs(c - cp)] * tmp;
    }
  }
  return out;
}

struct GammaSpectrum {
  double min_eigenvalue = 0.0;
  double determinant = 0.0;
};

/// Eigen-decomposition diagnostics; determinant as the eigenvalue product.
inline GammaSpectrum gamma_spectrum(const Eigen::MatrixXd& gamma) {
  const double scale = 1.0 + gamma.cwiseAbs().maxCoeff();
  if ((gamma - gamma.transpose()).cwiseAbs().maxCoeff() > 1e-8 * scale)
    throw std::invalid_argument("gamma_spectrum: matrix not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gamma);
  GammaSpectrum out;
  out.min_eigenvalue = es.eigenvalues().minCoeff();
  out.determinant = es.eigenvalues().prod();
  return out;
}

inline GammaSpectrum gamma_spectrum(const MalliavinMatrix& g) {
  return gamma_spectrum(g.gamma);
}

struct EllipticityProbe {
  double t = 0.0;
  double s = 0.0;
  Eigen::VectorXd x;
};

struct EllipticityReport {
  bool passes = false;
  double min_value = std::numeric_limits<double>::infinity();
  EllipticityProbe worst_probe;
  Eigen::VectorXd worst_direction;
};

namespace detail {

/// Deterministic unit-direction mesh: endpoints for d=1, uniform angles for
/// d=2, a Fibonacci sphere for d=3 and a fixed-seed Gaussian mesh above.
inline std::vector<Eigen::VectorXd> unit_sphere_mesh(int d, int count = 128) {
  std::vector<Eigen::VectorXd> dirs;
  if (d == 1) {
    dirs.push_back(Eigen::VectorXd::Constant(1, 1.0));
    dirs.push_back(Eigen::VectorXd::Constant(1, -1.0));
    return dirs;
  }
  if (d == 2) {
    for (int k = 0; k < count; ++k) {
      const double a = 2.0 * M_PI * k / count;
      Eigen::VectorXd v(2);
      v << std::cos(a), std::sin(a);
      dirs.push_back(v);
    }
    return dirs;
  }
  if (d == 3) {
    const double golden = M_PI * (3.0 - std::sqrt(5.0));
    const int n = std::max(count, 256);
    for (int k = 0; k < n; ++k) {
      const double z = 1.0 - 2.0 * (k + 0.5) / n;
      const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
      const double a = golden * k;
      Eigen::VectorXd v(3);
      v << r * std::cos(a), r * std::sin(a), z;
      dirs.push_back(v);
    }
    return dirs;
  }
  Rng rng(0x5u + static_cast<std::uint64_t>(d));
  for (int k = 0; k < std::max(count, 256); ++k) {
    Eigen::VectorXd v(d);
    for (int i = 0; i < d; ++i) v(i) = rng.next_normal();
    dirs.push_back(v.normalized());
  }
  return dirs;
}

} // namespace detail

/// Checks the uniform-ellipticity condition
///   sum_j ( sum_i sigma^{ij}(t,s,x) xi_i )^2 >= rho^2
/// over the probe list and a deterministic direction mesh, with two rounds of
/// local refinement around the worst direction. Never throws: a violation is
/// reported through the return value together with the witnessing direction.
template <typename SigmaFn>
EllipticityReport ellipticity_check(SigmaFn&& sigma, int d, int m,
                                    const std::vector<EllipticityProbe>& probes,
                                    double rho) {
  if (!(rho > 0.0))
    throw std::invalid_argument("ellipticity_check: rho must be positive");
  if (probes.empty())
    throw std::invalid_argument("ellipticity_check: probe list empty");
  auto dirs = detail::unit_sphere_mesh(d);
  EllipticityReport rep;
  Eigen::MatrixXd sig(d, m);
  auto form = [&](const Eigen::VectorXd& xi) {
    return (sig.transpose() * xi).squaredNorm();
  };
  for (const auto& p : probes) {
    sigma(p.t, p.s, p.x, Eigen::Ref<Eigen::MatrixXd>(sig));
    Eigen::VectorXd worst_xi;
    double worst = std::numeric_limits<double>::infinity();
    for (const auto& xi : dirs) {
      const double q = form(xi);
      if (q < worst) {
        worst = q;
        worst_xi = xi;
      }
    }
    // local refinement around the minimizing direction
    if (d > 1) {
      double radius = 0.2;
      for (int round = 0; round < 2; ++round) {
        Eigen::VectorXd center = worst_xi;
        for (const auto& xi : dirs) {
          Eigen::VectorXd cand = (center + radius * xi).normalized();
          const double q = form(cand);
          if (q < worst) {
            worst = q;
            worst_xi = cand;
          }
        }
        radius *= 0.25;
      }
    }
    if (worst < rep.min_value) {
      rep.min_value = worst;
      rep.worst_probe = p;
      rep.worst_direction = worst_xi;
    }
  }
  // tolerance covers rounding of |xi| = 1 at exact-equality boundaries
  rep.passes = rep.min_value >= rho * rho * (1.0 - 1e-12);
  return rep;
}

struct GradientCheckReport {
  std::vector<double> eps;
  std::vector<double> gaps;
  double slope = std::numeric_limits<double>::quiet_NaN();
  /// Set when the FD difference matches the field to machine precision (the
  /// solver map is linear in the driver); the slope is then meaningless.
  bool linear_exact = false;
};

/// Finite-difference check of the sensitivity field: compares
/// (X(W+eps h) - X(W))/eps against the Young sum of the field along h for an
/// eps ladder and fits the log-log slope of the sup gap. The discrete field
/// is the exact derivative of the discrete solver, so the gap measures the
/// pure Taylor remainder and the slope sits near 1 for C^2 coefficients.
template <differentiable_model M>
GradientCheckReport fd_gradient_check(const M& model, const Eigen::VectorXd& x0,
                                      const SampledPath& w,
                                      const SampledPath& h,
                                      const std::vector<double>& eps_ladder,
                                      int workers = 1) {
  const TimeGrid& grid = w.grid();
  const SampledPath x = solve_svie(model, x0, w, grid);
  const SensitivityField field = solve_sensitivity_field(model, x, w, grid, workers);
  const SampledPath dir = frechet_direction(field, h);

  double dir_scale = 0.0;
  for (int k = 0; k < dir.node_count(); ++k)
    dir_scale = std::max(dir_scale, dir.col(k).norm());

  GradientCheckReport rep;
  for (double eps : eps_ladder) {
    const SampledPath we = path_add_scaled(w, eps, h);
    const SampledPath xe = solve_svie(model, x0, we, grid);
    double gap = 0.0;
    for (int k = 0; k < x.node_count(); ++k) {
      const Eigen::VectorXd fd = (xe.value(k) - x.value(k)) / eps;
      gap = std::max(gap, (fd - dir.value(k)).norm());
    }
    rep.eps.push_back(eps);
    rep.gaps.push_back(gap);
  }
  double max_gap = 0.0;
  for (double g : rep.gaps) max_gap = std::max(max_gap, g);
  if (max_gap <= 1e-9 * (1.0 + dir_scale)) {
    rep.linear_exact = true;
    return rep;
  }
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < rep.eps.size(); ++i) {
    lx.push_back(std::log(rep.eps[i]));
    ly.push_back(std::log(std::max(rep.gaps[i], 1e-300)));
  }
  rep.slope = fit_line(lx, ly).slope;
  return rep;
}

struct Lattice {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;
  Eigen::VectorXi counts;

  int dim() const { return static_cast<int>(counts.size()); }
  int total() const {
    int t = 1;
    for (int i = 0; i < dim(); ++i) t *= counts(i);
    return t;
  }
  double cell_volume() const {
    double v = 1.0;
    for (int i = 0; i < dim(); ++i)
      v *= (hi(i) - lo(i)) / std::max(1, counts(i) - 1);
    return v;
  }
  Eigen::VectorXd point(int flat) const {
    Eigen::VectorXd p(dim());
    for (int i = 0; i < dim(); ++i) {
      const int c = counts(i);
      const int idx = flat % c;
      flat /= c;
      p(i) = (c == 1) ? lo(i) : lo(i) + (hi(i) - lo(i)) * idx / (c - 1);
    }
    return p;
  }
};

struct DensityEstimate {
  Lattice lattice;
  Eigen::VectorXd values;
  Eigen::VectorXd bandwidth;
  int sample_count = 0;

  double mass() const { return values.sum() * lattice.cell_volume(); }
};

/// Scott's rule: per-axis stddev * N^{-1/(d+4)}.
inline Eigen::VectorXd scott_bandwidth(const Eigen::MatrixXd& samples) {
  const int d = static_cast<int>(samples.rows());
  const int n = static_cast<int>(samples.cols());
  Eigen::VectorXd bw(d);
  for (int i = 0; i < d; ++i) {
    const double mean = samples.row(i).mean();
    const double var =
        (samples.row(i).array() - mean).square().sum() / (n - 1);
    bw(i) = std::sqrt(var) * std::pow(static_cast<double>(n),
                                      -1.0 / (d + 4.0));
  }
  return bw;
}

/// Regular lattice covering mean +/- span_sigmas stddev on each axis.
inline Lattice auto_lattice(const Eigen::MatrixXd& samples, int per_axis,
                            double span_sigmas = 5.0) {
  const int d = static_cast<int>(samples.rows());
  const int n = static_cast<int>(samples.cols());
  Lattice lat;
  lat.lo.resize(d);
  lat.hi.resize(d);
  lat.counts = Eigen::VectorXi::Constant(d, per_axis);
  for (int i = 0; i < d; ++i) {
    const double mean = samples.row(i).mean();
    const double sd = std::sqrt(
        (samples.row(i).array() - mean).square().sum() / (n - 1));
    lat.lo(i) = mean - span_sigmas * sd;
    lat.hi(i) = mean + span_sigmas * sd;
  }
  return lat;
}

/// Gaussian product-kernel density estimate on a lattice. Samples are columns
/// of a d x N matrix. Pass an empty bandwidth vector for Scott's rule.
inline DensityEstimate kde_density(const Eigen::MatrixXd& samples,
                                   Eigen::VectorXd bandwidth,
                                   const Lattice& lattice) {
  const int d = static_cast<int>(samples.rows());
  const int n = static_cast<int>(samples.cols());
  if (n < 100)
    throw std::invalid_argument("kde_density: need at least 100 samples");
  if (lattice.dim() != d)
    throw std::invalid_argument("kde_density: lattice dimension mismatch");
  if (bandwidth.size() == 0) bandwidth = scott_bandwidth(samples);
  for (int i = 0; i < d; ++i)
    if (!(bandwidth(i) > 0.0))
      throw degenerate_input("kde_density: zero-variance axis " +
                             std::to_string(i));

  DensityEstimate est;
  est.lattice = lattice;
  est.bandwidth = bandwidth;
  est.sample_count = n;
  est.values.resize(lattice.total());
  const double norm =
      1.0 / (n * std::pow(2.0 * M_PI, 0.5 * d) * bandwidth.prod());
  for (int p = 0; p < lattice.total(); ++p) {
    const Eigen::VectorXd pt = lattice.point(p);
    double acc = 0.0;
    for (int j = 0; j < n; ++j) {
      const double q =
          ((samples.col(j) - pt).array() / bandwidth.array()).square().sum();
      acc += std::exp(-0.5 * q);
    }
    est.values(p) = norm * acc;
  }
  return est;
}

} // namespace svie
