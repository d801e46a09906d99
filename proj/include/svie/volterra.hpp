#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <concepts>
#include <stdexcept>
#include <string>
#include <vector>

#include "svie/errors.hpp"
#include "svie/grid.hpp"
#include "svie/parallel.hpp"

namespace svie {

using VecRef = Eigen::Ref<Eigen::VectorXd>;
using ConstVecRef = Eigen::Ref<const Eigen::VectorXd>;
using MatRef = Eigen::Ref<Eigen::MatrixXd>;

/// Two-time coefficients of the Volterra equation: drift b(t,s,x) in R^d and
/// diffusion sigma(t,s,x) in R^{d x m}. Evaluators write into caller-provided
/// blocks so the O(n^2) solver loops do not allocate.
template <typename M>
concept coefficient_model =
    requires(const M& m, double t, double s, ConstVecRef x, VecRef v, MatRef a) {
      { m.state_dim() } -> std::convertible_to<int>;
      { m.driver_dim() } -> std::convertible_to<int>;
      m.drift(t, s, x, v);
      m.diffusion(t, s, x, a);
    };

/// Adds the state Jacobians needed by the sensitivity equation. The diffusion
/// Jacobian is laid out d x (m*d) with block k equal to d(sigma)/d(x_k).
template <typename M>
concept differentiable_model =
    coefficient_model<M> &&
    requires(const M& m, double t, double s, ConstVecRef x, MatRef a) {
      m.drift_jacobian(t, s, x, a);
      m.diffusion_jacobian(t, s, x, a);
    };

/// Opt-in fast path for coefficients of the form
///   sigma(t,s,x) = sum_r tau_r(t) * S_r(s,x)   (and likewise for b).
/// The outer-time dependence then factors out of the history sums and the
/// pathwise solvers drop from O(n^2) (resp. O(n^3) for the field) coefficient
/// evaluations to O(n) (resp. O(n^2)).
template <typename M>
concept separable_model =
    coefficient_model<M> &&
    requires(const M& m, int r, double t, double s, ConstVecRef x, VecRef v,
             MatRef a) {
      { m.drift_rank() } -> std::convertible_to<int>;
      { m.diffusion_rank() } -> std::convertible_to<int>;
      { m.drift_time_factor(r, t) } -> std::convertible_to<double>;
      { m.diffusion_time_factor(r, t) } -> std::convertible_to<double>;
      m.drift_space(r, s, x, v);
      m.diffusion_space(r, s, x, a);
    };

template <typename M>
concept separable_differentiable_model =
    separable_model<M> && differentiable_model<M> &&
    requires(const M& m, int r, double s, ConstVecRef x, MatRef a) {
      m.drift_space_jacobian(r, s, x, a);
      m.diffusion_space_jacobian(r, s, x, a);
    };

/// Hides the separable interface of a model; used to force the direct
/// reference solver in cross-validation tests.
template <typename M>
struct DirectView {
  const M& inner;
  int state_dim() const { return inner.state_dim(); }
  int driver_dim() const { return inner.driver_dim(); }
  void drift(double t, double s, ConstVecRef x, VecRef out) const {
    inner.drift(t, s, x, out);
  }
  void diffusion(double t, double s, ConstVecRef x, MatRef out) const {
    inner.diffusion(t, s, x, out);
  }
  void drift_jacobian(double t, double s, ConstVecRef x, MatRef out) const {
    inner.drift_jacobian(t, s, x, out);
  }
  void diffusion_jacobian(double t, double s, ConstVecRef x, MatRef out) const {
    inner.diffusion_jacobian(t, s, x, out);
  }
};

namespace detail {

inline void check_driver(int m, const SampledPath& g, const TimeGrid& grid) {
  if (!(g.grid() == grid))
    throw std::invalid_argument("solver: driver grid mismatch");
  if (g.dim() != m)
    throw std::invalid_argument("solver: driver dimension mismatch");
}

// column j = g(t_{j+1}) - g(t_j); hoists the increment out of the hot loops
inline Eigen::MatrixXd driver_increments(const SampledPath& g) {
  const int n = g.grid().subintervals();
  Eigen::MatrixXd dg(g.dim(), n);
  for (int j = 0; j < n; ++j) dg.col(j) = g.value(j + 1) - g.value(j);
  return dg;
}

[[noreturn]] inline void overflow_at(const char* who, int k, int s = -1) {
  std::string msg = std::string(who) + ": non-finite value at node " +
                    std::to_string(k);
  if (s >= 0) msg += " (s-node " + std::to_string(s) + ")";
  throw numeric_error(msg);
}

} // namespace detail

/// Pathwise Euler solution of
///   x_t = x_0 + int_0^t b(t,s,x_s) ds + int_0^t sigma(t,s,x_s) dg_s
/// on the grid: both integrals are left-point sums, and every node
/// re-evaluates the whole history because t enters the integrands.
template <coefficient_model M>
SampledPath solve_svie(const M& model, const Eigen::VectorXd& x0,
                       const SampledPath& g, const TimeGrid& grid) {
  const int d = model.state_dim();
  const int m = model.driver_dim();
  if (x0.size() != d)
    throw std::invalid_argument("solve_svie: x0 dimension mismatch");
  detail::check_driver(m, g, grid);
  const int n = grid.subintervals();
  const double dt = grid.dt();

  SampledPath x(grid, d);
  x.col(0) = x0;

  const Eigen::MatrixXd dgs = detail::driver_increments(g);

  if constexpr (separable_model<M>) {
    const int rb = model.drift_rank();
    const int rs = model.diffusion_rank();
    std::vector<Eigen::VectorXd> accb(rb, Eigen::VectorXd::Zero(d));
    std::vector<Eigen::VectorXd> accs(rs, Eigen::VectorXd::Zero(d));
    Eigen::VectorXd bv(d), acc(d);
    Eigen::MatrixXd sv(d, m);
    for (int k = 1; k <= n; ++k) {
      const int j = k - 1; // extend history sums with node j
      const double sj = grid.node(j);
      for (int r = 0; r < rb; ++r) {
        model.drift_space(r, sj, x.col(j), bv);
        accb[r] += bv * dt;
      }
      for (int r = 0; r < rs; ++r) {
        model.diffusion_space(r, sj, x.col(j), sv);
        accs[r].noalias() += sv * dgs.col(j);
      }
      const double tk = grid.node(k);
      acc = x0;
      for (int r = 0; r < rb; ++r) acc += model.drift_time_factor(r, tk) * accb[r];
      for (int r = 0; r < rs; ++r)
        acc += model.diffusion_time_factor(r, tk) * accs[r];
      if (!acc.allFinite()) detail::overflow_at("solve_svie", k);
      x.col(k) = acc;
    }
  } else {
    Eigen::VectorXd bv(d), acc(d);
    Eigen::MatrixXd sv(d, m);
    for (int k = 1; k <= n; ++k) {
      const double tk = grid.node(k);
      acc = x0;
      for (int j = 0; j < k; ++j) {
        const double sj = grid.node(j);
        model.drift(tk, sj, x.col(j), bv);
        acc += bv * dt;
        model.diffusion(tk, sj, x.col(j), sv);
        acc.noalias() += sv * dgs.col(j);
      }
      if (!acc.allFinite()) detail::overflow_at("solve_svie", k);
      x.col(k) = acc;
    }
  }
  return x;
}

/// Linear two-time system driven by an already-solved path x:
///   z_t = w_t + int_0^t h(t,r,x_r) z_r dr + int_0^t f(t,r,x_r) z_r dg_r,
/// with h d x d and f a d x d x m tensor laid out d x (d*m), block layout
/// matching diffusion_jacobian: entry (i, k*m + l) = f^{i k l}.
template <typename L>
concept linear_system_model =
    requires(const L& sys, double t, double s, ConstVecRef x, VecRef v, MatRef a) {
      { sys.state_dim() } -> std::convertible_to<int>;
      { sys.driver_dim() } -> std::convertible_to<int>;
      sys.h_eval(t, s, x, a);
      sys.f_eval(t, s, x, a);
      sys.w_eval(t, v);
    };

/// Wraps a differentiable model into the linear system of its sensitivity
/// equation: h = db/dx, f = dsigma/dx, with constant forcing path w.
template <differentiable_model M>
struct SensitivitySystem {
  const M& model;
  Eigen::VectorXd w0;
  int state_dim() const { return model.state_dim(); }
  int driver_dim() const { return model.driver_dim(); }
  void h_eval(double t, double s, ConstVecRef x, MatRef out) const {
    model.drift_jacobian(t, s, x, out);
  }
  void f_eval(double t, double s, ConstVecRef x, MatRef out) const {
    model.diffusion_jacobian(t, s, x, out);
  }
  void w_eval(double, VecRef out) const { out = w0; }
};

namespace detail {

// v += (f z) dg with the d x (d*m) tensor layout.
inline void tensor_apply(const Eigen::MatrixXd& f, ConstVecRef z, ConstVecRef dg,
                         Eigen::VectorXd& v) {
  const int d = static_cast<int>(z.size());
  const int m = static_cast<int>(dg.size());
  for (int k = 0; k < d; ++k)
    v.noalias() += z(k) * (f.block(0, k * m, f.rows(), m) * dg);
}

} // namespace detail

template <linear_system_model L>
SampledPath solve_linear_z(const L& sys, const SampledPath& x,
                           const SampledPath& g, const TimeGrid& grid) {
  const int d = sys.state_dim();
  const int m = sys.driver_dim();
  detail::check_driver(m, g, grid);
  if (!(x.grid() == grid) || x.dim() != d)
    throw std::invalid_argument("solve_linear_z: state path mismatch");
  const int n = grid.subintervals();
  const double dt = grid.dt();

  const Eigen::MatrixXd dgs = detail::driver_increments(g);
  SampledPath z(grid, d);
  Eigen::VectorXd wv(d), acc(d);
  Eigen::MatrixXd hv(d, d), fv(d, d * m);
  sys.w_eval(0.0, wv);
  z.col(0) = wv;
  for (int k = 1; k <= n; ++k) {
    const double tk = grid.node(k);
    sys.w_eval(tk, wv);
    acc = wv;
    for (int j = 0; j < k; ++j) {
      const double sj = grid.node(j);
      sys.h_eval(tk, sj, x.col(j), hv);
      acc.noalias() += hv * z.col(j) * dt;
      sys.f_eval(tk, sj, x.col(j), fv);
      detail::tensor_apply(fv, z.col(j), dgs.col(j), acc);
    }
    if (!acc.allFinite()) detail::overflow_at("solve_linear_z", k);
    z.col(k) = acc;
  }
  return z;
}

/// Two-parameter sensitivity field Phi_t(s) in R^{d x m}, stored for the
/// lower triangle s <= t; Phi_t(s) = 0 for s > t and Phi_t(t) = sigma(t,t,x_t).
class SensitivityField {
public:
  SensitivityField(const TimeGrid& grid, int d, int m)
      : grid_(grid), d_(d), m_(m),
        data_(static_cast<std::size_t>(grid.node_count()) *
                  (grid.node_count() + 1) / 2 * d * m,
              0.0) {}

  const TimeGrid& grid() const { return grid_; }
  int state_dim() const { return d_; }
  int driver_dim() const { return m_; }

  Eigen::Map<Eigen::MatrixXd> phi(int t, int s) {
    return Eigen::Map<Eigen::MatrixXd>(data_.data() + offset(t, s), d_, m_);
  }
  Eigen::Map<const Eigen::MatrixXd> phi(int t, int s) const {
    return Eigen::Map<const Eigen::MatrixXd>(data_.data() + offset(t, s), d_, m_);
  }

  /// Zero above the diagonal by convention.
  Eigen::MatrixXd value(int t, int s) const {
    if (s > t) return Eigen::MatrixXd::Zero(d_, m_);
    return phi(t, s);
  }

private:
  std::size_t offset(int t, int s) const {
    return (static_cast<std::size_t>(t) * (t + 1) / 2 + s) *
           static_cast<std::size_t>(d_ * m_);
  }

  TimeGrid grid_;
  int d_, m_;
  std::vector<double> data_;
};

namespace detail {

// W(i,k) = sum_l jac(i, k*m+l) * dg(l): the dg-contracted Jacobian.
inline void contract_jacobian(const Eigen::MatrixXd& jac, ConstVecRef dg,
                              Eigen::MatrixXd& w) {
  const int d = static_cast<int>(w.rows());
  const int m = static_cast<int>(dg.size());
  for (int k = 0; k < d; ++k)
    w.col(k).noalias() = jac.block(0, k * m, d, m) * dg;
}

} // namespace detail

/// Solves the linear equation for one s-slice of the field,
///   Phi_t(s) = sigma(t,s,x_s) + int_s^t dsigma(t,u,x_u)[Phi_u(s)] dg_u
///            + int_s^t db(t,u,x_u) Phi_u(s) du,
/// writing Phi_t(s) for t = s..n into the field. `dgs` holds the driver
/// increments (see driver_increments). The history sums run over u strictly
/// between s and t, which makes the discrete field exactly the derivative of
/// the discrete solve_svie map with respect to the driver.
template <differentiable_model M>
void solve_sensitivity_slice(const M& model, const SampledPath& x,
                             const Eigen::MatrixXd& dgs, const TimeGrid& grid,
                             int s_index, SensitivityField& field) {
  const int d = model.state_dim();
  const int m = model.driver_dim();
  const int n = grid.subintervals();
  const double dt = grid.dt();
  const double ts = grid.node(s_index);

  Eigen::MatrixXd sig(d, m), acc(d, m);

  if constexpr (separable_differentiable_model<M>) {
    const int rb = model.drift_rank();
    const int rs = model.diffusion_rank();
    std::vector<Eigen::MatrixXd> accs(rs, Eigen::MatrixXd::Zero(d, m));
    std::vector<Eigen::MatrixXd> accb(rb, Eigen::MatrixXd::Zero(d, m));
    Eigen::MatrixXd jac(d, m * d), w(d, d);
    model.diffusion(ts, ts, x.col(s_index), sig);
    field.phi(s_index, s_index) = sig;
    for (int k = s_index + 1; k <= n; ++k) {
      const int u = k - 1; // extend the history sums with node u (u > s only)
      if (u > s_index) {
        const double tu = grid.node(u);
        for (int r = 0; r < rs; ++r) {
          model.diffusion_space_jacobian(r, tu, x.col(u), jac);
          detail::contract_jacobian(jac, dgs.col(u), w);
          accs[r].noalias() += w * field.phi(u, s_index);
        }
        for (int r = 0; r < rb; ++r) {
          model.drift_space_jacobian(r, tu, x.col(u), w);
          accb[r].noalias() += w * field.phi(u, s_index) * dt;
        }
      }
      const double tk = grid.node(k);
      model.diffusion(tk, ts, x.col(s_index), acc);
      for (int r = 0; r < rs; ++r)
        acc += model.diffusion_time_factor(r, tk) * accs[r];
      for (int r = 0; r < rb; ++r)
        acc += model.drift_time_factor(r, tk) * accb[r];
      if (!acc.allFinite())
        detail::overflow_at("solve_sensitivity_field", k, s_index);
      field.phi(k, s_index) = acc;
    }
  } else {
    Eigen::MatrixXd jac(d, m * d), w(d, d), hj(d, d);
    model.diffusion(ts, ts, x.col(s_index), sig);
    field.phi(s_index, s_index) = sig;
    for (int k = s_index + 1; k <= n; ++k) {
      const double tk = grid.node(k);
      model.diffusion(tk, ts, x.col(s_index), acc);
      for (int u = s_index + 1; u < k; ++u) {
        const double tu = grid.node(u);
        model.diffusion_jacobian(tk, tu, x.col(u), jac);
        detail::contract_jacobian(jac, dgs.col(u), w);
        acc.noalias() += w * field.phi(u, s_index);
        model.drift_jacobian(tk, tu, x.col(u), hj);
        acc.noalias() += hj * field.phi(u, s_index) * dt;
      }
      if (!acc.allFinite())
        detail::overflow_at("solve_sensitivity_field", k, s_index);
      field.phi(k, s_index) = acc;
    }
  }
}

/// Full lower-triangular field; slices for distinct s are independent and run
/// in parallel when workers > 1.
template <differentiable_model M>
SensitivityField solve_sensitivity_field(const M& model, const SampledPath& x,
                                         const SampledPath& g,
                                         const TimeGrid& grid,
                                         int workers = 1) {
  const int d = model.state_dim();
  const int m = model.driver_dim();
  detail::check_driver(m, g, grid);
  if (!(x.grid() == grid) || x.dim() != d)
    throw std::invalid_argument("solve_sensitivity_field: state path mismatch");
  SensitivityField field(grid, d, m);
  const Eigen::MatrixXd dgs = detail::driver_increments(g);
  parallel_for(grid.node_count(), workers, [&](int s) {
    solve_sensitivity_slice(model, x, dgs, grid, s, field);
  });
  return field;
}

/// Directional (Frechet) derivative of the solution along h:
///   (D_h x)_t = sum_j int_0^t Phi_t(s) dh_s, as a left-point sum.
inline SampledPath frechet_direction(const SensitivityField& field,
                                     const SampledPath& h) {
  if (!(h.grid() == field.grid()))
    throw std::invalid_argument("frechet_direction: grid mismatch");
  if (h.dim() != field.driver_dim())
    throw std::invalid_argument("frechet_direction: direction dimension mismatch");
  const int n = field.grid().subintervals();
  const Eigen::MatrixXd dhs = detail::driver_increments(h);
  SampledPath out(field.grid(), field.state_dim());
  Eigen::VectorXd acc(field.state_dim());
  for (int k = 1; k <= n; ++k) {
    acc.setZero();
    for (int j = 0; j < k; ++j)
      acc.noalias() += field.phi(k, j) * dhs.col(j);
    out.col(k) = acc;
  }
  return out;
}

} // namespace svie
