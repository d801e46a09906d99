#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "svie/volterra.hpp"

namespace svie {

/// Certified constants of hypotheses (H1)-(H3) for a coefficient family.
/// These feed the explicit bound formulas, so every built-in family ships
/// with honestly derived values rather than fitted ones.
struct HypothesisConstants {
  double K = 0.0;   // Lipschitz bound for sigma and dt sigma in x
  double L = 0.0;   // t-Lipschitz constant of b
  double L0 = 0.0;  // |b| <= L0 |x| + b0  (or L0 + b0 in the bounded form)
  double b0_const = 0.0; // all built-ins have constant b0(t,s)
  bool sigma_bounded = false;
  double sigma_sup = std::numeric_limits<double>::quiet_NaN();
  double dsigma_sup = 0.0; // sup |dsigma/dx|_F; f-bound of the sensitivity system
  double db_sup = 0.0;     // sup |db/dx|_F; h-bound of the sensitivity system
  double rho = 0.0;        // uniform ellipticity constant; 0 = none claimed
  bool drift_bounded = true; // false when |b| genuinely grows like L0|x|
  double beta = 1.0, delta = 1.0, mu = 1.0;
};

namespace detail {

inline Eigen::MatrixXd identity_pattern(int d, int m) {
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(d, m);
  for (int i = 0; i < std::min(d, m); ++i) p(i, i) = 1.0;
  return p;
}

} // namespace detail

/// sigma == const * identity pattern, b == 0. The simplest elliptic family.
class ConstantDiffusionModel {
public:
  ConstantDiffusionModel(int d, int m, double amp)
      : d_(d), m_(m), sigma_(amp * detail::identity_pattern(d, m)) {
    c_.sigma_bounded = true;
    c_.sigma_sup = sigma_.norm();
    c_.rho = (m >= d) ? std::abs(amp) : 0.0;
  }

  int state_dim() const { return d_; }
  int driver_dim() const { return m_; }
  void drift(double, double, ConstVecRef, VecRef out) const { out.setZero(); }
  void diffusion(double, double, ConstVecRef, MatRef out) const { out = sigma_; }
  void drift_jacobian(double, double, ConstVecRef, MatRef out) const {
    out.setZero();
  }
  void diffusion_jacobian(double, double, ConstVecRef, MatRef out) const {
    out.setZero();
  }

  int drift_rank() const { return 0; }
  int diffusion_rank() const { return 1; }
  double drift_time_factor(int, double) const { return 1.0; }
  double diffusion_time_factor(int, double) const { return 1.0; }
  void drift_space(int, double, ConstVecRef, VecRef out) const { out.setZero(); }
  void diffusion_space(int, double, ConstVecRef, MatRef out) const {
    out = sigma_;
  }
  void drift_space_jacobian(int, double, ConstVecRef, MatRef out) const {
    out.setZero();
  }
  void diffusion_space_jacobian(int, double, ConstVecRef, MatRef out) const {
    out.setZero();
  }

  const HypothesisConstants& constants() const { return c_; }

private:
  int d_, m_;
  Eigen::MatrixXd sigma_;
  HypothesisConstants c_;
};

/// sigma(t,s,x) = (c0 + c1 sin(x_1 + omega t + nu s)) * identity pattern,
/// b == 0. Bounded, elliptic when c0 > |c1| and m >= d; the outer time enters
/// only through sin/cos(omega t), so the model is separable of rank 3.
class SinusoidalModel {
public:
  SinusoidalModel(int d, int m, double offset, double amp, double omega,
                  double nu)
      : d_(d), m_(m), c0_(offset), c1_(amp), omega_(omega), nu_(nu),
        pat_(detail::identity_pattern(d, m)) {
    const double pf = pat_.norm();
    c_.K = std::abs(c1_) * (1.0 + std::abs(omega_)) * pf;
    c_.sigma_bounded = true;
    c_.sigma_sup = (std::abs(c0_) + std::abs(c1_)) * pf;
    c_.dsigma_sup = std::abs(c1_) * pf;
    c_.rho = (m >= d) ? std::max(0.0, c0_ - std::abs(c1_)) : 0.0;
  }

  int state_dim() const { return d_; }
  int driver_dim() const { return m_; }
  void drift(double, double, ConstVecRef, VecRef out) const { out.setZero(); }
  void diffusion(double t, double s, ConstVecRef x, MatRef out) const {
    out = (c0_ + c1_ * std::sin(x(0) + omega_ * t + nu_ * s)) * pat_;
  }
  void drift_jacobian(double, double, ConstVecRef, MatRef out) const {
    out.setZero();
  }
  void diffusion_jacobian(double t, double s, ConstVecRef x, MatRef out) const {
    out.setZero();
    out.block(0, 0, d_, m_) =
        c1_ * std::cos(x(0) + omega_ * t + nu_ * s) * pat_;
  }

  int drift_rank() const { return 0; }
  int diffusion_rank() const { return 3; }
  double drift_time_factor(int, double) const { return 1.0; }
  double diffusion_time_factor(int r, double t) const {
    if (r == 0) return 1.0;
    return (r == 1) ? std::cos(omega_ * t) : std::sin(omega_ * t);
  }
  void drift_space(int, double, ConstVecRef, VecRef out) const { out.setZero(); }
  void diffusion_space(int r, double s, ConstVecRef x, MatRef out) const {
    if (r == 0) {
      out = c0_ * pat_;
      return;
    }
    const double p = x(0) + nu_ * s;
    out = ((r == 1) ? c1_ * std::sin(p) : c1_ * std::cos(p)) * pat_;
  }
  void drift_space_jacobian(int, double, ConstVecRef, MatRef out) const {
    out.setZero();
  }
  void diffusion_space_jacobian(int r, double s, ConstVecRef x,
                                MatRef out) const {
    out.setZero();
    if (r == 0) return;
    const double p = x(0) + nu_ * s;
    out.block(0, 0, d_, m_) =
        ((r == 1) ? c1_ * std::cos(p) : -c1_ * std::sin(p)) * pat_;
  }

  const HypothesisConstants& constants() const { return c_; }

protected:
  int d_, m_;
  double c0_, c1_, omega_, nu_;
  Eigen::MatrixXd pat_;
  HypothesisConstants c_;
};

/// Sinusoidal diffusion plus the bounded drift b = kappa * tanh(x). Satisfies
/// the stronger drift bound |b| <= b0 with no |x| growth.
class SinusoidalTanhDriftModel : public SinusoidalModel {
public:
  SinusoidalTanhDriftModel(int d, int m, double offset, double amp,
                           double omega, double nu, double kappa)
      : SinusoidalModel(d, m, offset, amp, omega, nu), kappa_(kappa) {
    c_.b0_const = std::abs(kappa) * std::sqrt(static_cast<double>(d));
    c_.db_sup = std::abs(kappa) * std::sqrt(static_cast<double>(d));
  }

  void drift(double, double, ConstVecRef x, VecRef out) const {
    out = (kappa_ * x.array().tanh()).matrix();
  }
  void drift_jacobian(double, double, ConstVecRef x, MatRef out) const {
    out.setZero();
    for (int i = 0; i < d_; ++i) {
      const double th = std::tanh(x(i));
      out(i, i) = kappa_ * (1.0 - th * th);
    }
  }
  int drift_rank() const { return 1; }
  void drift_space(int, double, ConstVecRef x, VecRef out) const {
    out = (kappa_ * x.array().tanh()).matrix();
  }
  void drift_space_jacobian(int, double, ConstVecRef x, MatRef out) const {
    drift_jacobian(0.0, 0.0, x, out);
  }

private:
  double kappa_;
};

/// Unbounded diffusion sigma = scale * diag(x) (identity pattern), b == 0.
/// The exponential-growth reference family.
class LinearStateModel {
public:
  LinearStateModel(int d, int m, double scale)
      : d_(d), m_(m), scale_(scale) {
    c_.K = std::abs(scale);
    c_.sigma_bounded = false;
    c_.dsigma_sup = std::abs(scale) *
                    std::sqrt(static_cast<double>(std::min(d, m)));
  }

  int state_dim() const { return d_; }
  int driver_dim() const { return m_; }
  void drift(double, double, ConstVecRef, VecRef out) const { out.setZero(); }
  void diffusion(double, double, ConstVecRef x, MatRef out) const {
    out.setZero();
    for (int i = 0; i < std::min(d_, m_); ++i) out(i, i) = scale_ * x(i);
  }
  void drift_jacobian(double, double, ConstVecRef, MatRef out) const {
    out.setZero();
  }
  void diffusion_jacobian(double, double, ConstVecRef, MatRef out) const {
    out.setZero();
    for (int k = 0; k < std::min(d_, m_); ++k) out(k, k * m_ + k) = scale_;
  }

  int drift_rank() const { return 0; }
  int diffusion_rank() const { return 1; }
  double drift_time_factor(int, double) const { return 1.0; }
  double diffusion_time_factor(int, double) const { return 1.0; }
  void drift_space(int, double, ConstVecRef, VecRef out) const { out.setZero(); }
  void diffusion_space(int, double s, ConstVecRef x, MatRef out) const {
    diffusion(0.0, s, x, out);
  }
  void drift_space_jacobian(int, double, ConstVecRef, MatRef out) const {
    out.setZero();
  }
  void diffusion_space_jacobian(int, double s, ConstVecRef x, MatRef out) const {
    diffusion_jacobian(0.0, s, x, out);
  }

  const HypothesisConstants& constants() const { return c_; }

private:
  int d_, m_;
  double scale_;
  HypothesisConstants c_;
};

/// Constant diffusion with linear drift b = rate * x: the decoupled field
/// oracle Phi_t(s) = sigma * exp(rate (t-s)) lives here.
class LinearDriftModel {
public:
  LinearDriftModel(int d, int m, double amp, double rate)
      : d_(d), m_(m), rate_(rate),
        sigma_(amp * detail::identity_pattern(d, m)) {
    c_.sigma_bounded = true;
    c_.sigma_sup = sigma_.norm();
    c_.L0 = std::abs(rate);
    c_.drift_bounded = false;
    c_.db_sup = std::abs(rate) * std::sqrt(static_cast<double>(d));
    c_.rho = (m >= d) ? std::abs(amp) : 0.0;
  }

  int state_dim() const { return d_; }
  int driver_dim() const { return m_; }
  void drift(double, double, ConstVecRef x, VecRef out) const {
    out = rate_ * x;
  }
  void diffusion(double, double, ConstVecRef, MatRef out) const { out = sigma_; }
  void drift_jacobian(double, double, ConstVecRef, MatRef out) const {
    out = rate_ * Eigen::MatrixXd::Identity(d_, d_);
  }
  void diffusion_jacobian(double, double, ConstVecRef, MatRef out) const {
    out.setZero();
  }

  int drift_rank() const { return 1; }
  int diffusion_rank() const { return 1; }
  double drift_time_factor(int, double) const { return 1.0; }
  double diffusion_time_factor(int, double) const { return 1.0; }
  void drift_space(int, double, ConstVecRef x, VecRef out) const {
    out = rate_ * x;
  }
  void diffusion_space(int, double, ConstVecRef, MatRef out) const {
    out = sigma_;
  }
  void drift_space_jacobian(int, double, ConstVecRef x, MatRef out) const {
    drift_jacobian(0.0, 0.0, x, out);
  }
  void diffusion_space_jacobian(int, double, ConstVecRef, MatRef out) const {
    out.setZero();
  }

  const HypothesisConstants& constants() const { return c_; }

private:
  int d_, m_;
  double rate_;
  Eigen::MatrixXd sigma_;
  HypothesisConstants c_;
};

/// Constant diffusion with the genuinely two-time convolution drift
/// b(t,s,x) = (t-s) * kappa * tanh(x). Bounded on [0,T]^2; separable of rank
/// 2 through (t-s) = t*1 - 1*s.
class ConvolutionDriftModel {
public:
  ConvolutionDriftModel(int d, int m, double amp, double kappa, double horizon)
      : d_(d), m_(m), kappa_(kappa),
        sigma_(amp * detail::identity_pattern(d, m)) {
    const double rd = std::sqrt(static_cast<double>(d));
    c_.sigma_bounded = true;
    c_.sigma_sup = sigma_.norm();
    c_.L = std::abs(kappa) * rd;
    c_.b0_const = horizon * std::abs(kappa) * rd;
    c_.db_sup = horizon * std::abs(kappa) * rd;
    c_.rho = (m >= d) ? std::abs(amp) : 0.0;
  }

  int state_dim() const { return d_; }
  int driver_dim() const { return m_; }
  void drift(double t, double s, ConstVecRef x, VecRef out) const {
    out = ((t - s) * kappa_ * x.array().tanh()).matrix();
  }
  void diffusion(double, double, ConstVecRef, MatRef out) const { out = sigma_; }
  void drift_jacobian(double t, double s, ConstVecRef x, MatRef out) const {
    out.setZero();
    for (int i = 0; i < d_; ++i) {
      const double th = std::tanh(x(i));
      out(i, i) = (t - s) * kappa_ * (1.0 - th * th);
    }
  }
  void diffusion_jacobian(double, double, ConstVecRef, MatRef out) const {
    out.setZero();
  }

  int drift_rank() const { return 2; }
  int diffusion_rank() const { return 1; }
  double drift_time_factor(int r, double t) const { return (r == 0) ? t : 1.0; }
  double diffusion_time_factor(int, double) const { return 1.0; }
  void drift_space(int r, double s, ConstVecRef x, VecRef out) const {
    out = (((r == 0) ? kappa_ : -s * kappa_) * x.array().tanh()).matrix();
  }
  void diffusion_space(int, double, ConstVecRef, MatRef out) const {
    out = sigma_;
  }
  void drift_space_jacobian(int r, double s, ConstVecRef x, MatRef out) const {
    out.setZero();
    const double fac = (r == 0) ? kappa_ : -s * kappa_;
    for (int i = 0; i < d_; ++i) {
      const double th = std::tanh(x(i));
      out(i, i) = fac * (1.0 - th * th);
    }
  }
  void diffusion_space_jacobian(int, double, ConstVecRef, MatRef out) const {
    out.setZero();
  }

  const HypothesisConstants& constants() const { return c_; }

private:
  int d_, m_;
  double kappa_;
  Eigen::MatrixXd sigma_;
  HypothesisConstants c_;
};

/// Type-erased coefficient bundle: evaluators for b, sigma and their
/// Jacobians, optional linear-system parts (h, f, w), and the hypothesis
/// constants. Satisfies the same concepts as the concrete families, at
/// std::function call cost.
class CoefficientSet {
public:
  using VecFn = std::function<void(double, double, ConstVecRef, VecRef)>;
  using MatFn = std::function<void(double, double, ConstVecRef, MatRef)>;
  using PathFn = std::function<void(double, VecRef)>;

  CoefficientSet(int d, int m, VecFn drift, MatFn diffusion, MatFn drift_jac,
                 MatFn diffusion_jac, HypothesisConstants constants)
      : d_(d), m_(m), drift_(std::move(drift)), diffusion_(std::move(diffusion)),
        drift_jac_(std::move(drift_jac)),
        diffusion_jac_(std::move(diffusion_jac)), constants_(constants) {}

  template <differentiable_model M>
  static CoefficientSet from_model(const M& model,
                                   HypothesisConstants constants) {
    return CoefficientSet(
        model.state_dim(), model.driver_dim(),
        [model](double t, double s, ConstVecRef x, VecRef out) {
          model.drift(t, s, x, out);
        },
        [model](double t, double s, ConstVecRef x, MatRef out) {
          model.diffusion(t, s, x, out);
        },
        [model](double t, double s, ConstVecRef x, MatRef out) {
          model.drift_jacobian(t, s, x, out);
        },
        [model](double t, double s, ConstVecRef x, MatRef out) {
          model.diffusion_jacobian(t, s, x, out);
        },
        constants);
  }

  int state_dim() const { return d_; }
  int driver_dim() const { return m_; }
  void drift(double t, double s, ConstVecRef x, VecRef out) const {
    drift_(t, s, x, out);
  }
  void diffusion(double t, double s, ConstVecRef x, MatRef out) const {
    diffusion_(t, s, x, out);
  }
  void drift_jacobian(double t, double s, ConstVecRef x, MatRef out) const {
    drift_jac_(t, s, x, out);
  }
  void diffusion_jacobian(double t, double s, ConstVecRef x, MatRef out) const {
    diffusion_jac_(t, s, x, out);
  }

  const HypothesisConstants& constants() const { return constants_; }

  /// Installs the linear-system members. h and f default to the Jacobians of
  /// b and sigma (the sensitivity system); w to the given constant path.
  void set_linear_system(const Eigen::VectorXd& w0) {
    lin_h_ = drift_jac_;
    lin_f_ = diffusion_jac_;
    w_ = [w0](double, VecRef out) { out = w0; };
  }
  void set_linear_system(MatFn h, MatFn f, PathFn w) {
    lin_h_ = std::move(h);
    lin_f_ = std::move(f);
    w_ = std::move(w);
  }

  bool has_linear_system() const { return static_cast<bool>(w_); }

  /// |b0(t,s)| of the drift growth bound; defaults to the constant recorded
  /// in the hypothesis constants.
  void set_b0_norm(std::function<double(double, double)> fn) {
    b0_norm_ = std::move(fn);
  }
  double b0_norm(double t, double s) const {
    return b0_norm_ ? b0_norm_(t, s) : constants_.b0_const;
  }

  void h_eval(double t, double s, ConstVecRef x, MatRef out) const {
    if (!lin_h_) throw std::invalid_argument("CoefficientSet: h not provided");
    lin_h_(t, s, x, out);
  }
  void f_eval(double t, double s, ConstVecRef x, MatRef out) const {
    if (!lin_f_) throw std::invalid_argument("CoefficientSet: f not provided");
    lin_f_(t, s, x, out);
  }
  void w_eval(double t, VecRef out) const {
    if (!w_) throw std::invalid_argument("CoefficientSet: w not provided");
    w_(t, out);
  }

private:
  int d_, m_;
  VecFn drift_;
  MatFn diffusion_, drift_jac_, diffusion_jac_;
  MatFn lin_h_, lin_f_;
  PathFn w_;
  std::function<double(double, double)> b0_norm_;
  HypothesisConstants constants_;
};

using FamilyModel =
    std::variant<ConstantDiffusionModel, SinusoidalModel,
                 SinusoidalTanhDriftModel, LinearStateModel, LinearDriftModel,
                 ConvolutionDriftModel>;

struct Family {
  std::string id;
  FamilyModel model;

  const HypothesisConstants& constants() const {
    return std::visit([](const auto& m) -> const HypothesisConstants& {
      return m.constants();
    }, model);
  }
  int state_dim() const {
    return std::visit([](const auto& m) { return m.state_dim(); }, model);
  }
  int driver_dim() const {
    return std::visit([](const auto& m) { return m.driver_dim(); }, model);
  }
  CoefficientSet coefficient_set() const {
    return std::visit([&](const auto& m) {
      return CoefficientSet::from_model(m, m.constants());
    }, model);
  }
};

inline std::vector<std::string> built_in_family_ids() {
  return {"constant",     "sinusoidal", "sinusoidal_tanh",
          "linear_state", "linear_drift", "convolution"};
}

/// Builds a family from its id and parameter map (missing keys take the
/// defaults below). `horizon` is needed by the convolution family's bounds.
inline Family make_family(const std::string& id,
                          const std::map<std::string, double>& params, int d,
                          int m, double horizon) {
  auto get = [&](const char* key, double dflt) {
    auto it = params.find(key);
    return it == params.end() ? dflt : it->second;
  };
  if (id == "constant")
    return {id, ConstantDiffusionModel(d, m, get("amp", 1.0))};
  if (id == "sinusoidal")
    return {id, SinusoidalModel(d, m, get("offset", 2.0), get("amp", 1.0),
                                get("omega", 1.0), get("nu", 0.5))};
  if (id == "sinusoidal_tanh")
    return {id, SinusoidalTanhDriftModel(d, m, get("offset", 2.0),
                                         get("amp", 1.0), get("omega", 1.0),
                                         get("nu", 0.5), get("kappa", 0.5))};
  if (id == "linear_state")
    return {id, LinearStateModel(d, m, get("scale", 1.0))};
  if (id == "linear_drift")
    return {id, LinearDriftModel(d, m, get("amp", 1.0), get("rate", 1.0))};
  if (id == "convolution")
    return {id, ConvolutionDriftModel(d, m, get("amp", 1.0), get("kappa", 1.0),
                                      horizon)};
  throw std::invalid_argument("unknown coefficient family: " + id);
}

} // namespace svie
