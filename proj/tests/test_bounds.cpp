#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "oracles.hpp"
#include "svie/bounds.hpp"
#include "svie/coefficients.hpp"
#include "svie/rng.hpp"

using namespace svie;
using Catch::Approx;

TEST_CASE("B_{0,alpha} estimator") {
  const TimeGrid g = make_uniform_grid(1.0, 4096);
  REQUIRE(b0_alpha([](double, double) { return 0.0; }, 0.25, 1.0, g) == 0.0);
  // constant c: (c^{1/a} t)^a = c t^a, sup at T; left sum exact for constants
  REQUIRE(b0_alpha([](double, double) { return 1.0; }, 0.25, 1.0, g) ==
          Approx(1.0).epsilon(1e-12));
  REQUIRE(b0_alpha([](double, double) { return 2.0; }, 0.3, 1.0, g) ==
          Approx(2.0).epsilon(1e-12));
  // b0(t,u) = u, alpha = 1/4: (int_0^1 u^4 du)^{1/4} = (1/5)^{1/4}
  REQUIRE(b0_alpha([](double, double u) { return u; }, 0.25, 1.0, g) ==
          Approx(std::pow(0.2, 0.25)).epsilon(1e-3));
  REQUIRE_THROWS_AS(
      b0_alpha([](double, double) { return std::nan(""); }, 0.25, 1.0, g),
      std::invalid_argument);
}

TEST_CASE("bound formulas evaluated literally") {
  // bounded-sigma polynomial bound with all drift constants zero
  {
    BoundParams p;
    p.T = 1.0;
    p.alpha = 0.3;
    p.C = 1.0;
    p.sigma_sup = 1.0;
    REQUIRE(eval_bound(BoundKind::BoundedSigmaPoly, p, 0.0, 0.0) == Approx(2.0));
  }
  // exponential bound, everything zero: (|x0|+1) e^{2T}
  {
    BoundParams p;
    p.T = 1.0;
    p.alpha = 0.3;
    p.C = 1.0;
    REQUIRE(eval_bound(BoundKind::GeneralExp, p, 0.0, 0.0) ==
            Approx(std::exp(2.0)).epsilon(1e-12));
  }
  // linear-system bound with zero K5 and no driver norm: 2(1+|w|) e^{T v 1}
  {
    BoundParams p;
    p.T = 1.0;
    p.alpha = 0.3;
    p.C = 1.0;
    p.sigma_sup = 0.0;
    p.h_sup = 0.0;
    p.f_sup = 0.0;
    p.w_sup = 1.0;
    REQUIRE(eval_bound(BoundKind::LinearSystem, p, 0.0, 0.0) ==
            Approx(4.0 * std::exp(1.0)).epsilon(1e-12));
  }
  // missing required norms
  {
    BoundParams p;
    REQUIRE_THROWS_AS(eval_bound(BoundKind::BoundedSigmaPoly, p, 0.0, 0.0),
                      std::invalid_argument);
    REQUIRE_THROWS_AS(eval_bound(BoundKind::LinearSystem, p, 0.0, 0.0),
                      std::invalid_argument);
  }
}

TEST_CASE("bound is monotone in the driver norm and the other inputs") {
  BoundParams p;
  p.T = 1.5;
  p.alpha = 0.3;
  p.C = 0.7;
  p.sigma_sup = 2.0;
  p.L = 0.5;
  p.L0 = 0.25;
  p.B0alpha = 0.1;
  for (BoundKind kind : {BoundKind::BoundedSigmaPoly, BoundKind::GeneralExp}) {
    double prev = 0.0;
    for (int i = 0; i < 10; ++i) {
      const double rhs = eval_bound(kind, p, 1.0, 0.5 * i);
      REQUIRE(rhs > prev);
      prev = rhs;
    }
  }
  const double base = eval_bound(BoundKind::BoundedSigmaPoly, p, 1.0, 2.0);
  for (auto bump : {&BoundParams::L, &BoundParams::L0, &BoundParams::B0alpha,
                    &BoundParams::C}) {
    BoundParams q = p;
    q.*bump += 0.5;
    REQUIRE(eval_bound(BoundKind::BoundedSigmaPoly, q, 1.0, 2.0) >= base);
  }
  BoundParams q = p;
  q.sigma_sup = 3.0;
  REQUIRE(eval_bound(BoundKind::BoundedSigmaPoly, q, 1.0, 2.0) >= base);
  REQUIRE(eval_bound(BoundKind::BoundedSigmaPoly, p, 2.0, 2.0) >= base);

  // no driver norm: finite and beta-independent
  BoundParams r = p;
  r.beta = 0.4;
  REQUIRE(eval_bound(BoundKind::BoundedSigmaPoly, p, 1.0, 0.0) ==
          eval_bound(BoundKind::BoundedSigmaPoly, r, 1.0, 0.0));
}

TEST_CASE("calibration of the generic constant") {
  BoundParams p;
  p.T = 1.0;
  p.alpha = 0.3;
  p.sigma_sup = 1.0;

  // everything already below the C=0 bound
  {
    std::vector<MeasuredPoint> ens = {{1.0, 2.0, 0.0}, {1.5, 1.0, 0.0}};
    REQUIRE(calibrate_constant(BoundKind::BoundedSigmaPoly, p, ens) == 0.0);
  }
  // bisection fixed point: a point sitting exactly on the C=1 bound
  {
    BoundParams probe = p;
    probe.C = 1.0;
    const double measured =
        eval_bound(BoundKind::BoundedSigmaPoly, probe, 0.5, 2.0);
    std::vector<MeasuredPoint> ens = {{measured, 2.0, 0.5}};
    const double c = calibrate_constant(BoundKind::BoundedSigmaPoly, p, ens);
    REQUIRE(c == Approx(1.0).epsilon(1e-5));
  }
  // zero driver norm: the constant cannot help; must fail
  {
    std::vector<MeasuredPoint> ens = {{100.0, 0.0, 0.0}};
    REQUIRE_THROWS_AS(calibrate_constant(BoundKind::BoundedSigmaPoly, p, ens),
                      calibration_error);
  }
  REQUIRE_THROWS_AS(calibrate_constant(BoundKind::BoundedSigmaPoly, p,
                                       std::vector<MeasuredPoint>{}),
                    std::invalid_argument);
}

TEST_CASE("coefficient sets expose a b0 evaluator for the bound estimator") {
  const TimeGrid g = make_uniform_grid(1.0, 2048);
  const Family fam = make_family("convolution", {{"kappa", 2.0}}, 1, 1, 1.0);
  auto cs = fam.coefficient_set();
  // default: the certified constant bound
  REQUIRE(cs.b0_norm(0.3, 0.1) == fam.constants().b0_const);
  REQUIRE(b0_alpha([&](double t, double s) { return cs.b0_norm(t, s); }, 0.3,
                   1.0, g) == Approx(fam.constants().b0_const).epsilon(1e-12));
  // user-supplied (t,s)-varying b0 feeds straight into b0_alpha
  cs.set_b0_norm([](double, double u) { return u; });
  REQUIRE(b0_alpha([&](double t, double s) { return cs.b0_norm(t, s); }, 0.25,
                   1.0, g) == Approx(std::pow(0.2, 0.25)).epsilon(1e-3));
}

TEST_CASE("bound report bundles rows and calibration") {
  BoundParams p;
  p.T = 1.0;
  p.alpha = 0.3;
  p.C = 1.0;
  p.sigma_sup = 1.0;
  const std::vector<MeasuredPoint> ens = {{1.5, 2.0, 0.0}, {3.0, 1.0, 0.0}};
  const BoundReport rep =
      make_bound_report(BoundKind::BoundedSigmaPoly, p, ens);
  REQUIRE(rep.rows.size() == 2);
  for (const auto& row : rep.rows) {
    REQUIRE(row.rhs > 0.0);
    REQUIRE(row.ratio == Approx(row.measured_sup / row.rhs));
    REQUIRE(row.ratio <= rep.max_ratio);
  }
  REQUIRE_FALSE(rep.calibration_failed);
  // calibrated constant dominates the whole ensemble
  BoundParams q = p;
  q.C = rep.calibrated_C;
  for (const auto& pt : ens)
    REQUIRE(pt.measured_sup <=
            eval_bound(BoundKind::BoundedSigmaPoly, q, pt.x0_norm, pt.g_norm) *
                (1.0 + 1e-9));
  // a point the constant cannot dominate flags failure instead of throwing
  const std::vector<MeasuredPoint> bad = {{5.0, 0.0, 0.0}};
  const BoundReport rep2 =
      make_bound_report(BoundKind::BoundedSigmaPoly, p, bad);
  REQUIRE(rep2.calibration_failed);
}

TEST_CASE("scaling experiment slopes") {
  const TimeGrid g = make_uniform_grid(1.0, 512);
  const SampledPath base =
      sample_scalar(g, [](double t) { return std::sin(3.0 * t); });

  // constant sigma, x0 = 0: |x| scales exactly linearly in lambda
  {
    const ConstantDiffusionModel model(1, 1, 1.5);
    const auto rep = scaling_experiment(model, Eigen::VectorXd::Zero(1), base,
                                        {1.0, 2.0, 4.0, 8.0}, g);
    REQUIRE(rep.poly_slope == Approx(1.0).epsilon(1e-9));
    REQUIRE_FALSE(rep.truncated);
  }
  // sigma = x: log|x| grows linearly in lambda, so the exponential model wins
  {
    const LinearStateModel model(1, 1, 1.0);
    const auto rep =
        scaling_experiment(model, Eigen::VectorXd::Constant(1, 0.5), base,
                           {1.0, 2.0, 4.0, 8.0}, g);
    REQUIRE(rep.prefers_exponential);
    REQUIRE(rep.ss_exp < rep.ss_poly);
  }
  // overflow truncates the ladder and flags it
  {
    const LinearStateModel model(1, 1, 1.0);
    const auto rep =
        scaling_experiment(model, Eigen::VectorXd::Constant(1, 1.0), base,
                           {1.0, 10.0, 2000.0, 4000.0}, g);
    REQUIRE(rep.truncated);
    REQUIRE(rep.lambdas.size() == 2);
  }
  const ConstantDiffusionModel model(1, 1, 1.0);
  REQUIRE_THROWS_AS(scaling_experiment(model, Eigen::VectorXd::Zero(1), base,
                                       {1.0, 2.0, 4.0}, g),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(scaling_experiment(model, Eigen::VectorXd::Zero(1), base,
                                       {1.0, 4.0, 2.0, 8.0}, g),
                    std::invalid_argument);
}

TEST_CASE("hypothesis constants of the built-in families hold on probes") {
  // |sigma| <= sigma_sup and |sigma(x)-sigma(y)| <= K|x-y| sampled over a
  // deterministic probe set
  for (const auto& id : built_in_family_ids()) {
    const Family fam = make_family(id, {}, 2, 2, 1.0);
    const auto& c = fam.constants();
    const auto cs = fam.coefficient_set();
    Eigen::MatrixXd s1(2, 2), s2(2, 2);
    Rng rng(99);
    for (int probe = 0; probe < 200; ++probe) {
      const double t = rng.next_uniform();
      const double s = rng.next_uniform() * t;
      Eigen::VectorXd x(2), y(2);
      for (int i = 0; i < 2; ++i) {
        x(i) = 3.0 * rng.next_normal();
        y(i) = 3.0 * rng.next_normal();
      }
      cs.diffusion(t, s, x, s1);
      cs.diffusion(t, s, y, s2);
      if (c.sigma_bounded) {
        REQUIRE(s1.norm() <= c.sigma_sup * (1.0 + 1e-12));
      }
      REQUIRE((s1 - s2).norm() <= c.K * (x - y).norm() * (1.0 + 1e-12));
    }
  }
}
