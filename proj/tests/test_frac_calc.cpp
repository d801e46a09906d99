#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "oracles.hpp"
#include "svie/fbm.hpp"
#include "svie/frac_calc.hpp"

using namespace svie;
using Catch::Approx;

TEST_CASE("left fractional derivative closed forms") {
  const TimeGrid g = make_uniform_grid(1.0, 512);
  const SampledPath one = constant_path(g, Eigen::VectorXd::Constant(1, 1.0));
  // constant: difference term vanishes, c/(Gamma(1-a)(t-a)^a); Gamma(1/2)=sqrt(pi)
  REQUIRE(frac_deriv_left(one, 0.0, 0.5, 1.0)(0) ==
          Approx(1.0 / std::sqrt(M_PI)).epsilon(1e-12));

  // f(t)=t: t^{1-a}/Gamma(2-a); exact for the piecewise-linear interpolant
  const SampledPath lin = sample_scalar(g, [](double t) { return t; });
  REQUIRE(frac_deriv_left(lin, 0.0, 0.5, 1.0)(0) ==
          Approx(2.0 / std::sqrt(M_PI)).epsilon(1e-12));
  REQUIRE(frac_deriv_left(lin, 0.0, 0.3, 0.7)(0) ==
          Approx(std::pow(0.7, 0.7) / std::tgamma(1.7)).epsilon(1e-12));

  SampledPath zero(g, 1);
  REQUIRE(frac_deriv_left(zero, 0.0, 0.4, 0.5)(0) == 0.0);

  REQUIRE_THROWS_AS(frac_deriv_left(lin, 0.5, 0.4, 0.5), std::invalid_argument);
  REQUIRE_THROWS_AS(frac_deriv_left(lin, 0.5, 0.4, 0.3), std::invalid_argument);
  REQUIRE_THROWS_AS(frac_deriv_left(lin, 0.0, 0.0, 0.5), std::invalid_argument);
  REQUIRE_THROWS_AS(frac_deriv_left(lin, 0.0, 1.0, 0.5), std::invalid_argument);
}

TEST_CASE("left fractional derivative is homogeneous") {
  const TimeGrid g = make_uniform_grid(1.0, 256);
  const SampledPath p =
      sample_scalar(g, [](double t) { return std::sin(4.0 * t); });
  SampledPath q = p;
  q.values() *= -2.5;
  const double dp = frac_deriv_left(p, 0.0, 0.3, 0.8)(0);
  const double dq = frac_deriv_left(q, 0.0, 0.3, 0.8)(0);
  REQUIRE(dq == Approx(-2.5 * dp).epsilon(1e-13));
}

TEST_CASE("right fractional derivative closed forms") {
  const TimeGrid g = make_uniform_grid(1.0, 512);
  // constant path: g_{b-} == 0 identically
  SampledPath zero(g, 1);
  REQUIRE(frac_deriv_right(zero, 1.0, 0.5, 0.5)(0) == 0.0);

  // g(t) = b - t equals its own g_{b-}; magnitude (b-t)^{1-a}/Gamma(2-a)
  const SampledPath ramp = sample_scalar(g, [](double t) { return 1.0 - t; });
  const double expect = std::pow(0.5, 0.5) / std::tgamma(1.5);
  REQUIRE(frac_deriv_right(ramp, 1.0, 0.5, 0.5)(0) ==
          Approx(expect).epsilon(1e-12));

  // alpha -> 0 is the identity on smooth paths
  const SampledPath s = sample_scalar(g, [](double t) { return std::sin(t); });
  SampledPath sbm = s;
  for (int k = 0; k < g.node_count(); ++k) sbm.at(k) -= std::sin(1.0);
  const double target = std::sin(0.5) - std::sin(1.0);
  REQUIRE(frac_deriv_right(sbm, 1.0, 0.01, 0.5)(0) ==
          Approx(target).epsilon(0.05));

  REQUIRE_THROWS_AS(frac_deriv_right(s, 1.0, 0.5, 1.0), std::invalid_argument);
  REQUIRE_THROWS_AS(frac_deriv_right(s, 0.5, 0.5, 0.7), std::invalid_argument);
}

TEST_CASE("fractional derivative spec dispatches both sides") {
  const TimeGrid g = make_uniform_grid(1.0, 256);
  const SampledPath lin = sample_scalar(g, [](double t) { return t; });
  const FracDerivSpec left{FracSide::LeftAPlus, 0.5, 0.0, 1.0};
  REQUIRE(left.evaluate(lin, 1.0)(0) ==
          Approx(frac_deriv_left(lin, 0.0, 0.5, 1.0)(0)));
  const SampledPath ramp = sample_scalar(g, [](double t) { return 1.0 - t; });
  const FracDerivSpec right{FracSide::RightBMinus, 0.5, 0.0, 1.0};
  REQUIRE(right.evaluate(ramp, 0.5)(0) ==
          Approx(frac_deriv_right(ramp, 1.0, 0.5, 0.5)(0)));
  REQUIRE_THROWS_AS((FracDerivSpec{FracSide::LeftAPlus, 1.2, 0.0, 1.0}
                         .evaluate(lin, 0.5)),
                    std::invalid_argument);
  REQUIRE_THROWS_AS((FracDerivSpec{FracSide::LeftAPlus, 0.5, 1.0, 0.5}
                         .evaluate(lin, 0.7)),
                    std::invalid_argument);
}

TEST_CASE("left-point Riemann-Stieltjes sums") {
  const TimeGrid g = make_uniform_grid(1.0, 1000);
  const SampledPath c = constant_path(g, Eigen::VectorXd::Constant(1, 3.0));
  const SampledPath quad = sample_scalar(g, [](double t) { return t * t; });
  REQUIRE(rs_integral_sums(c, quad, 0.0, 1.0)(0) == Approx(3.0).epsilon(1e-12));

  SampledPath constg = constant_path(g, Eigen::VectorXd::Constant(1, 42.0));
  const SampledPath f = sample_scalar(g, [](double t) { return std::sin(t); });
  REQUIRE(rs_integral_sums(f, constg, 0.0, 1.0)(0) == 0.0);

  // left sum of int t dt = 1/2 - dt/2 exactly
  const SampledPath lin = sample_scalar(g, [](double t) { return t; });
  REQUIRE(rs_integral_sums(lin, lin, 0.0, 1.0)(0) ==
          Approx(0.4995).epsilon(1e-12));

  const TimeGrid g2 = make_uniform_grid(1.0, 512);
  SampledPath other(g2, 1);
  REQUIRE_THROWS_AS(rs_integral_sums(lin, other, 0.0, 1.0),
                    std::invalid_argument);
}

TEST_CASE("sums are bilinear and additive over intervals") {
  const TimeGrid g = make_uniform_grid(1.0, 200);
  const SampledPath f1 = sample_scalar(g, [](double t) { return std::sin(3 * t); });
  const SampledPath f2 = sample_scalar(g, [](double t) { return t * t - 1.0; });
  const SampledPath w = sample_scalar(g, [](double t) { return std::cos(2 * t); });
  SampledPath combo = f1;
  combo.values() = 2.0 * f1.values() - 0.5 * f2.values();
  const double lhs = rs_integral_sums(combo, w, 0.0, 1.0)(0);
  const double rhs = 2.0 * rs_integral_sums(f1, w, 0.0, 1.0)(0) -
                     0.5 * rs_integral_sums(f2, w, 0.0, 1.0)(0);
  REQUIRE(lhs == Approx(rhs).epsilon(1e-12));

  const double whole = rs_integral_sums(f1, w, 0.0, 1.0)(0);
  const double split = rs_integral_sums(f1, w, 0.0, 0.5)(0) +
                       rs_integral_sums(f1, w, 0.5, 1.0)(0);
  REQUIRE(whole == Approx(split).epsilon(1e-12));
}

TEST_CASE("fractional integration by parts reproduces closed forms") {
  const TimeGrid g = make_uniform_grid(1.0, 4096);
  const double alpha = 0.3;

  // int_0^1 d(t^2) = 1
  const SampledPath one = constant_path(g, Eigen::VectorXd::Constant(1, 1.0));
  const SampledPath quad = sample_scalar(g, [](double t) { return t * t; });
  REQUIRE(rs_integral_forpart(one, quad, 0.0, 1.0, alpha)(0) ==
          Approx(1.0).epsilon(1e-3));

  // int_0^1 g dg = (g(1)^2 - g(0)^2)/2 for g = sin
  const SampledPath s = sample_scalar(g, [](double t) { return std::sin(t); });
  const double target = 0.5 * std::sin(1.0) * std::sin(1.0);
  REQUIRE(rs_integral_forpart(s, s, 0.0, 1.0, alpha)(0) ==
          Approx(target).epsilon(1e-3));

  REQUIRE_THROWS_AS(rs_integral_forpart(one, quad, 0.0, 1.0, 0.6),
                    std::invalid_argument);
}

TEST_CASE("forpart matches sums with refinement and is alpha-independent") {
  double prev_gap = 1e300;
  for (int n : {512, 1024, 2048, 4096}) {
    const TimeGrid g = make_uniform_grid(1.0, n);
    const SampledPath f =
        sample_scalar(g, [](double t) { return std::cos(2.0 * t); });
    const SampledPath w =
        sample_scalar(g, [](double t) { return std::sin(t) + 0.5 * t; });
    const double fp = rs_integral_forpart(f, w, 0.0, 1.0, 0.3)(0);
    const double sm = rs_integral_sums(f, w, 0.0, 1.0)(0);
    const double gap = std::abs(fp - sm);
    REQUIRE(gap < prev_gap * 0.9);
    prev_gap = gap;
  }

  const TimeGrid g = make_uniform_grid(1.0, 2048);
  const SampledPath f =
      sample_scalar(g, [](double t) { return std::cos(2.0 * t); });
  const SampledPath w =
      sample_scalar(g, [](double t) { return std::sin(t) + 0.5 * t; });
  const double a1 = rs_integral_forpart(f, w, 0.0, 1.0, 0.25)(0);
  const double a2 = rs_integral_forpart(f, w, 0.0, 1.0, 0.35)(0);
  REQUIRE(a1 == Approx(a2).epsilon(1e-2));
}

TEST_CASE("forpart is additive over subintervals within tolerance") {
  const TimeGrid g = make_uniform_grid(1.0, 2048);
  const SampledPath f = sample_scalar(g, [](double t) { return std::sin(2 * t); });
  const SampledPath w = sample_scalar(g, [](double t) { return t * t; });
  const double whole = rs_integral_forpart(f, w, 0.0, 1.0, 0.3)(0);
  const double split = rs_integral_forpart(f, w, 0.0, 0.5, 0.3)(0) +
                       rs_integral_forpart(f, w, 0.5, 1.0, 0.3)(0);
  REQUIRE(std::abs(whole - split) < 2e-3);
}

TEST_CASE("forpart agrees with sums on an fBm driver") {
  const double H = 0.75;
  const TimeGrid g = make_uniform_grid(1.0, 4096);
  const SampledPath w = sample_fbm(g, H, 1, 20240817);
  SampledPath f(g, 1);
  for (int k = 0; k < g.node_count(); ++k) f.at(k) = std::cos(w.at(k));
  const double alpha = default_alpha(H);
  const double fp = rs_integral_forpart(f, w, 0.0, 1.0, alpha)(0);
  const double sm = rs_integral_sums(f, w, 0.0, 1.0)(0);
  REQUIRE(std::abs(sm) > 0.05); // seed chosen away from a zero crossing
  REQUIRE(fp == Approx(sm).epsilon(1e-2));
}
