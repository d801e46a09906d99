#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Eigenvalues>
#include <cmath>

#include "oracles.hpp"
#include "svie/fbm.hpp"

using namespace svie;
using Catch::Approx;

TEST_CASE("fBm covariance closed form") {
  REQUIRE(covariance_rh(0.7, 0.7, 0.75) == Approx(std::pow(0.7, 1.5)));
  // (1,2,0.75): (1 + 2^{1.5} - 1)/2 = sqrt(2)
  REQUIRE(covariance_rh(1.0, 2.0, 0.75) == Approx(std::sqrt(2.0)).epsilon(1e-12));
  REQUIRE(covariance_rh(0.0, 3.0, 0.8) == 0.0);
  REQUIRE(covariance_rh(0.3, 0.9, 0.6) == covariance_rh(0.9, 0.3, 0.6));
  REQUIRE_THROWS_AS(covariance_rh(1.0, 1.0, 0.5), std::invalid_argument);
  REQUIRE_THROWS_AS(covariance_rh(1.0, 1.0, 1.0), std::invalid_argument);
  REQUIRE_THROWS_AS(covariance_rh(-1.0, 1.0, 0.75), std::invalid_argument);
}

TEST_CASE("covariance matrices are positive semidefinite before jitter") {
  for (double H : {0.6, 0.75, 0.9}) {
    const TimeGrid g = make_uniform_grid(1.0, 64);
    Eigen::MatrixXd cov(64, 64);
    for (int i = 0; i < 64; ++i)
      for (int j = 0; j < 64; ++j)
        cov(i, j) = covariance_rh(g.node(i + 1), g.node(j + 1), H);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    REQUIRE(es.eigenvalues().minCoeff() >= -1e-10);
  }
}

TEST_CASE("Volterra kernel values") {
  REQUIRE(kernel_kh(0.5, 0.5, 0.75) == 0.0);
  REQUIRE(kernel_kh(0.3, 0.5, 0.75) == 0.0);
  REQUIRE_THROWS_AS(kernel_kh(1.0, 0.0, 0.75), std::invalid_argument);

  // oracle: adaptive quadrature of the substituted integrand
  //   K = c_H s^{1/2-H} (1/th) int_0^{(t-s)^th} (s+v^{1/th})^th dv, th = H-1/2
  const double H = 0.75, t = 1.0, s = 0.5, th = H - 0.5;
  const double ch =
      std::sqrt(H * (2.0 * H - 1.0) / std::beta(2.0 - 2.0 * H, H - 0.5));
  const double integ = oracles::adaptive_quad(
      [&](double v) { return std::pow(s + std::pow(v, 1.0 / th), th); }, 0.0,
      std::pow(t - s, th), 1e-12);
  const double oracle = ch * std::pow(s, -th) * integ / th;
  REQUIRE(oracle == Approx(0.9375919636980572).epsilon(1e-8)); // frozen
  REQUIRE(kernel_kh(t, s, H) == Approx(oracle).epsilon(1e-8));
}

TEST_CASE("kernel reproduces the covariance") {
  // R_H(t,s) = int_0^{t^s} K(t,r) K(s,r) dr ; substitution r = x^{1/(1-H)}
  // tames the r^{1-2H} endpoint singularity of the product
  const double H = 0.75;
  auto identity_check = [&](double t, double s) {
    const double p = 1.0 / (1.0 - H);
    const double upper = std::pow(std::min(t, s), 1.0 / p);
    const double quad = oracles::adaptive_quad(
        [&](double x) {
          const double r = std::pow(x, p);
          return kernel_kh(t, r, H) * kernel_kh(s, r, H) * p *
                 std::pow(x, p - 1.0);
        },
        1e-12, upper, 1e-9);
    const double exact = covariance_rh(t, s, H);
    REQUIRE(quad == Approx(exact).epsilon(1e-3));
  };
  identity_check(1.0, 1.0);
  identity_check(1.0, 0.4);
  identity_check(0.6, 0.4);
}

TEST_CASE("kernel time derivative") {
  const double H = 0.75;
  const double ch =
      std::sqrt(H * (2.0 * H - 1.0) / std::beta(2.0 - 2.0 * H, H - 0.5));
  REQUIRE(kernel_kh_dt(2.0, 1.0, H) ==
          Approx(ch * std::pow(2.0, 0.25)).epsilon(1e-12));
  REQUIRE(kernel_kh_dt(2.0, 1.0, H) ==
          Approx(0.31800725262613293).epsilon(1e-12)); // frozen oracle value
  REQUIRE_THROWS_AS(kernel_kh_dt(0.5, 0.5, H), std::invalid_argument);
  REQUIRE_THROWS_AS(kernel_kh_dt(0.4, 0.5, H), std::invalid_argument);
  REQUIRE_THROWS_AS(kernel_kh_dt(1.0, 0.0, H), std::invalid_argument);

  // fundamental theorem of calculus, away from the singular corner
  const double diff = kernel_kh(1.0, 0.5, H) - kernel_kh(0.8, 0.5, H);
  const double quad = oracles::adaptive_quad(
      [&](double u) { return kernel_kh_dt(u, 0.5, H); }, 0.8, 1.0, 1e-11);
  REQUIRE(quad == Approx(diff).epsilon(1e-6));

  // full interval with the same substitution as the kernel definition
  const double th = H - 0.5;
  const double quad_full =
      oracles::adaptive_quad(
          [&](double v) { return std::pow(0.5 + std::pow(v, 1.0 / th), th); },
          0.0, std::pow(0.5, th), 1e-12) *
      ch * std::pow(0.5, -th) / th;
  REQUIRE(quad_full == Approx(kernel_kh(1.0, 0.5, H)).epsilon(1e-4));

  // divergence at the diagonal: (t-s)^{H-3/2} asymptotics
  const double near = kernel_kh_dt(1.0 + 1e-8, 1.0, H);
  const double far = kernel_kh_dt(1.0 + 1e-6, 1.0, H);
  REQUIRE(near > 1e5);
  REQUIRE(near / far == Approx(std::pow(1e-2, H - 1.5)).epsilon(0.02));
}

TEST_CASE("cholesky factor reproduces the covariance") {
  const TimeGrid g = make_uniform_grid(1.0, 48);
  for (double H : {0.6, 0.9}) {
    const GaussianSampler sampler(g, H);
    const Eigen::MatrixXd& L = sampler.cholesky_factor();
    Eigen::MatrixXd cov(48, 48);
    for (int i = 0; i < 48; ++i)
      for (int j = 0; j < 48; ++j)
        cov(i, j) = covariance_rh(g.node(i + 1), g.node(j + 1), H);
    const double gap = (L * L.transpose() - cov).cwiseAbs().maxCoeff();
    REQUIRE(gap <= 1e-10);
  }
}

TEST_CASE("fBm sampling determinism and start value") {
  const TimeGrid g = make_uniform_grid(1.0, 32);
  const GaussianSampler sampler(g, 0.7);
  const SampledPath a = sampler.sample(2, 1234);
  const SampledPath b = sampler.sample(2, 1234);
  const SampledPath c = sampler.sample(2, 999);
  REQUIRE(a.at(0, 0) == 0.0);
  REQUIRE(a.at(0, 1) == 0.0);
  REQUIRE(a.values() == b.values()); // bit-identical
  REQUIRE(a.values() != c.values());
  REQUIRE_THROWS_AS(GaussianSampler(g, 0.5), std::invalid_argument);
  REQUIRE_THROWS_AS(GaussianSampler(g, 1.0), std::invalid_argument);
}

TEST_CASE("fBm terminal variance matches R_H(1,1)") {
  const TimeGrid g = make_uniform_grid(1.0, 16);
  const GaussianSampler sampler(g, 0.75);
  const int N = 10000;
  double acc = 0.0;
  for (int i = 0; i < N; ++i) {
    const SampledPath w = sampler.sample(1, derive_stream(77, i));
    acc += w.at(16) * w.at(16);
  }
  const double var = acc / N;
  REQUIRE(var == Approx(1.0).margin(4.0 * std::sqrt(2.0 / N)));
}

TEST_CASE("fBm increments are stationary in second moment") {
  const TimeGrid g = make_uniform_grid(1.0, 32);
  const double H = 0.8;
  const GaussianSampler sampler(g, H);
  const int N = 4000;
  // increments over [1/4, 3/4] and [1/2, 1]: same length 1/2
  double a1 = 0.0, a2 = 0.0;
  for (int i = 0; i < N; ++i) {
    const SampledPath w = sampler.sample(1, derive_stream(5150, i));
    const double d1 = w.at(24) - w.at(8);
    const double d2 = w.at(32) - w.at(16);
    a1 += d1 * d1;
    a2 += d2 * d2;
  }
  const double expect = std::pow(0.5, 2.0 * H);
  const double tol = 4.0 * std::sqrt(2.0 / N) * expect;
  REQUIRE(a1 / N == Approx(expect).margin(tol));
  REQUIRE(a2 / N == Approx(expect).margin(tol));
}

TEST_CASE("H inner product of indicators reproduces the covariance") {
  const double H = 0.75;
  {
    const TimeGrid g = make_uniform_grid(1.0, 4096);
    SampledPath zero(g, 1);
    REQUIRE(h_inner_product(zero, zero, H) == 0.0);
    const SampledPath one = constant_path(g, Eigen::VectorXd::Constant(1, 1.0));
    REQUIRE(h_inner_product(one, one, H) == Approx(1.0).epsilon(1e-3));
  }
  {
    const TimeGrid g = make_uniform_grid(2.0, 4096);
    const SampledPath phi =
        sample_scalar(g, [](double t) { return t <= 1.0 ? 1.0 : 0.0; });
    const SampledPath psi = constant_path(g, Eigen::VectorXd::Constant(1, 1.0));
    REQUIRE(h_inner_product(phi, psi, H) ==
            Approx(std::sqrt(2.0)).epsilon(1e-3));
    const TimeGrid other = make_uniform_grid(1.0, 4096);
    SampledPath wrong(other, 1);
    REQUIRE_THROWS_AS(h_inner_product(phi, wrong, H), std::invalid_argument);
  }
}

TEST_CASE("H inner product is positive semidefinite on sampled paths") {
  const TimeGrid g = make_uniform_grid(1.0, 128);
  Rng rng(4242);
  for (int rep = 0; rep < 20; ++rep) {
    SampledPath p(g, 2);
    for (int k = 0; k < g.node_count(); ++k)
      for (int c = 0; c < 2; ++c) p.at(k, c) = rng.next_normal();
    REQUIRE(h_inner_product(p, p, 0.7) >= 0.0);
  }
}

TEST_CASE("discretized K* maps indicators to the kernel") {
  const double H = 0.75;
  const TimeGrid g = make_uniform_grid(1.0, 1024);
  const SampledPath ind =
      sample_scalar(g, [](double t) { return t < 0.5 ? 1.0 : 0.0; });
  const SampledPath mapped = kstar_apply(ind, H);
  for (double s : {0.05, 0.1, 0.2, 0.3, 0.4}) {
    const int k = g.nearest_node(s);
    const double exact = kernel_kh(0.5, g.node(k), H);
    REQUIRE(mapped.at(k) == Approx(exact).epsilon(1e-2));
  }
}

TEST_CASE("admissibility of regularity parameters") {
  REQUIRE(FracParams{0.75, 0.3, 1.0, 1.0, 1.0}.admissible());
  {
    const auto v = FracParams{0.75, 0.2, 1.0, 1.0, 1.0}.violations();
    REQUIRE(v.size() == 1);
    REQUIRE(v[0].find("1-H") != std::string::npos);
  }
  REQUIRE_FALSE(FracParams{0.75, 0.55, 1.0, 1.0, 1.0}.admissible());
  REQUIRE_FALSE(FracParams{0.75, 0.3, 0.2, 1.0, 1.0}.admissible()); // beta
  REQUIRE_FALSE(FracParams{0.75, 0.3, 1.0, 0.3, 1.0}.admissible()); // delta
  REQUIRE_FALSE(FracParams{0.75, 0.3, 1.0, 1.0, 0.5}.admissible()); // mu
  REQUIRE_FALSE(FracParams{0.4, 0.3, 1.0, 1.0, 1.0}.admissible());  // H

  for (double H : {0.55, 0.6, 0.75, 0.9, 0.99}) {
    const double a = default_alpha(H);
    REQUIRE(a > 1.0 - H);
    REQUIRE(a < 0.5);
  }
}
