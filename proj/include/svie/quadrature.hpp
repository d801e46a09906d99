#pragma once

#include <array>
#include <cmath>

namespace svie {

/// Gauss-Legendre rule on [-1,1]. Nodes/weights are computed once by Newton
/// iteration on the Legendre recurrence and cached.
template <int N>
struct GaussLegendre {
  std::array<double, N> nodes{};
  std::array<double, N> weights{};

  GaussLegendre() {
    constexpr double pi = 3.14159265358979323846;
    for (int i = 0; i < N; ++i) {
      double x = std::cos(pi * (i + 0.75) / (N + 0.5));
      double dp = 0.0;
      for (int it = 0; it < 100; ++it) {
        double p0 = 1.0, p1 = x;
        for (int k = 2; k <= N; ++k) {
          const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
          p0 = p1;
          p1 = p2;
        }
        dp = N * (x * p1 - p0) / (x * x - 1.0);
        const double dx = p1 / dp;
        x -= dx;
        if (std::abs(dx) < 1e-15) break;
      }
      nodes[i] = x;
      weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
  }

  static const GaussLegendre& instance() {
    static const GaussLegendre rule;
    return rule;
  }

  /// Integrates f over [a,b].
  template <typename F>
  double integrate(F&& f, double a, double b) const {
    const double mid = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    double acc = 0.0;
    for (int i = 0; i < N; ++i) acc += weights[i] * f(mid + half * nodes[i]);
    return half * acc;
  }
};

template <typename F>
double gauss_legendre_64(F&& f, double a, double b) {
  return GaussLegendre<64>::instance().integrate(f, a, b);
}

template <typename F>
double gauss_legendre_128(F&& f, double a, double b) {
  return GaussLegendre<128>::instance().integrate(f, a, b);
}

} // namespace svie
