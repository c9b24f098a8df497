#pragma once

// Test-only quadrature oracles, independent of the library code paths.

#include <cmath>
#include <numbers>
#include <utility>
#include <vector>

namespace sqz::testing {

/// Gauss-Legendre nodes/weights on [a, b] (Newton iteration on P_n).
inline std::vector<std::pair<double, double>> gauss_legendre(int n, double a, double b) {
  std::vector<std::pair<double, double>> out(n);
  for (int i = 0; i < n; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    out[i] = {0.5 * (b - a) * x + 0.5 * (b + a), 0.5 * (b - a) * w};
  }
  return out;
}

/// Integral of f(rho, phi) over the unit disk using an n_rho x n_phi polar
/// product rule (Gauss-Legendre in rho, trapezoid in phi).
template <class F>
double disk_integral(F&& f, int n_rho, int n_phi) {
  const auto gl = gauss_legendre(n_rho, 0.0, 1.0);
  const double dphi = 2.0 * std::numbers::pi / n_phi;
  double sum = 0.0;
  for (const auto& [rho, w] : gl) {
    double ring = 0.0;
    for (int k = 0; k < n_phi; ++k) ring += f(rho, k * dphi);
    sum += w * rho * ring * dphi;
  }
  return sum;
}

}  // namespace sqz::testing
