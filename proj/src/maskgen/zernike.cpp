#include "sqz/maskgen/zernike.hpp"

#include <cmath>
#include <algorithm>
#include <cstdlib>

#include "sqz/common/error.hpp"

namespace sqz::maskgen {
namespace {

double factorial(int k) {
  double f = 1.0;
  for (int i = 2; i <= k; ++i) f *= i;
  return f;
}

std::vector<double> radial_coeffs(int n, int m) {
  const int am = std::abs(m);
  std::vector<double> c;
  for (int s = 0; s <= (n - am) / 2; ++s) {
    const double v = factorial(n - s) /
                     (factorial(s) * factorial((n + am) / 2 - s) * factorial((n - am) / 2 - s));
    c.push_back(s % 2 == 0 ? v : -v);
  }
  return c;
}

double radial_eval(const std::vector<double>& c, int n, double rho) {
  double sum = 0.0;
  for (std::size_t s = 0; s < c.size(); ++s) {
    double p = 1.0;
    for (int e = 0; e < n - 2 * static_cast<int>(s); ++e) p *= rho;
    sum += c[s] * p;
  }
  return sum;
}

// Single out-of-line entry for the angular factor so that the direct and
// tabulated paths cannot be compiled into different libm calls (sincos fusion).
[[gnu::noinline]] double harmonic(int m, double phi) {
  if (m > 0) return std::cos(m * phi);
  return std::sin(-m * phi);
}

}  // namespace

bool is_valid_zernike(int n, int m) {
  return n >= 0 && std::abs(m) <= n && (n - std::abs(m)) % 2 == 0;
}

double zernike_radial(int n, int m, double rho) {
  if (!is_valid_zernike(n, m))
    throw ConfigError("invalid Zernike index " + to_string({n, m}));
  return radial_eval(radial_coeffs(n, m), n, rho);
}

double zernike(int n, int m, double rho, double phi) {
  const double r = zernike_radial(n, m, rho);
  return m == 0 ? r : r * harmonic(m, phi);
}

std::vector<ZernikeIndex> zernike_upto(int n_max) {
  std::vector<ZernikeIndex> keys;
  for (int n = 1; n <= n_max; ++n)
    for (int m = -n; m <= n; m += 2) keys.push_back({n, m});
  return keys;
}

std::vector<ZernikeIndex> zernike_preset(std::string_view name) {
  if (name == "full") return zernike_upto(5);
  if (name == "noll15") {
    auto keys = zernike_upto(4);
    keys.push_back({5, 1});
    return keys;
  }
  throw ConfigError("unknown Zernike preset '" + std::string(name) + "' (expected full|noll15)");
}

ZernikeBasis::ZernikeBasis(std::span<const ZernikeIndex> keys) : keys_(keys.begin(), keys.end()) {
  for (const auto& k : keys_) {
    if (!is_valid_zernike(k.n, k.m)) throw ConfigError("invalid Zernike index " + to_string(k));
    radial_.push_back(radial_coeffs(k.n, k.m));
    max_m_ = std::max(max_m_, std::abs(k.m));
  }
  if (max_m_ > 32) throw ConfigError("Zernike azimuthal order above 32 is not supported");
}

void ZernikeBasis::eval(double xi, double eta, std::span<double> out) const {
  const double rho = std::sqrt(xi * xi + eta * eta);
  const double phi = std::atan2(eta, xi);
  // harmonics indexed by m + max_m_
  double h[65];
  bool have[65] = {};
  for (std::size_t t = 0; t < keys_.size(); ++t) {
    const auto [n, m] = keys_[t];
    const double r = radial_eval(radial_[t], n, rho);
    if (m == 0) {
      out[t] = r;
      continue;
    }
    const int slot = m + max_m_;
    if (!have[slot]) {
      h[slot] = harmonic(m, phi);
      have[slot] = true;
    }
    out[t] = r * h[slot];
  }
}

std::string to_string(const ZernikeIndex& k) {
  return "Z(" + std::to_string(k.n) + "," + std::to_string(k.m) + ")";
}

}  // namespace sqz::maskgen
