#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sqz::maskgen {

struct ZernikeIndex {
  int n;
  int m;
  auto operator<=>(const ZernikeIndex&) const = default;
};

bool is_valid_zernike(int n, int m);

/// Radial polynomial R_n^|m|(rho), classical unnormalized form. Defined for
/// any rho >= 0 (including outside the unit disk).
double zernike_radial(int n, int m, double rho);

/// Z_n^m(rho, phi) = R_n^|m|(rho) cos(m phi) for m >= 0, R_n^|m|(rho) sin(|m| phi) for m < 0.
/// Throws ConfigError for an invalid (n, m) pair.
double zernike(int n, int m, double rho, double phi);

/// Coefficient key sets. "full" is every valid (n, m) with 1 <= n <= 5
/// (20 terms per half-panel). "noll15" is Noll modes j = 2..16 (15 terms, all
/// of n <= 4 plus Z_5^1), giving 40 optimized parameters with the lens terms.
std::vector<ZernikeIndex> zernike_preset(std::string_view name);

/// All valid keys with 1 <= n <= n_max, ascending by (n, m).
std::vector<ZernikeIndex> zernike_upto(int n_max);

std::string to_string(const ZernikeIndex& k);

/// Tabulated evaluator for a fixed key set. Values are bit-identical to
/// zernike() for the same inputs; the radial coefficients and the angular
/// harmonics are computed once per call instead of once per term.
class ZernikeBasis {
 public:
  explicit ZernikeBasis(std::span<const ZernikeIndex> keys);

  std::size_t size() const { return keys_.size(); }

  /// out[t] = Z_t at normalized Cartesian (xi, eta).
  void eval(double xi, double eta, std::span<double> out) const;

 private:
  std::vector<ZernikeIndex> keys_;
  std::vector<std::vector<double>> radial_;  // signed coefficients of rho^(n-2s)
  int max_m_ = 0;
};

}  // namespace sqz::maskgen
