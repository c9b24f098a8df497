#pragma once

#include <vector>

#include "sqz/optics/field.hpp"

namespace sqz::optics {

struct ModeComponent;

/// Spatial mode description at its waist plane.
struct ModeSpec {
  enum class Kind { gaussian, hermite_gaussian, superposition };

  Kind kind = Kind::gaussian;
  int m = 0;  ///< HG order along x
  int n = 0;  ///< HG order along y
  double waist = 1.2e-3;
  double center_x = 0.0;
  double center_y = 0.0;
  double tilt_kx = 0.0;  ///< transverse wavevector, rad/m
  double tilt_ky = 0.0;
  std::vector<ModeComponent> components;  ///< superposition only

  static ModeSpec gaussian(double waist = 1.2e-3);
  static ModeSpec hermite_gaussian(int m, int n, double waist = 1.2e-3);
};

struct ModeComponent {
  ModeSpec mode;
  cplx weight;
};

/// Unit-power field for `spec`. Superposition weights are renormalized to
/// sum |c|^2 = 1 and the result is renormalized to unit power.
/// ConfigError if the grid spans fewer than 3 waist radii per side or the
/// waist is not positive.
ComplexField synthesize_mode(const ModeSpec& spec, const Grid& grid,
                             double wavelength = kDefaultWavelength);

/// Physicists' Hermite polynomial H_k(x).
double hermite(int k, double x);

}  // namespace sqz::optics
