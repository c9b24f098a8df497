#pragma once

#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "sqz/maskgen/zernike.hpp"

namespace sqz::maskgen {

struct ZernikeTerm {
  ZernikeIndex index;
  double coeff = 0.0;
};

/// Parameters of one half-panel: Zernike wavefront terms plus the rotated,
/// decentred cylindrical-lens pair. Phase values are in gray levels.
struct PanelParams {
  std::vector<ZernikeTerm> zernike;
  double gamma1 = 0.0;      ///< gray levels / pixel^2
  double gamma2 = 0.0;
  double theta_lens = 0.0;  ///< radians, [0, pi/2]
  double mu_x = 0.0;        ///< pixels
  double mu_y = 0.0;
};

struct Bound {
  double lo;
  double hi;
};

/// The searchable parameter space: coefficient key set plus box bounds.
/// Flat order is: left Zernike keys ascending by (n, m), left lens 5-tuple
/// (gamma1, gamma2, theta_lens, mu_x, mu_y), then the same for the right.
struct ParamSpace {
  std::vector<ZernikeIndex> keys = zernike_upto(5);
  double zernike_bound = 512.0;
  double gamma_bound = 2e-3;
  double mu_bound = 300.0;

  std::size_t panel_size() const { return keys.size() + 5; }
  std::size_t dimension() const { return 2 * panel_size(); }
  std::vector<Bound> bounds() const;
  std::vector<std::string> names() const;
};

struct MaskParams {
  PanelParams left;
  PanelParams right;

  static MaskParams zeros(const ParamSpace& space);
  static MaskParams unflatten(const ParamSpace& space, std::span<const double> flat);
  std::vector<double> flatten() const;

  /// ContractError if the key set differs from `space`, any value is not
  /// finite, or any value lies outside its bound.
  void check(const ParamSpace& space) const;
};

nlohmann::json params_to_json(const MaskParams& p);
/// Accepts a flat array of exactly space.dimension() numbers.
MaskParams params_from_json(const ParamSpace& space, const nlohmann::json& j);

}  // namespace sqz::maskgen
