#include "sqz/maskgen/geometry.hpp"

#include <string>

#include "sqz/common/error.hpp"

namespace sqz::maskgen {

void PanelGeometry::validate() const {
  if (height_px < 2) throw ConfigError("geometry: height_px must be >= 2");
  if (width_px < 4 || width_px % 2 != 0)
    throw ConfigError("geometry: width_px must be even and >= 4");
  if (bit_depth < 1 || bit_depth > 16) throw ConfigError("geometry: bit_depth must be in 1..16");
  if (!(pixel_pitch > 0.0)) throw ConfigError("geometry: pixel_pitch must be positive");
}

NormalizedCoord normalized_coords(int i, int j, const PanelGeometry& g) {
  require(i >= 1 && i <= g.height_px, "normalized_coords: row " + std::to_string(i) + " out of range");
  require(j >= 1 && j <= g.width_px, "normalized_coords: column " + std::to_string(j) + " out of range");
  const int wh = g.half_width();
  const double eta = 2.0 * (i - 1) / (g.height_px - 1) - 1.0;
  if (j <= wh) return {2.0 * (j - 1) / (wh - 1) - 1.0, eta, Panel::left};
  return {2.0 * (j - wh - 1) / (wh - 1) - 1.0, eta, Panel::right};
}

CenteredCoord centered_coords(int i, int j, const PanelGeometry& g) {
  require(i >= 1 && i <= g.height_px && j >= 1 && j <= g.width_px,
          "centered_coords: index out of range");
  const int wh = g.half_width();
  const double yc = i - (g.height_px + 1) / 2.0;
  const int jl = j <= wh ? j : j - wh;
  return {jl - (wh + 1) / 2.0, yc};
}

}  // namespace sqz::maskgen
