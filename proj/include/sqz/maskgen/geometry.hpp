#pragma once

#include <cstdint>

namespace sqz::maskgen {

enum class Panel { left, right };

/// Pixel layout of the SLM. The panel is split into two half-panels of
/// width W/2, one per reflection.
struct PanelGeometry {
  int height_px = 1200;
  int width_px = 1920;
  int bit_depth = 10;
  double pixel_pitch = 8e-6;  ///< metres per pixel

  int half_width() const { return width_px / 2; }
  std::uint32_t levels() const { return 1u << bit_depth; }
  std::size_t pixel_count() const {
    return static_cast<std::size_t>(height_px) * static_cast<std::size_t>(width_px);
  }

  /// Throws ConfigError unless H >= 2, W even and >= 4, 1 <= k <= 16, pitch > 0.
  void validate() const;

  bool operator==(const PanelGeometry&) const = default;
};

struct NormalizedCoord {
  double xi;
  double eta;
  Panel panel;
};

/// Pixel coordinates relative to the geometric centre of the half-panel
/// (used by the lens term).
struct CenteredCoord {
  double xc;
  double yc;
};

/// i in 1..H, j in 1..W (1-based, matching the mask matrix convention).
NormalizedCoord normalized_coords(int i, int j, const PanelGeometry& g);
CenteredCoord centered_coords(int i, int j, const PanelGeometry& g);

inline Panel panel_of(int j, const PanelGeometry& g) {
  return j <= g.half_width() ? Panel::left : Panel::right;
}

}  // namespace sqz::maskgen
