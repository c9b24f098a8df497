#include "sqz/optics/slm.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "sqz/common/error.hpp"
#include "sqz/simd/kernels.hpp"

namespace sqz::optics {

using maskgen::Panel;

std::vector<maskgen::PanelSampler::Pixel> PanelLookup::pixels() const {
  std::vector<maskgen::PanelSampler::Pixel> px;
  px.reserve(rows.size() * cols.size());
  for (int r : rows)
    for (int c : cols) px.push_back({r, c});
  return px;
}

PanelLookup make_lookup(const maskgen::PanelGeometry& g, Panel panel, const Footprint& fp,
                        const Grid& grid, Sampling sampling) {
  if (sampling == Sampling::exact_pitch)
    require(std::abs(grid.pitch - g.pixel_pitch) <= 1e-12 * g.pixel_pitch,
            "apply_slm_panel: field pitch differs from SLM pixel pitch; resample explicitly");
  const int wh = g.half_width();
  const double cx = (wh + 1) / 2.0 + fp.offset_x_px;
  const double cy = (g.height_px + 1) / 2.0 + fp.offset_y_px;
  const double ratio = grid.pitch / g.pixel_pitch;
  const int col0 = panel == Panel::left ? 0 : wh;
  // The small bias resolves exact half-pixel ties consistently upward.
  auto nearest = [](double c) { return static_cast<int>(std::floor(c + 0.5 + 1e-9)); };

  PanelLookup lk{panel, std::vector<int>(grid.nx), std::vector<int>(grid.ny)};
  for (int a = 0; a < grid.nx; ++a) {
    const int local = nearest(cx + (a - grid.nx / 2) * ratio);
    require(local >= 1 && local <= wh,
            "footprint leaves the half-panel horizontally (column " + std::to_string(local) + ")");
    lk.cols[a] = col0 + local;
  }
  for (int b = 0; b < grid.ny; ++b) {
    const int row = nearest(cy + (b - grid.ny / 2) * ratio);
    require(row >= 1 && row <= g.height_px,
            "footprint leaves the panel vertically (row " + std::to_string(row) + ")");
    lk.rows[b] = row;
  }
  return lk;
}

std::vector<cplx> phasor_table(int bit_depth) {
  const std::size_t n = std::size_t{1} << bit_depth;
  std::vector<cplx> t(n);
  for (std::size_t l = 0; l < n; ++l)
    t[l] = std::polar(1.0, 2.0 * std::numbers::pi * static_cast<double>(l) / static_cast<double>(n));
  return t;
}

void apply_levels(ComplexField& f, std::span<const std::uint16_t> levels,
                  std::span<const cplx> table) {
  require(levels.size() == f.samples.size(), "apply_levels: size mismatch");
  simd::active().apply_phasor(f.samples.data(), levels.data(), table.data(), levels.size());
}

std::vector<std::uint16_t> gather_levels(const maskgen::PhaseMask& mask, const PanelLookup& lk) {
  std::vector<std::uint16_t> levels;
  levels.reserve(lk.rows.size() * lk.cols.size());
  for (int r : lk.rows)
    for (int c : lk.cols) levels.push_back(mask.at(r, c));
  return levels;
}

ComplexField apply_slm_panel(const ComplexField& field, const maskgen::PhaseMask& mask,
                             Panel panel, const Footprint& fp, Sampling sampling) {
  const auto lk = make_lookup(mask.geometry, panel, fp, field.grid, sampling);
  ComplexField out = field;
  apply_levels(out, gather_levels(mask, lk), phasor_table(mask.geometry.bit_depth));
  return out;
}

ComplexField lo_path(const maskgen::PhaseMask& mask, const ComplexField& lo_in,
                     const LoLayout& layout) {
  require(layout.inter_reflection_distance >= 0.0, "lo_path: negative distance");
  ComplexField f = apply_slm_panel(lo_in, mask, Panel::left, layout.left, layout.sampling);
  if (layout.inter_reflection_distance > 0.0)
    Propagator(f.grid, f.wavelength, layout.inter_reflection_distance).apply_in_place(f);
  return apply_slm_panel(f, mask, Panel::right, layout.right, layout.sampling);
}

}  // namespace sqz::optics
