#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sqz/maskgen/mask.hpp"
#include "sqz/optics/field.hpp"
#include "sqz/optics/propagate.hpp"

namespace sqz::optics {

/// Beam position on a half-panel, as an offset (in SLM pixels) from the
/// geometric centre of that half-panel.
struct Footprint {
  double offset_x_px = 0.0;
  double offset_y_px = 0.0;
};

enum class Sampling {
  exact_pitch,  ///< field pitch must equal the SLM pixel pitch
  nearest,      ///< nearest-pixel lookup for any field pitch
};

/// For each grid column/row, the 1-based SLM column/row the sample lands on.
/// Separable because the footprint is axis-aligned.
struct PanelLookup {
  maskgen::Panel panel;
  std::vector<int> cols;  ///< size grid.nx
  std::vector<int> rows;  ///< size grid.ny

  /// Distinct pixels touched, row-major over (rows x cols).
  std::vector<maskgen::PanelSampler::Pixel> pixels() const;
};

/// ContractError if any sample falls outside the half-panel, or if
/// `sampling` is exact_pitch and the pitches differ.
PanelLookup make_lookup(const maskgen::PanelGeometry& g, maskgen::Panel panel,
                        const Footprint& fp, const Grid& grid,
                        Sampling sampling = Sampling::exact_pitch);

/// exp(i 2 pi l / 2^k) for l = 0..2^k-1.
std::vector<cplx> phasor_table(int bit_depth);

/// Multiply each sample by the phasor of its gray level (levels row-major
/// over the grid).
void apply_levels(ComplexField& f, std::span<const std::uint16_t> levels,
                  std::span<const cplx> table);

/// Gray levels seen by each field sample.
std::vector<std::uint16_t> gather_levels(const maskgen::PhaseMask& mask, const PanelLookup& lk);

/// E'(x, y) = E(x, y) exp(i 2 pi M_ij / 2^k) over the footprint; lossless.
ComplexField apply_slm_panel(const ComplexField& field, const maskgen::PhaseMask& mask,
                             maskgen::Panel panel, const Footprint& fp,
                             Sampling sampling = Sampling::exact_pitch);

struct LoLayout {
  Footprint left;
  Footprint right;
  double inter_reflection_distance = 0.15;  ///< metres between the two reflections
  Sampling sampling = Sampling::exact_pitch;
};

/// Left-panel reflection, free-space hop, right-panel reflection.
ComplexField lo_path(const maskgen::PhaseMask& mask, const ComplexField& lo_in,
                     const LoLayout& layout);

}  // namespace sqz::optics
