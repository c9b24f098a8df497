#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sqz/maskgen/geometry.hpp"
#include "sqz/maskgen/params.hpp"
#include "sqz/simd/kernels.hpp"

namespace sqz::maskgen {

/// H x W matrix of k-bit gray levels, row-major.
struct PhaseMask {
  PanelGeometry geometry;
  std::vector<std::uint16_t> values;

  explicit PhaseMask(const PanelGeometry& g) : geometry(g), values(g.pixel_count(), 0) {}

  /// 1-based element access.
  std::uint16_t at(int i, int j) const {
    return values[static_cast<std::size_t>(i - 1) * geometry.width_px + (j - 1)];
  }
  std::uint16_t& at(int i, int j) {
    return values[static_cast<std::size_t>(i - 1) * geometry.width_px + (j - 1)];
  }

  bool operator==(const PhaseMask&) const = default;
};

/// Real-valued (pre-quantization) starting-mask accumulator in gray levels.
struct StartingMask {
  PanelGeometry geometry;
  std::vector<double> values;

  explicit StartingMask(const PanelGeometry& g) : geometry(g), values(g.pixel_count(), 0.0) {}

  double at(int i, int j) const {
    return values[static_cast<std::size_t>(i - 1) * geometry.width_px + (j - 1)];
  }
};

/// Phase of one half-panel at a point: Zernike expansion in (rho, phi) from
/// (xi, eta) plus gamma1 u^2 + gamma2 v^2 from the rotated, decentred
/// (xc, yc). Evaluated with the same operation order as compose_mask.
double phase_function(double xi, double eta, double xc, double yc, const PanelParams& p);

/// Phase evaluator bound to a fixed set of pixels of one half-panel. The
/// Zernike basis is tabulated once, so repeated evaluation for different
/// parameters costs one axpy per term. Results are bit-identical to
/// phase_function at the same pixels.
class PanelSampler {
 public:
  struct Pixel {
    int i;
    int j;
  };

  PanelSampler(const PanelGeometry& g, Panel panel, std::span<const Pixel> pixels,
               std::span<const ZernikeIndex> keys);

  std::size_t size() const { return xc_.size(); }
  Panel panel() const { return panel_; }
  std::span<const Pixel> pixels() const { return pixels_; }

  /// out[p] = Psi at pixel p (gray levels).
  void phase(const PanelParams& params, std::span<double> out,
             const simd::Kernels& k = simd::active()) const;

  /// Gray levels floor((Psi + start) mod 2^k) at the sampled pixels.
  /// `start` holds the starting-mask values at the same pixels.
  void compose(const PanelParams& params, std::span<const double> start,
               std::span<std::uint16_t> out, const simd::Kernels& k = simd::active()) const;

 private:
  PanelGeometry geometry_;
  Panel panel_;
  std::vector<Pixel> pixels_;
  std::vector<ZernikeIndex> keys_;
  std::vector<double> xc_;
  std::vector<double> yc_;
  std::vector<double> basis_;  // keys_.size() x size(), term-major
};

/// M(beta) = floor((Psi(beta) + W) mod 2^k), left/right half-panels from
/// their own parameter blocks.
PhaseMask compose_mask(const MaskParams& params, const StartingMask& start,
                       const simd::Kernels& k = simd::active());

/// Psi(beta) over the whole panel, unquantized.
StartingMask phase_map(const MaskParams& params, const PanelGeometry& g,
                       const simd::Kernels& k = simd::active());

/// W' = W + Psi(best), so compose_mask(zeros, W') == compose_mask(best, W).
StartingMask accumulate_start(const StartingMask& start, const MaskParams& best,
                              const simd::Kernels& k = simd::active());

}  // namespace sqz::maskgen
