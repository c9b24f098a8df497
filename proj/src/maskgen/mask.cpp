#include "sqz/maskgen/mask.hpp"

#include <cmath>

#include "sqz/common/error.hpp"

namespace sqz::maskgen {
namespace {

simd::LensCoeffs lens_coeffs(const PanelParams& p) {
  return {std::cos(p.theta_lens), std::sin(p.theta_lens), p.mu_x, p.mu_y, p.gamma1, p.gamma2};
}

std::vector<PanelSampler::Pixel> half_row(int i, Panel panel, const PanelGeometry& g) {
  std::vector<PanelSampler::Pixel> px;
  const int wh = g.half_width();
  const int j0 = panel == Panel::left ? 1 : wh + 1;
  px.reserve(static_cast<std::size_t>(wh));
  for (int j = j0; j < j0 + wh; ++j) px.push_back({i, j});
  return px;
}

std::vector<ZernikeIndex> keys_of(const PanelParams& p) {
  std::vector<ZernikeIndex> keys;
  for (const auto& t : p.zernike) keys.push_back(t.index);
  return keys;
}

}  // namespace

double phase_function(double xi, double eta, double xc, double yc, const PanelParams& p) {
  const auto keys = keys_of(p);
  std::vector<double> z(keys.size());
  ZernikeBasis(keys).eval(xi, eta, z);
  double psi = 0.0;
  for (std::size_t t = 0; t < keys.size(); ++t) {
    const double term = p.zernike[t].coeff * z[t];
    psi = psi + term;
  }
  const auto c = lens_coeffs(p);
  const double dx = xc - c.mu_x;
  const double dy = yc - c.mu_y;
  const double u = c.cos_t * dx - c.sin_t * dy;
  const double v = c.sin_t * dx + c.cos_t * dy;
  const double t = c.gamma1 * (u * u) + c.gamma2 * (v * v);
  return psi + t;
}

PanelSampler::PanelSampler(const PanelGeometry& g, Panel panel, std::span<const Pixel> pixels,
                           std::span<const ZernikeIndex> keys)
    : geometry_(g), panel_(panel), pixels_(pixels.begin(), pixels.end()),
      keys_(keys.begin(), keys.end()) {
  const std::size_t n = pixels_.size();
  xc_.resize(n);
  yc_.resize(n);
  basis_.resize(keys_.size() * n);
  const ZernikeBasis zb(keys_);
  std::vector<double> z(keys_.size());
  for (std::size_t p = 0; p < n; ++p) {
    const auto [i, j] = pixels_[p];
    require(i >= 1 && i <= g.height_px && j >= 1 && j <= g.width_px,
            "PanelSampler: pixel outside panel");
    require(panel_of(j, g) == panel, "PanelSampler: pixel belongs to the other half-panel");
    const auto nc = normalized_coords(i, j, g);
    const auto cc = centered_coords(i, j, g);
    xc_[p] = cc.xc;
    yc_[p] = cc.yc;
    zb.eval(nc.xi, nc.eta, z);
    for (std::size_t t = 0; t < keys_.size(); ++t) basis_[t * n + p] = z[t];
  }
}

void PanelSampler::phase(const PanelParams& params, std::span<double> out,
                         const simd::Kernels& k) const {
  const std::size_t n = size();
  require(out.size() == n, "PanelSampler::phase: output size mismatch");
  require(params.zernike.size() == keys_.size(), "PanelSampler::phase: key set mismatch");
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t t = 0; t < keys_.size(); ++t) {
    require(params.zernike[t].index == keys_[t], "PanelSampler::phase: key set mismatch");
    k.axpy(out.data(), basis_.data() + t * n, params.zernike[t].coeff, n);
  }
  const auto c = lens_coeffs(params);
  k.lens_quadratic(out.data(), xc_.data(), yc_.data(), c, n);
}

void PanelSampler::compose(const PanelParams& params, std::span<const double> start,
                           std::span<std::uint16_t> out, const simd::Kernels& k) const {
  const std::size_t n = size();
  require(start.size() == n && out.size() == n, "PanelSampler::compose: size mismatch");
  std::vector<double> psi(n);
  phase(params, psi, k);
  k.axpy(psi.data(), start.data(), 1.0, n);
  k.wrap_quantize(psi.data(), out.data(), static_cast<double>(geometry_.levels()), n);
}

StartingMask phase_map(const MaskParams& params, const PanelGeometry& g, const simd::Kernels& k) {
  g.validate();
  StartingMask psi(g);
  const int wh = g.half_width();
  for (Panel panel : {Panel::left, Panel::right}) {
    const PanelParams& pp = panel == Panel::left ? params.left : params.right;
    const auto keys = keys_of(pp);
    const std::size_t col0 = panel == Panel::left ? 0 : static_cast<std::size_t>(wh);
    for (int i = 1; i <= g.height_px; ++i) {
      const auto px = half_row(i, panel, g);
      PanelSampler sampler(g, panel, px, keys);
      std::span<double> row(psi.values.data() + static_cast<std::size_t>(i - 1) * g.width_px + col0,
                            static_cast<std::size_t>(wh));
      sampler.phase(pp, row, k);
    }
  }
  return psi;
}

PhaseMask compose_mask(const MaskParams& params, const StartingMask& start, const simd::Kernels& k) {
  const PanelGeometry& g = start.geometry;
  require(start.values.size() == g.pixel_count(), "compose_mask: starting mask shape mismatch");
  StartingMask total = phase_map(params, g, k);
  k.axpy(total.values.data(), start.values.data(), 1.0, total.values.size());
  PhaseMask mask(g);
  k.wrap_quantize(total.values.data(), mask.values.data(), static_cast<double>(g.levels()),
                  total.values.size());
  return mask;
}

StartingMask accumulate_start(const StartingMask& start, const MaskParams& best,
                              const simd::Kernels& k) {
  const PanelGeometry& g = start.geometry;
  require(start.values.size() == g.pixel_count(), "accumulate_start: starting mask shape mismatch");
  StartingMask next = phase_map(best, g, k);
  // W' = W + Psi, kept in the operand order compose_mask uses (Psi + W).
  k.axpy(next.values.data(), start.values.data(), 1.0, next.values.size());
  return next;
}

}  // namespace sqz::maskgen
