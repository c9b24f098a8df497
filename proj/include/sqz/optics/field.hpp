#pragma once

#include <complex>
#include <filesystem>
#include <vector>

namespace sqz::optics {

using cplx = std::complex<double>;

/// Uniform sampling grid centred on the optical axis. Sample (a, b) sits at
/// x = (a - nx/2) pitch, y = (b - ny/2) pitch, so the origin is a sample.
struct Grid {
  int nx = 512;
  int ny = 512;
  double pitch = 8e-6;  ///< metres

  double x(int a) const { return (a - nx / 2) * pitch; }
  double y(int b) const { return (b - ny / 2) * pitch; }
  std::size_t size() const { return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny); }
  double cell_area() const { return pitch * pitch; }

  bool operator==(const Grid&) const = default;
};

inline constexpr double kDefaultWavelength = 1545.32e-9;

/// Sampled complex amplitude, row-major (ny rows of nx samples).
struct ComplexField {
  Grid grid;
  double wavelength = kDefaultWavelength;
  std::vector<cplx> samples;

  ComplexField(const Grid& g, double lambda) : grid(g), wavelength(lambda), samples(g.size()) {}

  cplx& at(int a, int b) { return samples[static_cast<std::size_t>(b) * grid.nx + a]; }
  const cplx& at(int a, int b) const { return samples[static_cast<std::size_t>(b) * grid.nx + a]; }

  /// Integral of |E|^2 over the grid.
  double power() const;
  void scale(double s);
};

/// |<a|b>|^2 / (<a|a><b|b>). ContractError on grid mismatch or zero power.
double overlap_efficiency(const ComplexField& a, const ComplexField& b);

/// <a|b> = sum conj(a) b dA
cplx inner_product(const ComplexField& a, const ComplexField& b);

/// Intensity-weighted centroid and 1/e^2 radius 2*sqrt(<(x - xbar)^2>).
struct BeamMoments {
  double x0, y0, wx, wy;
};
BeamMoments beam_moments(const ComplexField& f);

/// CSV with one grid row per line: re,im pairs interleaved across the row.
void export_field_csv(const ComplexField& f, const std::filesystem::path& path);

}  // namespace sqz::optics
