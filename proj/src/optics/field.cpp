#include "sqz/optics/field.hpp"

#include <cmath>
#include <fstream>

#include "sqz/common/error.hpp"
#include "sqz/simd/kernels.hpp"

namespace sqz::optics {

double ComplexField::power() const {
  const auto s = simd::active().inner(samples.data(), samples.data(), samples.size());
  return s.aa * grid.cell_area();
}

void ComplexField::scale(double s) {
  for (auto& v : samples) v *= s;
}

cplx inner_product(const ComplexField& a, const ComplexField& b) {
  require(a.grid == b.grid, "inner_product: grid mismatch");
  const auto s = simd::active().inner(a.samples.data(), b.samples.data(), a.samples.size());
  return cplx(s.re, s.im) * a.grid.cell_area();
}

double overlap_efficiency(const ComplexField& a, const ComplexField& b) {
  require(a.grid == b.grid, "overlap_efficiency: grid mismatch");
  const auto s = simd::active().inner(a.samples.data(), b.samples.data(), a.samples.size());
  require(s.aa > 0.0 && s.bb > 0.0, "overlap_efficiency: zero-power field");
  const double eta = (s.re * s.re + s.im * s.im) / (s.aa * s.bb);
  // Cauchy-Schwarz holds exactly; clamp rounding excursions.
  return std::min(1.0, eta);
}

BeamMoments beam_moments(const ComplexField& f) {
  double p = 0, sx = 0, sy = 0;
  for (int b = 0; b < f.grid.ny; ++b)
    for (int a = 0; a < f.grid.nx; ++a) {
      const double i = std::norm(f.at(a, b));
      p += i;
      sx += i * f.grid.x(a);
      sy += i * f.grid.y(b);
    }
  require(p > 0.0, "beam_moments: zero-power field");
  const double x0 = sx / p, y0 = sy / p;
  double vx = 0, vy = 0;
  for (int b = 0; b < f.grid.ny; ++b)
    for (int a = 0; a < f.grid.nx; ++a) {
      const double i = std::norm(f.at(a, b));
      vx += i * (f.grid.x(a) - x0) * (f.grid.x(a) - x0);
      vy += i * (f.grid.y(b) - y0) * (f.grid.y(b) - y0);
    }
  return {x0, y0, 2.0 * std::sqrt(vx / p), 2.0 * std::sqrt(vy / p)};
}

void export_field_csv(const ComplexField& f, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os.precision(17);
  for (int b = 0; b < f.grid.ny; ++b) {
    for (int a = 0; a < f.grid.nx; ++a) {
      if (a > 0) os << ',';
      os << f.at(a, b).real() << ',' << f.at(a, b).imag();
    }
    os << '\n';
  }
  if (!os) throw IoError("write failed: " + path.string());
}

}  // namespace sqz::optics
