#include "sqz/optics/mode.hpp"

#include <cmath>
#include <string>

#include "sqz/common/error.hpp"

namespace sqz::optics {
namespace {

void check_grid(const ModeSpec& spec, const Grid& grid) {
  if (!(spec.waist > 0.0)) throw ConfigError("mode waist must be positive");
  const double span = std::min(grid.nx, grid.ny) * grid.pitch;
  if (span < 3.0 * spec.waist)
    throw ConfigError("grid spans " + std::to_string(span * 1e3) + " mm, less than 3 waist radii (" +
                      std::to_string(3e3 * spec.waist) + " mm)");
}

// Unnormalized HG/Gaussian sample; normalization happens on the grid.
void add_elementary(const ModeSpec& spec, cplx weight, ComplexField& out) {
  const Grid& g = out.grid;
  const double s = std::sqrt(2.0) / spec.waist;
  std::vector<cplx> row(g.nx);
  std::vector<double> hx(g.nx);
  for (int a = 0; a < g.nx; ++a) {
    const double x = g.x(a) - spec.center_x;
    hx[a] = hermite(spec.m, s * x) * std::exp(-x * x / (spec.waist * spec.waist));
    row[a] = std::polar(1.0, spec.tilt_kx * g.x(a));
  }
  for (int b = 0; b < g.ny; ++b) {
    const double y = g.y(b) - spec.center_y;
    const double hy = hermite(spec.n, s * y) * std::exp(-y * y / (spec.waist * spec.waist));
    const cplx ty = weight * std::polar(hy, spec.tilt_ky * g.y(b));
    for (int a = 0; a < g.nx; ++a) out.at(a, b) += ty * (hx[a] * row[a]);
  }
}

void normalize(ComplexField& f) {
  const double p = f.power();
  if (!(p > 0.0)) throw ConfigError("mode has zero power on this grid");
  f.scale(1.0 / std::sqrt(p));
}

}  // namespace

ModeSpec ModeSpec::gaussian(double waist) {
  ModeSpec s;
  s.waist = waist;
  return s;
}

ModeSpec ModeSpec::hermite_gaussian(int m, int n, double waist) {
  ModeSpec s;
  s.kind = Kind::hermite_gaussian;
  s.m = m;
  s.n = n;
  s.waist = waist;
  return s;
}

double hermite(int k, double x) {
  if (k == 0) return 1.0;
  double h0 = 1.0, h1 = 2.0 * x;
  for (int i = 1; i < k; ++i) {
    const double h2 = 2.0 * x * h1 - 2.0 * i * h0;
    h0 = h1;
    h1 = h2;
  }
  return h1;
}

ComplexField synthesize_mode(const ModeSpec& spec, const Grid& grid, double wavelength) {
  ComplexField f(grid, wavelength);
  if (spec.kind != ModeSpec::Kind::superposition) {
    if (spec.m < 0 || spec.n < 0) throw ConfigError("HG orders must be non-negative");
    check_grid(spec, grid);
    add_elementary(spec, 1.0, f);
    normalize(f);
    return f;
  }
  if (spec.components.empty()) throw ConfigError("superposition has no components");
  double norm = 0.0;
  for (const auto& c : spec.components) norm += std::norm(c.weight);
  if (!(norm > 0.0)) throw ConfigError("superposition weights are all zero");
  for (const auto& c : spec.components) {
    ComplexField part = synthesize_mode(c.mode, grid, wavelength);
    const cplx w = c.weight / std::sqrt(norm);
    for (std::size_t i = 0; i < f.samples.size(); ++i) f.samples[i] += w * part.samples[i];
  }
  normalize(f);
  return f;
}

}  // namespace sqz::optics
