#include <cmath>

#include "sqz/simd/kernels.hpp"

namespace sqz::simd {
namespace {

void axpy(double* out, const double* x, double a, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double t = a * x[i];
    out[i] = out[i] + t;
  }
}

void lens_quadratic(double* out, const double* xc, const double* yc, const LensCoeffs& c,
                    std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = xc[i] - c.mu_x;
    const double dy = yc[i] - c.mu_y;
    const double u = c.cos_t * dx - c.sin_t * dy;
    const double v = c.sin_t * dx + c.cos_t * dy;
    const double t = c.gamma1 * (u * u) + c.gamma2 * (v * v);
    out[i] = out[i] + t;
  }
}

void wrap_quantize(const double* in, std::uint16_t* out, double modulus, std::size_t n) {
  const double inv = 1.0 / modulus;
  for (std::size_t i = 0; i < n; ++i) {
    const double q = std::floor(in[i] * inv);
    double r = in[i] - q * modulus;
    // Subnormal negatives underflow the quotient to -0 and leave r < 0;
    // values a hair below zero round up to exactly `modulus`.
    if (r < 0.0) r = r + modulus;
    if (r >= modulus) r = modulus - 1.0;
    out[i] = static_cast<std::uint16_t>(std::floor(r));
  }
}

void apply_phasor(cplx* field, const std::uint16_t* levels, const cplx* table, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double a = field[i].real(), b = field[i].imag();
    const double c = table[levels[i]].real(), d = table[levels[i]].imag();
    field[i] = cplx(a * c - b * d, a * d + b * c);
  }
}

InnerSums inner(const cplx* a, const cplx* b, std::size_t n) {
  InnerSums s;
  for (std::size_t i = 0; i < n; ++i) {
    const double ar = a[i].real(), ai = a[i].imag();
    const double br = b[i].real(), bi = b[i].imag();
    s.re += ar * br + ai * bi;
    s.im += ar * bi - ai * br;
    s.aa += ar * ar + ai * ai;
    s.bb += br * br + bi * bi;
  }
  return s;
}

double scaled_sqdist(const double* a, const double* b, const double* w, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    s += d * d * w[i];
  }
  return s;
}

}  // namespace

const Kernels& scalar_kernels() {
  static const Kernels k{"scalar", axpy, lens_quadratic, wrap_quantize, apply_phasor, inner,
                         scaled_sqdist};
  return k;
}

}  // namespace sqz::simd
