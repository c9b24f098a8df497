#pragma once

// Data-parallel inner loops shared by mask synthesis, field manipulation and
// the GP kernel. Each kernel has a scalar reference and optional vector
// variants; the active table is picked once at startup from CPUID, and can be
// forced to the scalar path with SQZ_SIMD=scalar.
//
// Element-wise kernels (axpy, lens_quadratic, wrap_quantize, apply_phasor)
// perform the same IEEE operations in the same order in every variant and are
// therefore bit-identical across tables. Reductions (inner, scaled_sqdist)
// reassociate and agree only to rounding.

#include <complex>
#include <cstddef>
#include <cstdint>
#include <string_view>

namespace sqz::simd {

using cplx = std::complex<double>;

struct LensCoeffs {
  double cos_t;
  double sin_t;
  double mu_x;
  double mu_y;
  double gamma1;
  double gamma2;
};

struct InnerSums {
  double re = 0.0;   ///< Re sum conj(a) b
  double im = 0.0;   ///< Im sum conj(a) b
  double aa = 0.0;   ///< sum |a|^2
  double bb = 0.0;   ///< sum |b|^2
};

struct Kernels {
  std::string_view name;

  /// out[i] = out[i] + a * x[i]  (separately rounded multiply and add)
  void (*axpy)(double* out, const double* x, double a, std::size_t n);

  /// out[i] += g1 u^2 + g2 v^2 where (u, v) is (xc - mu_x, yc - mu_y) rotated.
  void (*lens_quadratic)(double* out, const double* xc, const double* yc,
                         const LensCoeffs& c, std::size_t n);

  /// out[i] = floor(in[i] mod modulus), mathematical mod into [0, modulus).
  /// modulus must be a power of two no larger than 65536.
  void (*wrap_quantize)(const double* in, std::uint16_t* out, double modulus,
                        std::size_t n);

  /// field[i] *= table[levels[i]]
  void (*apply_phasor)(cplx* field, const std::uint16_t* levels, const cplx* table,
                       std::size_t n);

  InnerSums (*inner)(const cplx* a, const cplx* b, std::size_t n);

  /// sum_d (a[d] - b[d])^2 * w[d]
  double (*scaled_sqdist)(const double* a, const double* b, const double* w,
                          std::size_t n);
};

const Kernels& scalar_kernels();

/// nullptr when the variant was not compiled in or the CPU lacks the ISA.
const Kernels* avx2_kernels();

/// Best table for this machine (honours SQZ_SIMD=scalar).
const Kernels& active();

}  // namespace sqz::simd
