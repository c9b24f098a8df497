// Compiled with -mavx2; only reached after a CPUID check.

#include <immintrin.h>

#include <cmath>

#include "sqz/simd/kernels.hpp"

namespace sqz::simd::avx2 {
namespace {

void axpy(double* out, const double* x, double a, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d t = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
    _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(out + i), t));
  }
  for (; i < n; ++i) {
    const double t = a * x[i];
    out[i] = out[i] + t;
  }
}

void lens_quadratic(double* out, const double* xc, const double* yc, const LensCoeffs& c,
                    std::size_t n) {
  const __m256d ct = _mm256_set1_pd(c.cos_t), st = _mm256_set1_pd(c.sin_t);
  const __m256d mx = _mm256_set1_pd(c.mu_x), my = _mm256_set1_pd(c.mu_y);
  const __m256d g1 = _mm256_set1_pd(c.gamma1), g2 = _mm256_set1_pd(c.gamma2);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d dx = _mm256_sub_pd(_mm256_loadu_pd(xc + i), mx);
    const __m256d dy = _mm256_sub_pd(_mm256_loadu_pd(yc + i), my);
    const __m256d u = _mm256_sub_pd(_mm256_mul_pd(ct, dx), _mm256_mul_pd(st, dy));
    const __m256d v = _mm256_add_pd(_mm256_mul_pd(st, dx), _mm256_mul_pd(ct, dy));
    const __m256d t = _mm256_add_pd(_mm256_mul_pd(g1, _mm256_mul_pd(u, u)),
                                    _mm256_mul_pd(g2, _mm256_mul_pd(v, v)));
    _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(out + i), t));
  }
  for (; i < n; ++i) {
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
  const __m256d vm = _mm256_set1_pd(modulus);
  const __m256d vinv = _mm256_set1_pd(inv);
  const __m256d vtop = _mm256_set1_pd(modulus - 1.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d x = _mm256_loadu_pd(in + i);
    const __m256d q = _mm256_floor_pd(_mm256_mul_pd(x, vinv));
    __m256d r = _mm256_sub_pd(x, _mm256_mul_pd(q, vm));
    const __m256d neg = _mm256_cmp_pd(r, _mm256_setzero_pd(), _CMP_LT_OQ);
    r = _mm256_blendv_pd(r, _mm256_add_pd(r, vm), neg);
    const __m256d over = _mm256_cmp_pd(r, vm, _CMP_GE_OQ);
    r = _mm256_blendv_pd(r, vtop, over);
    const __m128i i32 = _mm256_cvttpd_epi32(_mm256_floor_pd(r));
    // Values are in [0, 65535], so an unsigned saturating pack is exact.
    const __m128i u16 = _mm_packus_epi32(i32, i32);
    _mm_storel_epi64(reinterpret_cast<__m128i*>(out + i), u16);
  }
  for (; i < n; ++i) {
    const double q = std::floor(in[i] * inv);
    double r = in[i] - q * modulus;
    if (r < 0.0) r = r + modulus;
    if (r >= modulus) r = modulus - 1.0;
    out[i] = static_cast<std::uint16_t>(std::floor(r));
  }
}

void apply_phasor(cplx* field, const std::uint16_t* levels, const cplx* table, std::size_t n) {
  auto* f = reinterpret_cast<double*>(field);
  const auto* t = reinterpret_cast<const double*>(table);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const __m256d z = _mm256_loadu_pd(f + 2 * i);  // [a0 b0 a1 b1]
    const __m256d w = _mm256_set_m128d(_mm_loadu_pd(t + 2 * levels[i + 1]),
                                       _mm_loadu_pd(t + 2 * levels[i]));  // [c0 d0 c1 d1]
    const __m256d re = _mm256_movedup_pd(z);         // [a0 a0 a1 a1]
    const __m256d im = _mm256_permute_pd(z, 0xF);    // [b0 b0 b1 b1]
    const __m256d ws = _mm256_permute_pd(w, 0x5);    // [d0 c0 d1 c1]
    const __m256d x = _mm256_mul_pd(re, w);          // [ac ad]
    const __m256d y = _mm256_mul_pd(im, ws);         // [bd bc]
    _mm256_storeu_pd(f + 2 * i, _mm256_addsub_pd(x, y));  // [ac-bd ad+bc]
  }
  for (; i < n; ++i) {
    const double a = field[i].real(), b = field[i].imag();
    const double c = table[levels[i]].real(), d = table[levels[i]].imag();
    field[i] = cplx(a * c - b * d, a * d + b * c);
  }
}

double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

InnerSums inner(const cplx* a, const cplx* b, std::size_t n) {
  const auto* pa = reinterpret_cast<const double*>(a);
  const auto* pb = reinterpret_cast<const double*>(b);
  __m256d sdot = _mm256_setzero_pd();    // lanes: ar*br, ai*bi
  __m256d scross = _mm256_setzero_pd();  // lanes: ar*bi, ai*br
  __m256d saa = _mm256_setzero_pd();
  __m256d sbb = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const __m256d va = _mm256_loadu_pd(pa + 2 * i);
    const __m256d vb = _mm256_loadu_pd(pb + 2 * i);
    sdot = _mm256_add_pd(sdot, _mm256_mul_pd(va, vb));
    scross = _mm256_add_pd(scross, _mm256_mul_pd(va, _mm256_permute_pd(vb, 0x5)));
    saa = _mm256_add_pd(saa, _mm256_mul_pd(va, va));
    sbb = _mm256_add_pd(sbb, _mm256_mul_pd(vb, vb));
  }
  alignas(32) double c[4];
  _mm256_store_pd(c, scross);
  InnerSums s;
  s.re = hsum(sdot);
  s.im = (c[0] + c[2]) - (c[1] + c[3]);
  s.aa = hsum(saa);
  s.bb = hsum(sbb);
  for (; i < n; ++i) {
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
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_mul_pd(d, d), _mm256_loadu_pd(w + i)));
  }
  double s = hsum(acc);
  for (; i < n; ++i) {
    const double d = a[i] - b[i];
    s += d * d * w[i];
  }
  return s;
}

}  // namespace

const Kernels& table() {
  static const Kernels k{"avx2", axpy, lens_quadratic, wrap_quantize, apply_phasor, inner,
                         scaled_sqdist};
  return k;
}

}  // namespace sqz::simd::avx2
