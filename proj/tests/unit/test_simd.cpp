#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "sqz/common/rng.hpp"
#include "sqz/simd/kernels.hpp"

using namespace sqz;
using simd::cplx;

namespace {

std::vector<const simd::Kernels*> vector_tables() {
  std::vector<const simd::Kernels*> t;
  if (const auto* k = simd::avx2_kernels()) t.push_back(k);
  if (t.empty()) MESSAGE("no vector kernels on this CPU; equivalence checks are vacuous");
  return t;
}

std::vector<double> awkward_values(Rng& rng, std::size_t n) {
  // Mix of ordinary, huge, tiny-negative and exact-multiple inputs.
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) {
    switch (i % 6) {
      case 0: v[i] = rng.uniform(-5000.0, 5000.0); break;
      case 1: v[i] = rng.uniform(-1e12, 1e12); break;
      case 2: v[i] = -std::ldexp(rng.uniform(), i % 12 == 2 ? -1070 : -60); break;
      case 3: v[i] = 1024.0 * std::floor(rng.uniform(-50.0, 50.0)); break;
      case 4: v[i] = std::nextafter(1024.0 * std::floor(rng.uniform(-5.0, 5.0)), -1e300); break;
      default: v[i] = rng.uniform(0.0, 1024.0); break;
    }
  }
  return v;
}

}  // namespace

TEST_CASE("wrap_quantize follows the mathematical modulo") {
  const auto& k = simd::scalar_kernels();
  std::vector<double> in{0.0, 1024.0, -0.5, -1e-20, 1023.999, 2048.5, -1024.0, 5.0, -4.9e-324};
  std::vector<std::uint16_t> out(in.size());
  k.wrap_quantize(in.data(), out.data(), 1024.0, in.size());
  CHECK(out == std::vector<std::uint16_t>{0, 0, 1023, 1023, 1023, 0, 0, 5, 1023});
}

TEST_CASE("element-wise kernels are bit-identical across tables") {
  Rng rng(11);
  const auto& ref = simd::scalar_kernels();
  for (const auto* vk : vector_tables()) {
    for (std::size_t n : {0u, 1u, 3u, 4u, 5u, 17u, 64u, 1001u}) {
      CAPTURE(n);
      auto x = awkward_values(rng, n);
      auto base = awkward_values(rng, n);

      auto a = base, b = base;
      ref.axpy(a.data(), x.data(), 0.37, n);
      vk->axpy(b.data(), x.data(), 0.37, n);
      CHECK(a == b);

      std::vector<double> xc(n), yc(n);
      for (std::size_t i = 0; i < n; ++i) {
        xc[i] = rng.uniform(-480, 480);
        yc[i] = rng.uniform(-600, 600);
      }
      const simd::LensCoeffs lc{std::cos(0.3), std::sin(0.3), 12.5, -40.0, 1.3e-3, -7e-4};
      a = base;
      b = base;
      ref.lens_quadratic(a.data(), xc.data(), yc.data(), lc, n);
      vk->lens_quadratic(b.data(), xc.data(), yc.data(), lc, n);
      CHECK(a == b);

      std::vector<std::uint16_t> qa(n), qb(n);
      ref.wrap_quantize(x.data(), qa.data(), 1024.0, n);
      vk->wrap_quantize(x.data(), qb.data(), 1024.0, n);
      CHECK(qa == qb);
      for (auto q : qa) CHECK(q < 1024);

      std::vector<cplx> table(1024);
      for (int l = 0; l < 1024; ++l) table[l] = std::polar(1.0, 2 * std::numbers::pi * l / 1024.0);
      std::vector<cplx> fa(n), fb;
      for (auto& f : fa) f = {rng.normal(), rng.normal()};
      fb = fa;
      ref.apply_phasor(fa.data(), qa.data(), table.data(), n);
      vk->apply_phasor(fb.data(), qa.data(), table.data(), n);
      CHECK(fa == fb);
    }
  }
}

TEST_CASE("reductions agree to rounding across tables") {
  Rng rng(5);
  const auto& ref = simd::scalar_kernels();
  for (const auto* vk : vector_tables()) {
    for (std::size_t n : {1u, 2u, 7u, 256u, 4099u}) {
      std::vector<cplx> a(n), b(n);
      for (std::size_t i = 0; i < n; ++i) {
        a[i] = {rng.normal(), rng.normal()};
        b[i] = {rng.normal(), rng.normal()};
      }
      const auto s = ref.inner(a.data(), b.data(), n);
      const auto v = vk->inner(a.data(), b.data(), n);
      const double scale = std::sqrt(s.aa * s.bb);
      CHECK(std::abs(s.re - v.re) <= 1e-12 * scale);
      CHECK(std::abs(s.im - v.im) <= 1e-12 * scale);
      CHECK(v.aa == doctest::Approx(s.aa).epsilon(1e-12));
      CHECK(v.bb == doctest::Approx(s.bb).epsilon(1e-12));

      std::vector<double> x(n), y(n), w(n);
      for (std::size_t i = 0; i < n; ++i) {
        x[i] = rng.uniform();
        y[i] = rng.uniform();
        w[i] = rng.uniform(0.1, 10.0);
      }
      CHECK(vk->scaled_sqdist(x.data(), y.data(), w.data(), n) ==
            doctest::Approx(ref.scaled_sqdist(x.data(), y.data(), w.data(), n)).epsilon(1e-12));
    }
  }
}

TEST_CASE("inner product matches its definition") {
  std::vector<cplx> a{{1, 2}, {0, -1}, {3, 0}};
  std::vector<cplx> b{{2, 0}, {1, 1}, {-1, 4}};
  cplx expect = 0;
  for (int i = 0; i < 3; ++i) expect += std::conj(a[i]) * b[i];
  const auto s = simd::active().inner(a.data(), b.data(), 3);
  CHECK(s.re == doctest::Approx(expect.real()));
  CHECK(s.im == doctest::Approx(expect.imag()));
  CHECK(s.aa == doctest::Approx(15.0));
  CHECK(s.bb == doctest::Approx(23.0));
}
