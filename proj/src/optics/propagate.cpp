#include "sqz/optics/propagate.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>

#include "sqz/common/error.hpp"

namespace sqz::optics {
namespace {

struct FftwFree {
  void operator()(fftw_complex* p) const { fftw_free(p); }
};
using FftwBuffer = std::unique_ptr<fftw_complex, FftwFree>;

FftwBuffer allocate(std::size_t n) {
  auto* p = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n));
  if (p == nullptr) throw std::bad_alloc();
  return FftwBuffer(p);
}

struct PlanPair {
  fftw_plan forward;
  fftw_plan backward;
};

// FFTW planning is not thread-safe; execution with fftw_execute_dft is.
// Plans are built in place on an fftw_malloc'd buffer and reused on other
// fftw_malloc'd buffers, which share its alignment.
const PlanPair& plans_for(int nx, int ny) {
  static std::mutex mu;
  static std::map<std::pair<int, int>, PlanPair> cache;
  std::lock_guard lock(mu);
  auto it = cache.find({nx, ny});
  if (it != cache.end()) return it->second;
  auto buf = allocate(static_cast<std::size_t>(nx) * ny);
  PlanPair p{fftw_plan_dft_2d(ny, nx, buf.get(), buf.get(), FFTW_FORWARD, FFTW_ESTIMATE),
             fftw_plan_dft_2d(ny, nx, buf.get(), buf.get(), FFTW_BACKWARD, FFTW_ESTIMATE)};
  return cache.emplace(std::make_pair(nx, ny), p).first->second;
}

double frequency(int idx, int n, double pitch) {
  const int k = idx < (n + 1) / 2 ? idx : idx - n;
  return 2.0 * std::numbers::pi * k / (n * pitch);
}

}  // namespace

Propagator::Propagator(const Grid& grid, double wavelength, double distance)
    : grid_(grid), wavelength_(wavelength), distance_(distance), transfer_(grid.size()) {
  require(grid.nx >= 2 && grid.ny >= 2, "Propagator: grid too small");
  require(wavelength > 0.0, "Propagator: wavelength must be positive");
  const double k = 2.0 * std::numbers::pi / wavelength;
  const double inv_n = 1.0 / static_cast<double>(grid.size());
  for (int b = 0; b < grid.ny; ++b) {
    const double ky = frequency(b, grid.ny, grid.pitch);
    for (int a = 0; a < grid.nx; ++a) {
      const double kx = frequency(a, grid.nx, grid.pitch);
      const double kz2 = k * k - kx * kx - ky * ky;
      cplx h;
      if (kz2 >= 0.0)
        h = std::polar(inv_n, std::sqrt(kz2) * distance);
      else
        h = inv_n * std::exp(-std::sqrt(-kz2) * std::abs(distance));
      transfer_[static_cast<std::size_t>(b) * grid.nx + a] = h;
    }
  }
}

void Propagator::apply_in_place(ComplexField& f) const {
  require(f.grid == grid_, "Propagator: grid mismatch");
  require(std::abs(f.wavelength - wavelength_) <= 1e-15, "Propagator: wavelength mismatch");
  if (distance_ == 0.0) return;
  const std::size_t n = grid_.size();
  const auto& plans = plans_for(grid_.nx, grid_.ny);
  auto buf = allocate(n);
  auto* data = reinterpret_cast<cplx*>(buf.get());
  std::copy(f.samples.begin(), f.samples.end(), data);
  fftw_execute_dft(plans.forward, buf.get(), buf.get());
  for (std::size_t i = 0; i < n; ++i) data[i] *= transfer_[i];
  fftw_execute_dft(plans.backward, buf.get(), buf.get());
  std::copy(data, data + n, f.samples.begin());
}

ComplexField Propagator::operator()(const ComplexField& in) const {
  ComplexField out = in;
  apply_in_place(out);
  return out;
}

ComplexField propagate(const ComplexField& in, double distance) {
  if (distance == 0.0) return in;
  return Propagator(in.grid, in.wavelength, distance)(in);
}

}  // namespace sqz::optics
