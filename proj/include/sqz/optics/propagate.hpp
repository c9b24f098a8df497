#pragma once

#include <vector>

#include "sqz/optics/field.hpp"

namespace sqz::optics {

/// Angular-spectrum free-space propagator for a fixed grid, wavelength and
/// distance. The transfer function is tabulated at construction. Negative
/// distances back-propagate. Evanescent components decay in either direction.
class Propagator {
 public:
  Propagator(const Grid& grid, double wavelength, double distance);

  ComplexField operator()(const ComplexField& in) const;
  void apply_in_place(ComplexField& f) const;

  double distance() const { return distance_; }

 private:
  Grid grid_;
  double wavelength_;
  double distance_;
  std::vector<cplx> transfer_;  // FFT order, includes the 1/N normalization
};

ComplexField propagate(const ComplexField& in, double distance);

}  // namespace sqz::optics
