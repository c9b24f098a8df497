#pragma once

#include <functional>
#include <span>
#include <vector>

namespace sqz::optimizer {

/// f(x, grad) returns the value and fills grad (same size as x).
using Objective = std::function<double(std::span<const double> x, std::span<double> grad)>;

struct LbfgsOptions {
  int max_iterations = 100;
  int memory = 8;
  double gradient_tolerance = 1e-6;  ///< on the projected gradient, inf-norm
  double value_tolerance = 1e-10;    ///< relative decrease
};

struct LbfgsResult {
  std::vector<double> x;
  double value;
  int iterations;
  int evaluations;
  bool converged;
};

/// Box-constrained minimization: L-BFGS directions restricted to the free
/// variables, projected backtracking line search. Bounds may be +-inf.
LbfgsResult minimize_box(const Objective& f, std::vector<double> x0, std::span<const double> lo,
                         std::span<const double> hi, const LbfgsOptions& opt = {});

}  // namespace sqz::optimizer
