#pragma once

#include <span>
#include <string>
#include <vector>

#include "sqz/common/rng.hpp"
#include "sqz/optimizer/gp.hpp"

namespace sqz::optimizer {

enum class AcquisitionKind { mes, ei };

struct AcquisitionOptions {
  AcquisitionKind kind = AcquisitionKind::mes;
  int mes_samples = 16;      ///< sampled max-values
  int gumbel_points = 2048;  ///< quasi-random grid for the max-value fit
  int random_starts = 1024;
  int anchor_points = 5;     ///< best training points used as anchors
  int perturbations = 40;    ///< per anchor
  std::vector<double> perturbation_scales{0.005, 0.01, 0.02, 0.05};  ///< cycled, unit-cube sd
  double perturbed_dims = 5.0;  ///< expected coordinates moved per perturbation
  int refine_starts = 5;
  int refine_iterations = 40;
};

/// Standard normal helpers, stable in the far lower tail.
double normal_pdf(double z);
double normal_log_cdf(double z);
/// pdf(z) / cdf(z)
double normal_hazard(double z);

/// Max-value samples (standardized units) from a Gumbel fit to
/// P(max f <= z) = prod Phi((z - mu_i) / s_i) over a shifted R_d sequence
/// plus the training inputs. `degenerate` is set if the fit collapses.
struct MaxValueSamples {
  std::vector<double> values;
  bool degenerate = false;
};
MaxValueSamples sample_max_values(const GpModel& gp, int count, int grid_points, Rng& rng);

/// Max-value entropy search: mean over y* of gamma psi / 2 - log Phi(gamma),
/// gamma = (y* - mu) / sigma.
double mes_value(const GpModel& gp, std::span<const double> ystar, std::span<const double> x,
                 std::span<double> grad = {});

/// Expected improvement over `best` (standardized).
double ei_value(const GpModel& gp, double best, std::span<const double> x,
                std::span<double> grad = {});

struct Acquired {
  std::vector<double> x;  ///< unit cube
  double value = 0.0;
  bool fallback = false;  ///< uniform draw because the model was degenerate
  std::string warning;
};

/// Sub-box of the unit cube the search is restricted to.
struct Region {
  std::vector<double> lo;
  std::vector<double> hi;
};

/// Maximize the acquisition over [0,1]^D (or `region`) from random starts
/// plus perturbations of the best training points, refining the top starts
/// with projected L-BFGS.
Acquired acquire_next(const GpModel& gp, const AcquisitionOptions& opt, Rng& rng,
                      const Region* region = nullptr);

/// Shifted R_d low-discrepancy points (rows).
Eigen::MatrixXd rd_sequence(int count, int dim, Rng& rng);

}  // namespace sqz::optimizer
