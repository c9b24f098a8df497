#pragma once

#include <Eigen/Dense>

#include <span>
#include <vector>

#include "sqz/common/rng.hpp"

namespace sqz::optimizer {

/// Matern-5/2 ARD hyperparameters (standardized-target units).
struct GpHyper {
  std::vector<double> lengthscales;
  double signal_var = 1.0;
  double noise_var = 1e-2;
};

struct GpBounds {
  double lengthscale_lo = 1e-2, lengthscale_hi = 10.0;
  double noise_lo = 1e-6, noise_hi = 1.0;
  double signal_lo = 1e-2, signal_hi = 1e2;
};

/// Constant prior mean of the surrogate, in raw target units.
enum class PriorMean {
  sample_mean,  ///< mean of the targets
  minimum,      ///< smallest target: unexplored regions look poor, not average
};

struct GpFitOptions {
  GpBounds bounds;
  PriorMean prior_mean = PriorMean::minimum;
  int random_restarts = 2;
  int max_iterations = 60;
  bool optimize = true;  ///< false: use the warm start (or defaults) as given
};

/// Latent-function posterior at one point, standardized units.
struct Posterior {
  double mean;
  double var;
};

struct PosteriorGrad {
  double mean;
  double var;
  std::vector<double> dmean;
  std::vector<double> dvar;
};

/// Matern-5/2 kernel sf2 (1 + sqrt5 r + 5 r^2 / 3) exp(-sqrt5 r).
double matern52(double r, double signal_var);

/// Log marginal likelihood of standardized targets; fills the gradient with
/// respect to (log l_1..l_D, log sf2, log sn2) if `grad` is non-null.
/// Returns -inf if the covariance cannot be factorized.
double log_marginal_likelihood(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                               const GpHyper& h, std::vector<double>* grad);

/// GP regression on the unit cube. Targets are shifted by the prior mean
/// and divided by their sample standard deviation.
class GpModel {
 public:
  /// Fit hyperparameters by maximizing the log marginal likelihood from the
  /// warm start, the default start and `random_restarts` seeded starts.
  /// NumericalError if no start yields a factorizable covariance.
  static GpModel fit(const Eigen::MatrixXd& X, std::span<const double> y, const GpFitOptions& opt,
                     Rng& rng, const GpHyper* warm = nullptr);

  int size() const { return static_cast<int>(X_.rows()); }
  int dim() const { return static_cast<int>(X_.cols()); }
  const GpHyper& hyper() const { return hyper_; }
  double jitter() const { return jitter_; }
  double log_likelihood() const { return lml_; }
  const Eigen::MatrixXd& inputs() const { return X_; }
  const Eigen::VectorXd& targets() const { return y_; }  ///< standardized

  double standardize(double raw) const { return (raw - mean_) / scale_; }
  double destandardize(double s) const { return s * scale_ + mean_; }
  double target_scale() const { return scale_; }

  Posterior predict(std::span<const double> x) const;
  PosteriorGrad predict_grad(std::span<const double> x) const;
  /// Rows of Xq are query points.
  void predict_batch(const Eigen::MatrixXd& Xq, Eigen::VectorXd& mean, Eigen::VectorXd& var) const;

 private:
  void factorize();

  Eigen::MatrixXd X_;
  Eigen::VectorXd y_;
  double mean_ = 0.0;
  double scale_ = 1.0;
  GpHyper hyper_;
  double jitter_ = 0.0;
  double lml_ = 0.0;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::VectorXd alpha_;
};

}  // namespace sqz::optimizer
