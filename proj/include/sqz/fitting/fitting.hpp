#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sqz/noise/noise.hpp"

namespace sqz::fitting {

using noise::NoiseParams;

struct SqueezeRow {
  double pump_w;
  double squeeze_db;
  std::optional<double> antisqueeze_db;  ///< may be absent
  double sigma_db = 0.2;
  bool corrected = true;  ///< values already have circuit noise removed
};

struct SqueezeDataset {
  std::vector<SqueezeRow> rows;
  /// Clearance used to correct rows whose `corrected` flag is false.
  std::optional<double> clearance_db;

  /// ConfigError unless every P > 0, sigma > 0, values finite, and at least
  /// three distinct pump powers are present.
  void validate() const;
  /// Rows with circuit noise removed (relative to a 0 dBm shot level).
  SqueezeDataset corrected() const;
};

/// CSV with header pump_w,squeeze_db,antisqueeze_db,sigma_db and an optional
/// trailing `corrected` column (0/1). Empty antisqueeze/sigma cells mean
/// "absent" / 0.2 dB.
SqueezeDataset read_dataset_csv(const std::filesystem::path& path);
void write_dataset_csv(const SqueezeDataset& d, const std::filesystem::path& path);

struct Prediction {
  double squeeze_db;
  double antisqueeze_db;
};

Prediction model_predict(const NoiseParams& p, double pump_w);

/// d(squeeze_db, antisqueeze_db)/d(alpha, loss, theta).
std::array<std::array<double, 3>, 2> model_jacobian(const NoiseParams& p, double pump_w);

struct FitResult {
  NoiseParams params;
  std::array<std::array<double, 3>, 3> covariance{};   ///< (alpha, loss, theta), SI units
  std::array<std::array<double, 3>, 3> correlation{};  ///< from the unscaled normal matrix
  std::array<double, 3> stderr_{};
  double residual_norm = 0.0;  ///< sqrt of weighted sum of squares
  double chi2_reduced = 0.0;
  int iterations = 0;
  bool converged = false;
  std::string diagnostics;
};

struct FitOptions {
  int max_iterations = 500;
  double step_tolerance = 1e-10;
};

/// Bounds accepted for an initial guess.
bool in_fit_bounds(const NoiseParams& p);

/// Guess from the data: L from the deepest squeezing, alpha from the lowest
/// pump point, theta = 5 mrad.
NoiseParams initial_guess(const SqueezeDataset& d);

/// Weighted Levenberg-Marquardt in (log alpha, logit L, logit 4theta/pi) over both
/// dB curves. Starts from `guess` (ContractError if outside the bounds) and
/// from the data-derived guess (theta 5 and 50 mrad); keeps the lowest residual, earliest start on
/// ties.
FitResult fit(const SqueezeDataset& d, std::optional<NoiseParams> guess = std::nullopt,
              const FitOptions& opt = {});

nlohmann::json to_json(const FitResult& r);

struct ScenarioRow {
  double pump_w;
  Prediction a;
  Prediction b;
};

struct ScenarioTable {
  std::vector<ScenarioRow> rows;
  noise::Optimum best_a;
  noise::Optimum best_b;
};

ScenarioTable compare_scenarios(const NoiseParams& a, const NoiseParams& b,
                                const std::vector<double>& pump_grid);
void write_scenarios_csv(const ScenarioTable& t, const std::filesystem::path& path);

/// 0.05 W .. 1.0 W in n equal steps.
std::vector<double> default_pump_grid(int n = 8);

}  // namespace sqz::fitting
