#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "sqz/common/rng.hpp"
#include "sqz/maskgen/params.hpp"
#include "sqz/optimizer/acquisition.hpp"
#include "sqz/optimizer/gp.hpp"

namespace sqz::optimizer {

using maskgen::Bound;

/// Restricts acquisition to a box around the incumbent whose side adapts to
/// progress: doubled after `success_tolerance` consecutive improvements,
/// halved after `failure_tolerance` consecutive non-improvements, reset to
/// `init_length` once it falls below `min_length`. Per-dimension sides are
/// scaled by the GP lengthscales (geometric mean 1).
struct TrustRegionOptions {
  bool enabled = false;
  double init_length = 0.8;
  double min_length = 0.0078125;
  double max_length = 1.6;
  int success_tolerance = 3;
  int failure_tolerance = 10;
  double min_improvement = 1e-3;  ///< relative to |incumbent|
};

/// Monotone map applied to objective values before the surrogate sees them.
enum class TargetTransform {
  none,
  /// y -> -10^(-y/10): a dB figure of merit back to (negated) linear power.
  neg_linear_power,
};

struct OptimizerConfig {
  int budget = 200;
  int n_init = -1;  ///< negative: round(0.1 * budget), at least 1
  AcquisitionOptions acquisition;
  GpFitOptions gp;
  TrustRegionOptions trust_region;
  TargetTransform transform = TargetTransform::none;
  int full_refit_until = 100;  ///< hyperparameters refit every step up to this many observations
  int refit_every = 5;         ///< then every this many steps

  int resolved_n_init() const;
  /// ContractError unless budget >= n_init >= 1.
  void validate() const;
};

enum class EvalKind { init, bo, failed };

struct Evaluation {
  std::vector<double> unit;  ///< point in [0,1]^D
  double value = 0.0;        ///< NaN for failed evaluations
  EvalKind kind = EvalKind::init;
  std::string error;
};

/// Loop state; serializable so an interrupted run can resume.
struct OptState {
  OptimizerConfig config;
  std::vector<Bound> bounds;
  std::vector<Evaluation> prior;    ///< fed to the model, not counted in the budget
  std::vector<Evaluation> history;  ///< budgeted evaluations in order
  int best = -1;                    ///< index into history, earliest wins ties
  std::optional<GpHyper> hyper;     ///< last fitted hyperparameters
  std::vector<std::string> warnings;
  double tr_length = 0.0;  ///< trust-region side; 0 until first used
  int tr_successes = 0;
  int tr_failures = 0;

  bool done() const { return static_cast<int>(history.size()) >= config.budget; }
  std::optional<double> best_value() const;
};

std::vector<double> to_unit(std::span<const Bound> bounds, std::span<const double> x);
/// Clamped to the bounds.
std::vector<double> from_unit(std::span<const Bound> bounds, std::span<const double> u);

/// Black box on physical coordinates. Exceptions derived from
/// std::runtime_error mark the evaluation failed; others propagate.
using BlackBox = std::function<double(std::span<const double> x, EvalKind kind)>;

OptState make_state(const OptimizerConfig& cfg, std::vector<Bound> bounds);

/// One iteration: choose a point (uniform during initialization, else the
/// acquisition maximizer), evaluate it and update the state.
void step(OptState& s, const BlackBox& f, Rng& rng);

/// Run until the budget is exhausted. `after_step` is called after each
/// iteration (checkpointing).
void optimize(OptState& s, const BlackBox& f, Rng& rng,
              const std::function<void(const OptState&)>& after_step = {});

nlohmann::json state_to_json(const OptState& s);
OptState state_from_json(const nlohmann::json& j);

nlohmann::json config_to_json(const OptimizerConfig& c);
OptimizerConfig config_from_json(const nlohmann::json& j);

}  // namespace sqz::optimizer
