#include "sqz/noise/noise.hpp"

#include <cmath>

#include "sqz/common/error.hpp"

namespace sqz::noise {

NoiseParams NoiseParams::from_percent_per_watt(double alpha_pct, double loss, double theta) {
  NoiseParams p{alpha_pct / 100.0, loss, theta};
  p.validate();
  return p;
}

void NoiseParams::validate() const {
  require(std::isfinite(alpha) && alpha > 0.0, "SHG efficiency must be positive");
  require(std::isfinite(loss) && loss >= 0.0 && loss < 1.0, "loss must be in [0, 1)");
  require(std::isfinite(theta) && theta >= 0.0, "phase fluctuation must be non-negative");
}

Levels raw_levels(const NoiseParams& p, double pump_w) {
  require(pump_w >= 0.0, "pump power must be non-negative");
  const double g = 2.0 * std::sqrt(p.alpha * pump_w);
  return {p.loss + (1.0 - p.loss) * std::exp(-g), p.loss + (1.0 - p.loss) * std::exp(g)};
}

Levels apply_phase_noise(Levels r, double theta) {
  require(r.minus >= 0.0 && r.plus >= 0.0 && theta >= 0.0, "apply_phase_noise: negative input");
  const double c = std::cos(theta), s = std::sin(theta);
  const double c2 = c * c, s2 = s * s;
  return {r.minus * c2 + r.plus * s2, r.plus * c2 + r.minus * s2};
}

Levels observed_levels(const NoiseParams& p, double pump_w) {
  return apply_phase_noise(raw_levels(p, pump_w), p.theta);
}

double to_db(double linear) {
  require(linear > 0.0, "to_db: non-positive input");
  return 10.0 * std::log10(linear);
}

double from_db(double db) { return std::pow(10.0, db / 10.0); }

double measured_squeezing(const NoisePowers& pw) { return pw.shot_dbm - pw.sqz_dbm; }

double circuit_noise_correct(const NoisePowers& pw) {
  const double circ = std::isinf(pw.circ_dbm) && pw.circ_dbm < 0 ? 0.0 : from_db(pw.circ_dbm);
  const double shot = from_db(pw.shot_dbm) - circ;
  const double sqz = from_db(pw.sqz_dbm) - circ;
  if (!(shot > 0.0) || !(sqz > 0.0))
    throw NumericalError("trace at or below the circuit-noise floor");
  return to_db(shot / sqz);
}

double effective_loss(double fixed_loss, double mode_efficiency) {
  require(fixed_loss >= 0.0 && fixed_loss <= 1.0, "fixed loss must be in [0, 1]");
  require(mode_efficiency >= 0.0 && mode_efficiency <= 1.0, "mode efficiency must be in [0, 1]");
  return 1.0 - (1.0 - fixed_loss) * mode_efficiency;
}

double squeezing_db(const NoiseParams& p, double pump_w) {
  return -to_db(observed_levels(p, pump_w).minus);
}

double antisqueezing_db(const NoiseParams& p, double pump_w) {
  return to_db(observed_levels(p, pump_w).plus);
}

Optimum best_squeezing(const NoiseParams& p, double p_max) {
  require(p_max > 0.0, "best_squeezing: p_max must be positive");
  constexpr int kGrid = 2000;
  int best = 0;
  double best_v = squeezing_db(p, 0.0);
  for (int i = 1; i <= kGrid; ++i) {
    const double v = squeezing_db(p, p_max * i / kGrid);
    if (v > best_v) best_v = v, best = i;
  }
  double a = p_max * std::max(0, best - 1) / kGrid;
  double b = p_max * std::min(kGrid, best + 1) / kGrid;
  const double r = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - r * (b - a), d = a + r * (b - a);
  double fc = squeezing_db(p, c), fd = squeezing_db(p, d);
  for (int it = 0; it < 200 && b - a > 1e-14 * (1.0 + b); ++it) {
    if (fc > fd) {
      b = d, d = c, fd = fc;
      c = b - r * (b - a), fc = squeezing_db(p, c);
    } else {
      a = c, c = d, fc = fd;
      d = a + r * (b - a), fd = squeezing_db(p, d);
    }
  }
  const double x = 0.5 * (a + b);
  return {x, squeezing_db(p, x)};
}

}  // namespace sqz::noise
