#pragma once

#include <limits>

namespace sqz::noise {

/// alpha in 1/W, loss as a fraction, theta in radians.
struct NoiseParams {
  double alpha = 8.76;
  double loss = 0.044;
  double theta = 0.009;

  /// Accepts the SHG efficiency in %/W (876 %/W -> 8.76 /W).
  static NoiseParams from_percent_per_watt(double alpha_pct, double loss, double theta);
  /// ContractError unless alpha > 0, 0 <= loss < 1, theta >= 0 (all finite).
  void validate() const;
};

/// Shot-noise-normalized variances of the squeezed / anti-squeezed quadratures.
struct Levels {
  double minus;
  double plus;
};

/// Traces in dBm. circ_dbm = -inf means no circuit noise.
struct NoisePowers {
  double sqz_dbm;
  double shot_dbm;
  double circ_dbm = -std::numeric_limits<double>::infinity();
};

/// R_pm = L + (1 - L) exp(pm 2 sqrt(alpha P)).
Levels raw_levels(const NoiseParams& p, double pump_w);

/// R'_pm = R_pm cos^2 theta + R_mp sin^2 theta.
Levels apply_phase_noise(Levels r, double theta);

/// raw_levels followed by apply_phase_noise.
Levels observed_levels(const NoiseParams& p, double pump_w);

double to_db(double linear);
double from_db(double db);

/// P_shot - P_sqz; positive means below shot noise.
double measured_squeezing(const NoisePowers& pw);

/// Squeezing after subtracting the circuit-noise floor from both traces in
/// linear units. NumericalError if either trace is at or below the floor.
double circuit_noise_correct(const NoisePowers& pw);

/// 1 - (1 - L_fixed) eta_mm
double effective_loss(double fixed_loss, double mode_efficiency);

/// Squeezing (dB below shot noise) for the given parameters and pump.
double squeezing_db(const NoiseParams& p, double pump_w);
double antisqueezing_db(const NoiseParams& p, double pump_w);

struct Optimum {
  double pump_w;
  double squeezing_db;
};

/// Maximum of squeezing_db over P in [0, p_max]: dense scan, then golden
/// section around the best grid point.
Optimum best_squeezing(const NoiseParams& p, double p_max = 10.0);

}  // namespace sqz::noise
