#pragma once

#include <complex>
#include <cstdint>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "sqz/common/rng.hpp"
#include "sqz/maskgen/mask.hpp"
#include "sqz/maskgen/params.hpp"
#include "sqz/noise/noise.hpp"
#include "sqz/optics/mode.hpp"
#include "sqz/optics/slm.hpp"

namespace sqz::bench {

using maskgen::MaskParams;
using maskgen::ParamSpace;

/// Optical path of the LO: input plane, left panel, hop, right panel, hop
/// to the homodyne beamsplitter.
struct OpticsLayout {
  optics::Grid grid{512, 512, 8e-6};
  double wavelength = optics::kDefaultWavelength;
  optics::Footprint left;
  optics::Footprint right;
  double inter_reflection_distance = 0.15;  ///< metres
  double distance_to_beamsplitter = 0.3;    ///< metres, right panel to BS
  optics::Sampling sampling = optics::Sampling::exact_pitch;
};

/// The squeezed-light mode at the beamsplitter plane. Its wavefront carries
/// an aberration screen given as Zernike coefficients (gray levels) over the
/// right-panel-equivalent aperture. The nominal LO is the mode the LO would
/// have at the beamsplitter with a flat SLM.
struct HiddenTruth {
  optics::ModeSpec squeezed_mode;
  std::vector<maskgen::ZernikeTerm> aberration;
  optics::ModeSpec nominal_lo;

  /// "default": astigmatism, coma and trefoil with compensating tilt and
  /// defocus (initial overlap about 0.90, 0.91 after realignment), plus a
  /// 2 % HG10 admixture in quadrature.
  /// "matched": flat wavefront, pure Gaussian (overlap 1 at zero mask).
  static HiddenTruth preset(const std::string& name);
};

struct BenchConfig {
  maskgen::PanelGeometry geometry;
  ParamSpace space;
  OpticsLayout layout;
  HiddenTruth truth = HiddenTruth::preset("default");
  double pump_w = 0.585;
  noise::NoiseParams noise_fixed{8.76, 0.04, 0.009};  ///< loss here is L_fixed
  double meas_sigma = 0.07;                            ///< dB, on the difference
  double clearance_db = 28.0;                          ///< inf for no circuit noise
  double shot_ref_dbm = -50.0;                         ///< shot level at nominal LO power
  double lo_power_scale = 1.0;                         ///< LO power relative to nominal
  std::uint64_t rng_seed = 1;
  bool realign = true;

  /// ConfigError on invalid values.
  void validate() const;
};

struct Measurement {
  double shot_dbm;
  double sqz_dbm;
  double squeezing_db;
  double lo_power_at_detector;  ///< fraction of nominal
  std::uint64_t timestamp;
};

/// What an optimizer may see: beta in, measurement out.
class Objective {
 public:
  virtual ~Objective() = default;
  virtual const ParamSpace& space() const = 0;
  virtual Measurement measure(const MaskParams& beta) = 0;
};

/// The virtual experiment. Owns the accumulated starting mask, the LO
/// alignment state and the measurement RNG stream.
class Bench : public Objective {
 public:
  explicit Bench(const BenchConfig& cfg);
  ~Bench() override;
  Bench(Bench&&) noexcept;
  Bench& operator=(Bench&&) noexcept;

  const ParamSpace& space() const override { return cfg_.space; }
  const BenchConfig& config() const { return cfg_; }

  /// Shutter-closed and shutter-open traces for the mask composed from beta
  /// on the current starting mask. ContractError if beta is out of bounds.
  Measurement measure(const MaskParams& beta) override;
  /// Same, drawing trace noise from `rng` instead of the bench stream.
  Measurement measure_with(const MaskParams& beta, Rng& rng);

  /// Step 5: fold the best parameters into the starting mask.
  void accumulate(const MaskParams& best);
  const maskgen::StartingMask& start() const { return start_; }
  void set_start(const maskgen::StartingMask& start);

  /// Step 4: remove the weighted best-fit tilt/defocus between LO and the
  /// squeezed mode at the beamsplitter (kept only if the overlap improves).
  /// Returns the overlap after realignment.
  double realign();

  /// Noise-vs-LO-phase trace R'_- cos^2 phi + R'_+ sin^2 phi for beta.
  std::vector<double> scan_phase(const MaskParams& beta, const std::vector<double>& phases);

  /// Ground-truth overlap of the last measurement. Debug only: never fed to
  /// an optimizer.
  double last_debug_eta() const { return last_eta_; }
  /// Ground-truth overlap for beta without a measurement. Debug only.
  double debug_eta(const MaskParams& beta);

  Rng& rng() { return rng_; }
  std::uint64_t timestamp() const { return clock_; }
  /// Restore the measurement clock (checkpoint resume).
  void set_timestamp(std::uint64_t t) { clock_ = t; }

  /// Mode at the beamsplitter for beta (LO after both reflections).
  optics::ComplexField lo_at_beamsplitter(const MaskParams& beta);

 private:
  struct Impl;
  BenchConfig cfg_;
  maskgen::StartingMask start_;
  Rng rng_;
  std::uint64_t clock_ = 0;
  double last_eta_ = std::numeric_limits<double>::quiet_NaN();
  std::unique_ptr<Impl> impl_;
};

/// Overlap -> measurement without optics: the noise model, the differential
/// protocol, circuit noise and trace noise. Exposed for testing.
Measurement measurement_from_eta(const BenchConfig& cfg, double eta, double lo_fraction, Rng& rng,
                                 std::uint64_t timestamp);

/// One-shot convenience wrapper: a fresh bench on `start`.
Measurement evaluate_objective(const MaskParams& beta, const maskgen::StartingMask& start,
                               const BenchConfig& cfg, Rng& rng);

/// Right-panel-equivalent aberration phase (radians) on the bench grid.
std::vector<double> aberration_phase(const BenchConfig& cfg);

}  // namespace sqz::bench
