#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace sqz {

/// Seeded random stream with a portable output sequence.
///
/// The standard distributions are implementation-defined, so uniform and
/// normal draws are derived directly from the 64-bit engine output. The full
/// engine state can be saved and restored as text for checkpoints.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller (two uniforms per draw, no cached state).
  double normal();

  std::uint64_t next_u64() { return engine_(); }

  /// Derive an independent child seed; used to split streams per component.
  std::uint64_t split() { return engine_() ^ 0x9e3779b97f4a7c15ULL; }

  std::string save_state() const;
  void load_state(const std::string& state);

 private:
  std::mt19937_64 engine_;
};

}  // namespace sqz
