#include "sqz/bench/bench.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "sqz/common/error.hpp"
#include "sqz/maskgen/zernike.hpp"

namespace sqz::bench {

using maskgen::Panel;
using maskgen::ZernikeIndex;
using maskgen::ZernikeTerm;
using optics::cplx;

HiddenTruth HiddenTruth::preset(const std::string& name) {
  HiddenTruth t;
  t.nominal_lo = optics::ModeSpec::gaussian(1.2e-3);
  if (name == "matched") {
    t.squeezed_mode = optics::ModeSpec::gaussian(1.2e-3);
    return t;
  }
  if (name != "default") throw ConfigError("unknown hidden-truth preset '" + name + "'");
  t.squeezed_mode.kind = optics::ModeSpec::Kind::superposition;
  t.squeezed_mode.components = {
      {optics::ModeSpec::gaussian(1.2e-3), std::sqrt(0.98)},
      {optics::ModeSpec::hermite_gaussian(1, 0, 1.2e-3), cplx(0.0, std::sqrt(0.02))},
  };
  // Astigmatism, coma and trefoil; the tilt and defocus terms cancel their
  // beam-weighted tilt/defocus content so realignment alone cannot fix it.
  t.aberration = {
      {{2, -2}, -800.0}, {{2, 2}, 1000.0}, {{3, -1}, -400.0}, {{3, 1}, 450.0}, {{3, -3}, 400.0},
      {{3, 3}, 500.0},   {{1, -1}, -727.44}, {{1, 1}, 770.94}, {{2, 0}, -109.6},
  };
  return t;
}

void BenchConfig::validate() const {
  geometry.validate();
  noise_fixed.validate();
  if (!(meas_sigma >= 0.0)) throw ConfigError("meas_sigma must be >= 0");
  if (!(pump_w >= 0.0)) throw ConfigError("pump power must be >= 0");
  if (!(clearance_db > 0.0)) throw ConfigError("clearance must be positive (or infinite)");
  if (!(lo_power_scale > 0.0) || !std::isfinite(lo_power_scale))
    throw ConfigError("LO power scale must be positive");
  if (!std::isfinite(shot_ref_dbm)) throw ConfigError("shot reference must be finite");
  if (layout.inter_reflection_distance < 0 || layout.distance_to_beamsplitter < 0)
    throw ConfigError("optical distances must be >= 0");
  if (layout.grid.nx < 2 || layout.grid.ny < 2 || !(layout.grid.pitch > 0))
    throw ConfigError("simulation grid must be at least 2x2 with positive pitch");
  for (const auto& t : truth.aberration)
    if (!maskgen::is_valid_zernike(t.index.n, t.index.m))
      throw ConfigError("invalid aberration Zernike index " + maskgen::to_string(t.index));
}

namespace {

// One half-panel seen through the grid: distinct SLM pixels, the sampler
// over them and the per-sample index back into that set.
struct PanelPath {
  std::vector<int> col_index;  // per grid column -> distinct column slot
  std::vector<int> row_index;  // per grid row -> distinct row slot
  std::size_t ncols = 0;
  std::unique_ptr<maskgen::PanelSampler> sampler;
  std::vector<double> start;
  std::vector<std::uint16_t> distinct_levels;
  std::vector<std::uint16_t> levels;

  PanelPath(const BenchConfig& cfg, Panel panel) {
    const auto& fp = panel == Panel::left ? cfg.layout.left : cfg.layout.right;
    const auto lk = optics::make_lookup(cfg.geometry, panel, fp, cfg.layout.grid, cfg.layout.sampling);
    auto distinct = [](const std::vector<int>& v, std::vector<int>& index) {
      std::vector<int> u = v;
      std::sort(u.begin(), u.end());
      u.erase(std::unique(u.begin(), u.end()), u.end());
      index.resize(v.size());
      for (std::size_t i = 0; i < v.size(); ++i)
        index[i] = static_cast<int>(std::lower_bound(u.begin(), u.end(), v[i]) - u.begin());
      return u;
    };
    const auto ucols = distinct(lk.cols, col_index);
    const auto urows = distinct(lk.rows, row_index);
    ncols = ucols.size();
    std::vector<maskgen::PanelSampler::Pixel> px;
    px.reserve(urows.size() * ucols.size());
    for (int r : urows)
      for (int c : ucols) px.push_back({r, c});
    sampler = std::make_unique<maskgen::PanelSampler>(cfg.geometry, panel, px, cfg.space.keys);
    start.assign(px.size(), 0.0);
    distinct_levels.assign(px.size(), 0);
    levels.assign(cfg.layout.grid.size(), 0);
  }

  void load_start(const maskgen::StartingMask& s) {
    const auto px = sampler->pixels();
    for (std::size_t p = 0; p < px.size(); ++p) start[p] = s.at(px[p].i, px[p].j);
  }

  const std::vector<std::uint16_t>& compose(const maskgen::PanelParams& params) {
    sampler->compose(params, start, distinct_levels);
    const std::size_t nx = col_index.size(), ny = row_index.size();
    for (std::size_t b = 0; b < ny; ++b) {
      const std::uint16_t* src = distinct_levels.data() + row_index[b] * ncols;
      std::uint16_t* dst = levels.data() + b * nx;
      for (std::size_t a = 0; a < nx; ++a) dst[a] = src[col_index[a]];
    }
    return levels;
  }
};

}  // namespace

struct Bench::Impl {
  PanelPath left;
  PanelPath right;
  optics::Propagator hop;
  optics::Propagator to_bs;
  std::vector<cplx> phasors;
  optics::ComplexField lo_in;
  optics::ComplexField squeezed;
  std::vector<cplx> alignment;  // multiplier at the beamsplitter; empty = none
  double nominal_power;

  explicit Impl(const BenchConfig& cfg)
      : left(cfg, Panel::left),
        right(cfg, Panel::right),
        hop(cfg.layout.grid, cfg.layout.wavelength, cfg.layout.inter_reflection_distance),
        to_bs(cfg.layout.grid, cfg.layout.wavelength, cfg.layout.distance_to_beamsplitter),
        phasors(optics::phasor_table(cfg.geometry.bit_depth)),
        lo_in(cfg.layout.grid, cfg.layout.wavelength),
        squeezed(cfg.layout.grid, cfg.layout.wavelength) {
    const auto& L = cfg.layout;
    // Nominal LO waist sits at the beamsplitter; walk it back to the input.
    lo_in = optics::propagate(optics::synthesize_mode(cfg.truth.nominal_lo, L.grid, L.wavelength),
                              -(L.inter_reflection_distance + L.distance_to_beamsplitter));
    nominal_power = lo_in.power();
    squeezed = optics::synthesize_mode(cfg.truth.squeezed_mode, L.grid, L.wavelength);
    const auto screen = aberration_phase(cfg);
    for (std::size_t i = 0; i < screen.size(); ++i) squeezed.samples[i] *= std::polar(1.0, screen[i]);
  }

  optics::ComplexField propagate_lo(const MaskParams& beta) {
    optics::ComplexField f = lo_in;
    optics::apply_levels(f, left.compose(beta.left), phasors);
    hop.apply_in_place(f);
    optics::apply_levels(f, right.compose(beta.right), phasors);
    to_bs.apply_in_place(f);
    if (!alignment.empty())
      for (std::size_t i = 0; i < f.samples.size(); ++i) f.samples[i] *= alignment[i];
    return f;
  }
};

Bench::Bench(const BenchConfig& cfg)
    : cfg_(cfg), start_(cfg.geometry), rng_(cfg.rng_seed) {
  cfg_.validate();
  impl_ = std::make_unique<Impl>(cfg_);
}

Bench::~Bench() = default;
Bench::Bench(Bench&&) noexcept = default;
Bench& Bench::operator=(Bench&&) noexcept = default;

void Bench::set_start(const maskgen::StartingMask& start) {
  require(start.geometry == cfg_.geometry, "set_start: geometry mismatch");
  start_ = start;
  impl_->left.load_start(start_);
  impl_->right.load_start(start_);
}

void Bench::accumulate(const MaskParams& best) {
  best.check(cfg_.space);
  set_start(maskgen::accumulate_start(start_, best));
}

optics::ComplexField Bench::lo_at_beamsplitter(const MaskParams& beta) {
  beta.check(cfg_.space);
  return impl_->propagate_lo(beta);
}

double Bench::debug_eta(const MaskParams& beta) {
  return optics::overlap_efficiency(lo_at_beamsplitter(beta), impl_->squeezed);
}

Measurement Bench::measure(const MaskParams& beta) { return measure_with(beta, rng_); }

Measurement Bench::measure_with(const MaskParams& beta, Rng& rng) {
  const auto lo = lo_at_beamsplitter(beta);
  last_eta_ = optics::overlap_efficiency(lo, impl_->squeezed);
  const double frac = cfg_.lo_power_scale * lo.power() / impl_->nominal_power;
  return measurement_from_eta(cfg_, last_eta_, frac, rng, ++clock_);
}

double Bench::realign() {
  const auto zero = MaskParams::zeros(cfg_.space);
  const auto lo = impl_->propagate_lo(zero);
  const auto& s = impl_->squeezed;
  const double before = optics::overlap_efficiency(lo, s);
  const auto& g = lo.grid;

  // Residual phase arg(S conj(LO)) about its mean, weighted by |S||LO|.
  cplx mean = 0.0;
  for (std::size_t i = 0; i < lo.samples.size(); ++i) mean += s.samples[i] * std::conj(lo.samples[i]);
  const cplx unit = mean / std::abs(mean);
  Eigen::Matrix4d A = Eigen::Matrix4d::Zero();
  Eigen::Vector4d rhs = Eigen::Vector4d::Zero();
  for (int b = 0; b < g.ny; ++b)
    for (int a = 0; a < g.nx; ++a) {
      const std::size_t i = static_cast<std::size_t>(b) * g.nx + a;
      const cplx z = s.samples[i] * std::conj(lo.samples[i]) * std::conj(unit);
      const double w = std::abs(z);
      if (w == 0.0) continue;
      const double x = g.x(a), y = g.y(b);
      const Eigen::Vector4d f(1.0, x, y, x * x + y * y);
      A += w * f * f.transpose();
      rhs += w * std::arg(z) * f;
    }
  const Eigen::Vector4d c = A.ldlt().solve(rhs);
  if (!c.allFinite()) return before;

  std::vector<cplx> next(lo.samples.size());
  for (int b = 0; b < g.ny; ++b)
    for (int a = 0; a < g.nx; ++a) {
      const std::size_t i = static_cast<std::size_t>(b) * g.nx + a;
      const double x = g.x(a), y = g.y(b);
      const cplx old = impl_->alignment.empty() ? cplx(1.0) : impl_->alignment[i];
      next[i] = old * std::polar(1.0, c[1] * x + c[2] * y + c[3] * (x * x + y * y));
    }
  auto saved = std::move(impl_->alignment);
  impl_->alignment = std::move(next);
  const double after = optics::overlap_efficiency(impl_->propagate_lo(zero), s);
  if (after <= before) {
    impl_->alignment = std::move(saved);
    return before;
  }
  return after;
}

std::vector<double> Bench::scan_phase(const MaskParams& beta, const std::vector<double>& phases) {
  const double eta = debug_eta(beta);
  auto p = cfg_.noise_fixed;
  p.loss = noise::effective_loss(cfg_.noise_fixed.loss, eta);
  const auto lv = noise::observed_levels(p, cfg_.pump_w);
  std::vector<double> out;
  out.reserve(phases.size());
  for (double phi : phases) {
    const double c = std::cos(phi), s = std::sin(phi);
    out.push_back(lv.minus * c * c + lv.plus * s * s);
  }
  return out;
}

Measurement measurement_from_eta(const BenchConfig& cfg, double eta, double lo_fraction, Rng& rng,
                                 std::uint64_t timestamp) {
  auto p = cfg.noise_fixed;
  p.loss = noise::effective_loss(cfg.noise_fixed.loss, std::clamp(eta, 0.0, 1.0));
  // full loss is the vacuum; keep the logit-free path inside [0, 1)
  p.loss = std::min(p.loss, 1.0 - 1e-15);
  const auto lv = noise::observed_levels(p, cfg.pump_w);
  const double shot = noise::from_db(cfg.shot_ref_dbm) * lo_fraction;
  const double circ =
      std::isinf(cfg.clearance_db) ? 0.0 : noise::from_db(cfg.shot_ref_dbm - cfg.clearance_db);
  // Both draws are always taken so the stream does not depend on sigma.
  const double n_shot = rng.normal();
  const double n_sqz = rng.normal();
  const double s = cfg.meas_sigma / std::sqrt(2.0);
  Measurement m;
  m.shot_dbm = noise::to_db(shot + circ) + s * n_shot;
  m.sqz_dbm = noise::to_db(shot * lv.minus + circ) + s * n_sqz;
  m.squeezing_db = m.shot_dbm - m.sqz_dbm;
  m.lo_power_at_detector = lo_fraction;
  m.timestamp = timestamp;
  return m;
}

Measurement evaluate_objective(const MaskParams& beta, const maskgen::StartingMask& start,
                               const BenchConfig& cfg, Rng& rng) {
  Bench b(cfg);
  b.set_start(start);
  return b.measure_with(beta, rng);
}

std::vector<double> aberration_phase(const BenchConfig& cfg) {
  const auto& g = cfg.layout.grid;
  const auto& geo = cfg.geometry;
  std::vector<double> out(g.size(), 0.0);
  if (cfg.truth.aberration.empty()) return out;
  std::vector<ZernikeIndex> keys;
  for (const auto& t : cfg.truth.aberration) keys.push_back(t.index);
  const maskgen::ZernikeBasis basis(keys);
  std::vector<double> z(keys.size());
  const int wh = geo.half_width();
  const double cx = (wh + 1) / 2.0 + cfg.layout.right.offset_x_px;
  const double cy = (geo.height_px + 1) / 2.0 + cfg.layout.right.offset_y_px;
  const double to_rad = 2.0 * std::numbers::pi / geo.levels();
  for (int b = 0; b < g.ny; ++b) {
    const double row = cy + g.y(b) / geo.pixel_pitch;
    const double eta = 2.0 * (row - 1.0) / (geo.height_px - 1) - 1.0;
    for (int a = 0; a < g.nx; ++a) {
      const double col = cx + g.x(a) / geo.pixel_pitch;
      const double xi = 2.0 * (col - 1.0) / (wh - 1) - 1.0;
      basis.eval(xi, eta, z);
      double phi = 0.0;
      for (std::size_t t = 0; t < keys.size(); ++t) phi += cfg.truth.aberration[t].coeff * z[t];
      out[static_cast<std::size_t>(b) * g.nx + a] = to_rad * phi;
    }
  }
  return out;
}

}  // namespace sqz::bench
