#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "sqz/common/error.hpp"
#include "sqz/common/rng.hpp"
#include "sqz/fitting/fitting.hpp"

using namespace sqz;
using namespace sqz::fitting;

namespace {

const NoiseParams kFig5{8.76, 0.044, 0.009};

// Independent model evaluation.
std::pair<double, double> oracle(double a, double l, double t, double p) {
  const double g = 2 * std::sqrt(a * p);
  const double rm = l + (1 - l) * std::exp(-g), rp = l + (1 - l) * std::exp(g);
  const double c = std::cos(t) * std::cos(t), s = std::sin(t) * std::sin(t);
  return {-10 * std::log10(rm * c + rp * s), 10 * std::log10(rp * c + rm * s)};
}

SqueezeDataset synth(const NoiseParams& p, const std::vector<double>& pumps, double sigma,
                     Rng* rng, bool anti = true) {
  SqueezeDataset d;
  for (double pw : pumps) {
    auto [s, a] = oracle(p.alpha, p.loss, p.theta, pw);
    if (rng) {
      s += sigma * rng->normal();
      a += sigma * rng->normal();
    }
    SqueezeRow r{pw, s, std::nullopt, sigma};
    if (anti) r.antisqueeze_db = a;
    d.rows.push_back(r);
  }
  return d;
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

std::filesystem::path tmp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("sqz_test_" + name);
}

NoiseParams shuffled_fit_params(SqueezeDataset d, Rng& rng) {
  for (std::size_t i = d.rows.size(); i > 1; --i)
    std::swap(d.rows[i - 1], d.rows[rng.next_u64() % i]);
  return fit(d).params;
}

}  // namespace

TEST_CASE("model_predict") {
  auto z = model_predict(kFig5, 0.0);
  CHECK(z.squeeze_db == doctest::Approx(0.0));
  CHECK(z.antisqueeze_db == doctest::Approx(0.0));
  auto m = model_predict(kFig5, 0.585);
  auto [s, a] = oracle(8.76, 0.044, 0.009, 0.585);
  CHECK(m.squeeze_db == doctest::Approx(s).epsilon(1e-12));
  CHECK(m.antisqueeze_db == doctest::Approx(a).epsilon(1e-12));
  CHECK(m.squeeze_db == doctest::Approx(12.11).epsilon(1e-3));
  CHECK(m.antisqueeze_db == doctest::Approx(19.47).epsilon(1e-3));
  // pure state: both equal (20/ln 10) sqrt(alpha P)
  auto pure = model_predict({8.76, 0.0, 0.0}, 0.3);
  const double expect = 20 / std::numbers::ln10 * std::sqrt(8.76 * 0.3);
  CHECK(pure.squeeze_db == doctest::Approx(expect).epsilon(1e-12));
  CHECK(pure.antisqueeze_db == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("analytic jacobian matches central differences") {
  Rng rng(11);
  for (int k = 0; k < 40; ++k) {
    NoiseParams p{rng.uniform(0.5, 50), rng.uniform(0.01, 0.4), rng.uniform(1e-3, 0.1)};
    const double pw = rng.uniform(0.05, 1.0);
    const auto j = model_jacobian(p, pw);
    double* fields[3] = {&p.alpha, &p.loss, &p.theta};
    for (int c = 0; c < 3; ++c) {
      // five-point central stencil
      const double x0 = *fields[c], h = 1e-3 * x0;
      auto at = [&](double x) {
        *fields[c] = x;
        return model_predict(p, pw);
      };
      const auto p2 = at(x0 + 2 * h), p1 = at(x0 + h), m1 = at(x0 - h), m2 = at(x0 - 2 * h);
      *fields[c] = x0;
      const double fs =
          (-p2.squeeze_db + 8 * p1.squeeze_db - 8 * m1.squeeze_db + m2.squeeze_db) / (12 * h);
      const double fa = (-p2.antisqueeze_db + 8 * p1.antisqueeze_db - 8 * m1.antisqueeze_db +
                         m2.antisqueeze_db) / (12 * h);
      CHECK(std::abs(j[0][c] - fs) <= 1e-6 * std::max(std::abs(fs), 1e-3));
      CHECK(std::abs(j[1][c] - fa) <= 1e-6 * std::max(std::abs(fa), 1e-3));
    }
  }
}

TEST_CASE("noiseless round trip at the fitted point") {
  auto d = synth(kFig5, default_pump_grid(8), 0.2, nullptr);
  auto r = fit(d);
  CHECK(r.converged);
  CHECK(rel(r.params.alpha, 8.76) < 1e-6);
  CHECK(rel(r.params.loss, 0.044) < 1e-6);
  CHECK(rel(r.params.theta, 0.009) < 1e-6);
  CHECK(r.residual_norm < 1e-6);
}

TEST_CASE("noiseless round trip over random parameters") {
  Rng rng(2024);
  int failures = 0;
  for (int k = 0; k < 60; ++k) {
    NoiseParams truth{rng.uniform(0.5, 100), rng.uniform(0.005, 0.5), rng.uniform(5e-4, 0.2)};
    auto r = fit(synth(truth, default_pump_grid(8), 0.2, nullptr));
    const bool ok = r.converged && rel(r.params.alpha, truth.alpha) < 1e-6 &&
                    rel(r.params.loss, truth.loss) < 1e-6 && rel(r.params.theta, truth.theta) < 1e-6;
    if (!ok) {
      ++failures;
      MESSAGE("truth " << truth.alpha << ' ' << truth.loss << ' ' << truth.theta << " got "
                       << r.params.alpha << ' ' << r.params.loss << ' ' << r.params.theta << ' '
                       << r.diagnostics);
    }
  }
  CHECK(failures == 0);
}

TEST_CASE("noisy fits are unbiased and theta error is about a milliradian") {
  Rng rng(7);
  const int reps = 100;
  double mean[3] = {0, 0, 0}, sq[3] = {0, 0, 0}, se_theta = 0;
  for (int k = 0; k < reps; ++k) {
    auto r = fit(synth(kFig5, default_pump_grid(8), 0.2, &rng));
    REQUIRE(r.converged);
    const double v[3] = {r.params.alpha, r.params.loss, r.params.theta};
    for (int c = 0; c < 3; ++c) mean[c] += v[c] / reps, sq[c] += v[c] * v[c] / reps;
    se_theta += r.stderr_[2] / reps;
  }
  const double truth[3] = {8.76, 0.044, 0.009};
  for (int c = 0; c < 3; ++c) {
    const double sd = std::sqrt(std::max(0.0, sq[c] - mean[c] * mean[c]));
    MESSAGE("param " << c << " mean " << mean[c] << " sd " << sd);
    CHECK(std::abs(mean[c] - truth[c]) <= 2 * sd / std::sqrt(double(reps)));
  }
  MESSAGE("mean theta stderr " << se_theta);
  CHECK(se_theta > 0.3e-3);
  CHECK(se_theta < 3e-3);
}

TEST_CASE("without anti-squeezing, loss and phase noise are strongly correlated") {
  Rng rng(3);
  auto d = synth(kFig5, default_pump_grid(8), 0.2, &rng, false);
  auto r = fit(d);
  MESSAGE("corr(L, theta) = " << r.correlation[1][2]);
  CHECK(std::abs(r.correlation[1][2]) > 0.9);
  auto full = fit(synth(kFig5, default_pump_grid(8), 0.2, &rng, true));
  CHECK(std::abs(full.correlation[1][2]) < std::abs(r.correlation[1][2]));
  // covariance is symmetric PSD and stderr is sqrt of its diagonal
  for (int i = 0; i < 3; ++i) {
    CHECK(full.stderr_[i] == doctest::Approx(std::sqrt(full.covariance[i][i])));
    for (int j = 0; j < 3; ++j) CHECK(full.covariance[i][j] == full.covariance[j][i]);
  }
  CHECK(full.covariance[0][0] * full.covariance[1][1] >= full.covariance[0][1] * full.covariance[0][1]);
}

TEST_CASE("fit is invariant to row order") {
  Rng rng(5);
  auto d = synth(kFig5, default_pump_grid(10), 0.2, &rng);
  d.rows.push_back(d.rows[3]);  // duplicate pump power
  d.rows.back().squeeze_db += 0.1;
  const auto ref = fit(d).params;
  for (int k = 0; k < 5; ++k) {
    const auto p = shuffled_fit_params(d, rng);
    CHECK(rel(p.alpha, ref.alpha) < 1e-8);
    CHECK(rel(p.loss, ref.loss) < 1e-8);
    CHECK(rel(p.theta, ref.theta) < 1e-8);
  }
}

TEST_CASE("fitted squeezing curve is unimodal in pump power") {
  Rng rng(9);
  const auto p = fit(synth(kFig5, default_pump_grid(8), 0.2, &rng)).params;
  REQUIRE(p.theta > 0);
  int sign_changes = 0;
  double prev = model_predict(p, 1e-3).squeeze_db, prev_d = 1;
  for (int i = 2; i <= 20000; ++i) {
    const double v = model_predict(p, 1e-3 * i).squeeze_db;
    const double dv = v - prev;
    prev = v;
    if (std::abs(dv) < 1e-12) continue;
    if ((dv > 0) != (prev_d > 0)) ++sign_changes;
    prev_d = dv;
  }
  CHECK(sign_changes == 1);
  const auto best = noise::best_squeezing(p);
  CHECK(best.pump_w > 0.05);
  CHECK(best.pump_w < 10.0);
}

TEST_CASE("validation and initial-guess bounds") {
  auto d = synth(kFig5, {0.1, 0.2}, 0.2, nullptr);
  CHECK_THROWS_AS(fit(d), ConfigError);
  d = synth(kFig5, default_pump_grid(4), 0.2, nullptr);
  d.rows[0].sigma_db = 0;
  CHECK_THROWS_AS(fit(d), ConfigError);
  d = synth(kFig5, default_pump_grid(4), 0.2, nullptr);
  d.rows[1].pump_w = -1;
  CHECK_THROWS_AS(fit(d), ConfigError);
  d = synth(kFig5, default_pump_grid(4), 0.2, nullptr);
  CHECK_THROWS_AS(fit(d, NoiseParams{8.76, 0.6, 0.009}), ContractError);
  CHECK_THROWS_AS(fit(d, NoiseParams{200, 0.04, 0.009}), ContractError);
  auto ok = fit(d, NoiseParams{5, 0.1, 0.0});
  CHECK(ok.converged);
  CHECK(in_fit_bounds(initial_guess(d)));
}

TEST_CASE("circuit-noise correction before fitting") {
  auto clean = synth(kFig5, default_pump_grid(8), 0.2, nullptr);
  auto raw = clean;
  raw.clearance_db = 28.0;
  // shot trace at 0 dBm, floor 28 dB below it
  const double circ = std::pow(10.0, -2.8);
  for (auto& r : raw.rows) {
    const double rm = std::pow(10, -r.squeeze_db / 10), rp = std::pow(10, *r.antisqueeze_db / 10);
    r.squeeze_db = -10 * std::log10((1 - circ) * rm + circ);
    r.antisqueeze_db = 10 * std::log10((1 - circ) * rp + circ);
    r.corrected = false;
  }
  auto fr = fit(raw);
  CHECK(rel(fr.params.loss, 0.044) < 1e-6);
  CHECK(rel(fr.params.theta, 0.009) < 1e-6);
  raw.clearance_db.reset();
  CHECK_THROWS_AS(fit(raw), ConfigError);
}

TEST_CASE("dataset csv round trip and result json") {
  Rng rng(1);
  auto d = synth(kFig5, default_pump_grid(8), 0.2, &rng);
  d.rows[2].antisqueeze_db.reset();
  const auto path = tmp_path("dataset.csv");
  write_dataset_csv(d, path);
  auto back = read_dataset_csv(path);
  REQUIRE(back.rows.size() == d.rows.size());
  for (std::size_t i = 0; i < d.rows.size(); ++i) {
    CHECK(back.rows[i].pump_w == d.rows[i].pump_w);
    CHECK(back.rows[i].squeeze_db == d.rows[i].squeeze_db);
    CHECK(back.rows[i].antisqueeze_db == d.rows[i].antisqueeze_db);
  }
  auto j = to_json(fit(back));
  CHECK(j["lab_units"]["alpha_pct_per_w"].get<double>() ==
        doctest::Approx(100 * j["si"]["alpha_per_w"].get<double>()));
  CHECK(j["lab_units"]["theta_mrad"].get<double>() == doctest::Approx(9.0).epsilon(0.3));

  {
    std::ofstream os(path);
    os << "pump,sq\n0.1,3\n";
  }
  CHECK_THROWS_AS(read_dataset_csv(path), ConfigError);
  {
    std::ofstream os(path);
    os << "pump_w,squeeze_db,antisqueeze_db,sigma_db\n0.1,abc,,\n";
  }
  CHECK_THROWS_AS(read_dataset_csv(path), ConfigError);
  {
    std::ofstream os(path);
    os << "pump_w,squeeze_db,antisqueeze_db,sigma_db,corrected\n0.1,3,4,,0\n";
  }
  auto flagged = read_dataset_csv(path);
  CHECK_FALSE(flagged.rows[0].corrected);
  CHECK(flagged.rows[0].sigma_db == 0.2);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(read_dataset_csv(path), IoError);
}

TEST_CASE("scenario comparison") {
  const NoiseParams prior{8.76, 0.08, 0.009};
  auto same = compare_scenarios(kFig5, kFig5, default_pump_grid(8));
  for (const auto& r : same.rows) {
    CHECK(r.a.squeeze_db == r.b.squeeze_db);
    CHECK(r.a.antisqueeze_db == r.b.antisqueeze_db);
  }
  auto t = compare_scenarios(kFig5, prior, default_pump_grid(8));
  CHECK(t.best_a.squeezing_db == doctest::Approx(12.132).epsilon(1e-4));
  CHECK(t.best_b.squeezing_db == doctest::Approx(10.152).epsilon(1e-4));
  // lossless, noiseless reference keeps growing
  auto ideal = compare_scenarios({8.76, 0.0, 0.0}, prior, {0.1, 0.5, 1.0, 2.0});
  for (std::size_t i = 1; i < ideal.rows.size(); ++i)
    CHECK(ideal.rows[i].a.squeeze_db > ideal.rows[i - 1].a.squeeze_db);
}
