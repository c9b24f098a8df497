#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "quadrature.hpp"
#include "sqz/common/error.hpp"
#include "sqz/common/rng.hpp"
#include "sqz/maskgen/mask.hpp"
#include "sqz/maskgen/mask_io.hpp"

using namespace sqz;
using namespace sqz::maskgen;

namespace {

const PanelGeometry kSmall{24, 40, 10, 8e-6};

MaskParams random_params(const ParamSpace& space, Rng& rng, double scale = 1.0) {
  std::vector<double> flat;
  for (const auto& b : space.bounds()) flat.push_back(scale * rng.uniform(b.lo, b.hi));
  // theta must stay in its box even when scaled
  auto p = MaskParams::unflatten(space, flat);
  p.left.theta_lens = std::abs(p.left.theta_lens);
  p.right.theta_lens = std::abs(p.right.theta_lens);
  return p;
}

std::filesystem::path tmp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("sqz_test_" + name);
}

}  // namespace

TEST_CASE("normalized coordinates") {
  const PanelGeometry g;
  auto c = normalized_coords(1, 1, g);
  CHECK(c.xi == -1.0);
  CHECK(c.eta == -1.0);
  CHECK(c.panel == Panel::left);

  c = normalized_coords(g.height_px, g.width_px, g);
  CHECK(c.xi == 1.0);
  CHECK(c.eta == 1.0);
  CHECK(c.panel == Panel::right);

  const PanelGeometry odd{5, 8, 10, 8e-6};
  c = normalized_coords(3, odd.half_width(), odd);
  CHECK(c.xi == 1.0);
  CHECK(c.eta == 0.0);
  CHECK(c.panel == Panel::left);

  c = normalized_coords(1, g.half_width() + 1, g);
  CHECK(c.xi == -1.0);
  CHECK(c.panel == Panel::right);

  CHECK_THROWS_AS(normalized_coords(0, 1, g), ContractError);
  CHECK_THROWS_AS(normalized_coords(1, g.width_px + 1, g), ContractError);
}

TEST_CASE("centered lens coordinates") {
  const PanelGeometry g;
  auto c = centered_coords(1, 1, g);
  CHECK(c.xc == -479.5);
  CHECK(c.yc == -599.5);
  c = centered_coords(g.height_px, g.width_px, g);
  CHECK(c.xc == 479.5);
  CHECK(c.yc == 599.5);
  CHECK(centered_coords(7, g.half_width() + 3, g).xc == centered_coords(7, 3, g).xc);
}

TEST_CASE("Zernike evaluation") {
  CHECK(zernike(1, 1, 1.0, 0.0) == doctest::Approx(1.0));
  CHECK(zernike(2, 0, 0.0, 1.234) == doctest::Approx(-1.0));
  CHECK(zernike(5, 5, 0.7, std::numbers::pi / 3) ==
        doctest::Approx(std::pow(0.7, 5) * std::cos(5 * std::numbers::pi / 3)).epsilon(1e-14));
  CHECK(zernike(2, -2, 1.0, std::numbers::pi / 4) == doctest::Approx(1.0));
  CHECK_THROWS_AS(zernike(2, 1, 0.5, 0.0), ConfigError);
  CHECK_THROWS_AS(zernike(1, 3, 0.5, 0.0), ConfigError);
}

TEST_CASE("radial polynomials match hand-expanded forms, including rho > 1") {
  for (double r : {0.0, 0.3, 0.77, 1.0, 1.4}) {
    CAPTURE(r);
    const double r2 = r * r, r3 = r2 * r, r4 = r2 * r2, r5 = r4 * r;
    CHECK(zernike_radial(1, 1, r) == doctest::Approx(r));
    CHECK(zernike_radial(2, 0, r) == doctest::Approx(2 * r2 - 1));
    CHECK(zernike_radial(2, 2, r) == doctest::Approx(r2));
    CHECK(zernike_radial(3, 1, r) == doctest::Approx(3 * r3 - 2 * r));
    CHECK(zernike_radial(3, -3, r) == doctest::Approx(r3));
    CHECK(zernike_radial(4, 0, r) == doctest::Approx(6 * r4 - 6 * r2 + 1));
    CHECK(zernike_radial(4, 2, r) == doctest::Approx(4 * r4 - 3 * r2));
    CHECK(zernike_radial(5, 1, r) == doctest::Approx(10 * r5 - 12 * r3 + 3 * r));
    CHECK(zernike_radial(5, -3, r) == doctest::Approx(5 * r5 - 4 * r3));
  }
}

TEST_CASE("Zernike orthogonality over the unit disk") {
  // 512 x 512 polar product rule; the Gauss-Legendre radial rule is exact for
  // these polynomial integrands and the trapezoid rule for the harmonics.
  const auto keys = zernike_upto(5);
  const auto gl = testing::gauss_legendre(512, 0.0, 1.0);
  const int n_phi = 512;
  const double dphi = 2.0 * std::numbers::pi / n_phi;
  std::vector<std::vector<double>> table(keys.size());
  std::vector<double> weight;
  for (const auto& [rho, w] : gl)
    for (int k = 0; k < n_phi; ++k) weight.push_back(w * rho * dphi);
  for (std::size_t a = 0; a < keys.size(); ++a)
    for (const auto& [rho, w] : gl)
      for (int k = 0; k < n_phi; ++k) table[a].push_back(zernike(keys[a].n, keys[a].m, rho, k * dphi));

  for (std::size_t a = 0; a < keys.size(); ++a) {
    for (std::size_t b = a; b < keys.size(); ++b) {
      const auto ka = keys[a], kb = keys[b];
      double ip = 0.0;
      for (std::size_t q = 0; q < weight.size(); ++q) ip += weight[q] * table[a][q] * table[b][q];
      const double na = std::numbers::pi / (2.0 * (ka.n + 1)) * (ka.m == 0 ? 2.0 : 1.0);
      const double nb = std::numbers::pi / (2.0 * (kb.n + 1)) * (kb.m == 0 ? 2.0 : 1.0);
      CAPTURE(to_string(ka));
      CAPTURE(to_string(kb));
      if (a == b)
        CHECK(ip == doctest::Approx(na).epsilon(1e-6));
      else
        CHECK(std::abs(ip) <= 1e-6 * std::sqrt(na * nb));
    }
  }
  // cross-check the tabulated rule against the generic disk integrator
  const double z31 = testing::disk_integral(
      [](double r, double p) { return std::pow(zernike(3, 1, r, p), 2); }, 64, 64);
  CHECK(z31 == doctest::Approx(std::numbers::pi / 8.0).epsilon(1e-12));
}

TEST_CASE("presets") {
  CHECK(zernike_preset("full").size() == 20);
  CHECK(zernike_preset("noll15").size() == 15);
  ParamSpace s;
  CHECK(s.dimension() == 50);
  s.keys = zernike_preset("noll15");
  CHECK(s.dimension() == 40);
  CHECK_THROWS_AS(zernike_preset("bogus"), ConfigError);
  const auto keys = zernike_upto(5);
  CHECK(std::is_sorted(keys.begin(), keys.end()));
  CHECK(keys.front() == ZernikeIndex{1, -1});
  CHECK(keys.back() == ZernikeIndex{5, 5});
}

TEST_CASE("phase function") {
  ParamSpace space;
  auto p = MaskParams::zeros(space);
  CHECK(phase_function(0.3, -0.2, 14.0, -9.0, p.left) == 0.0);

  p.left.gamma1 = p.left.gamma2 = 1.5e-3;
  for (double theta : {0.0, 0.4, 1.1, std::numbers::pi / 2}) {
    p.left.theta_lens = theta;
    CHECK(phase_function(0.1, 0.2, 123.0, -77.0, p.left) ==
          doctest::Approx(1.5e-3 * (123.0 * 123.0 + 77.0 * 77.0)).epsilon(1e-12));
  }

  auto q = MaskParams::zeros(space);
  for (auto& t : q.left.zernike)
    if (t.index == ZernikeIndex{2, -2}) t.coeff = 1.0;
  const double s = 1.0 / std::sqrt(2.0);
  CHECK(phase_function(s, s, 0.0, 0.0, q.left) == doctest::Approx(1.0));
}

TEST_CASE("phase function and sampled evaluation are bit-identical") {
  ParamSpace space;
  Rng rng(3);
  const auto p = random_params(space, rng);
  std::vector<PanelSampler::Pixel> px;
  for (int i = 1; i <= kSmall.height_px; i += 3)
    for (int j = kSmall.half_width() + 1; j <= kSmall.width_px; j += 2) px.push_back({i, j});
  PanelSampler sampler(kSmall, Panel::right, px, space.keys);
  std::vector<double> out(px.size());
  sampler.phase(p.right, out);
  for (std::size_t k = 0; k < px.size(); ++k) {
    const auto nc = normalized_coords(px[k].i, px[k].j, kSmall);
    const auto cc = centered_coords(px[k].i, px[k].j, kSmall);
    CHECK(out[k] == phase_function(nc.xi, nc.eta, cc.xc, cc.yc, p.right));
  }
  CHECK_THROWS_AS(PanelSampler(kSmall, Panel::left, px, space.keys), ContractError);
}

TEST_CASE("compose_mask wraps modulo 2^k") {
  ParamSpace space;
  const auto zero = MaskParams::zeros(space);
  StartingMask w(kSmall);
  auto m = compose_mask(zero, w);
  CHECK(std::all_of(m.values.begin(), m.values.end(), [](auto v) { return v == 0; }));

  w.values[0] = 1024.0;
  w.values[1] = -0.5;
  w.values[2] = 1023.75;
  w.values[3] = -2049.0;
  m = compose_mask(zero, w);
  CHECK(m.values[0] == 0);
  CHECK(m.values[1] == 1023);
  CHECK(m.values[2] == 1023);
  CHECK(m.values[3] == 1023);
}

TEST_CASE("composed elements always lie in [0, 2^k - 1]") {
  ParamSpace space;
  space.zernike_bound = 1e9;
  space.gamma_bound = 1e3;
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const auto p = random_params(space, rng);
    StartingMask w(kSmall);
    for (auto& v : w.values) v = rng.uniform(-1e12, 1e12);
    for (int depth : {1, 8, 10, 16}) {
      PanelGeometry g = kSmall;
      g.bit_depth = depth;
      StartingMask wg(g);
      wg.values = w.values;
      const auto m = compose_mask(p, wg);
      CHECK(std::all_of(m.values.begin(), m.values.end(),
                        [&](auto v) { return v <= g.levels() - 1; }));
    }
  }
}

TEST_CASE("half-panels are independent") {
  ParamSpace space;
  Rng rng(23);
  auto p = random_params(space, rng);
  StartingMask w(kSmall);
  const auto before = compose_mask(p, w);
  p.left = random_params(space, rng).left;
  const auto after = compose_mask(p, w);
  bool left_changed = false;
  for (int i = 1; i <= kSmall.height_px; ++i) {
    for (int j = 1; j <= kSmall.width_px; ++j) {
      if (j > kSmall.half_width())
        CHECK(before.at(i, j) == after.at(i, j));
      else
        left_changed |= before.at(i, j) != after.at(i, j);
    }
  }
  CHECK(left_changed);
}

TEST_CASE("isotropic lens is invariant under rotation") {
  ParamSpace space;
  auto p = MaskParams::zeros(space);
  p.left.gamma1 = p.left.gamma2 = 1.9e-3;
  p.right.gamma1 = p.right.gamma2 = -0.7e-3;
  p.left.mu_x = 30.0;
  p.right.mu_y = -55.0;
  const PanelGeometry g{120, 200, 10, 8e-6};
  const auto ref = phase_map(p, g);
  for (double theta : {0.2, 0.785, 1.3, std::numbers::pi / 2}) {
    p.left.theta_lens = p.right.theta_lens = theta;
    const auto rot = phase_map(p, g);
    double worst = 0.0;
    for (std::size_t k = 0; k < ref.values.size(); ++k)
      worst = std::max(worst, std::abs(ref.values[k] - rot.values[k]));
    CHECK(worst <= 1e-9);
  }
}

TEST_CASE("accumulate_start") {
  ParamSpace space;
  Rng rng(29);
  StartingMask w(kSmall);
  for (auto& v : w.values) v = rng.uniform(-3000.0, 3000.0);

  SUBCASE("zero parameters leave the accumulator unchanged") {
    CHECK(accumulate_start(w, MaskParams::zeros(space)).values == w.values);
  }

  SUBCASE("beta then its phase negation cancels") {
    auto beta = random_params(space, rng);
    auto neg = beta;
    for (PanelParams* pp : {&neg.left, &neg.right}) {
      for (auto& t : pp->zernike) t.coeff = -t.coeff;
      pp->gamma1 = -pp->gamma1;
      pp->gamma2 = -pp->gamma2;
    }
    StartingMask zero(kSmall);
    CHECK(accumulate_start(accumulate_start(zero, beta), neg).values == zero.values);
    const auto back = accumulate_start(accumulate_start(w, beta), neg);
    for (std::size_t k = 0; k < w.values.size(); ++k)
      CHECK(back.values[k] == doctest::Approx(w.values[k]).epsilon(1e-9));
  }

  SUBCASE("best mask becomes the zero-parameter mask bit-exactly") {
    for (int trial = 0; trial < 10; ++trial) {
      const auto beta = random_params(space, rng);
      const auto zero = MaskParams::zeros(space);
      CHECK(compose_mask(beta, w) == compose_mask(zero, accumulate_start(w, beta)));
    }
  }
}

TEST_CASE("accumulate/compose identity on the full-size panel") {
  ParamSpace space;
  Rng rng(31);
  const PanelGeometry g;
  const auto beta = random_params(space, rng);
  StartingMask zero(g);
  const auto direct = compose_mask(beta, zero);
  CHECK(direct == compose_mask(MaskParams::zeros(space), accumulate_start(zero, beta)));
  CHECK(direct == compose_mask(beta, zero));
  if (const auto* vk = simd::avx2_kernels())
    CHECK(direct == compose_mask(beta, zero, *vk));
  CHECK(direct == compose_mask(beta, zero, simd::scalar_kernels()));
}

TEST_CASE("parameter flattening and JSON") {
  ParamSpace space;
  Rng rng(37);
  const auto p = random_params(space, rng);
  const auto flat = p.flatten();
  REQUIRE(flat.size() == 50);
  CHECK(flat[0] == p.left.zernike[0].coeff);
  CHECK(flat[20] == p.left.gamma1);
  CHECK(flat[22] == p.left.theta_lens);
  CHECK(flat[25] == p.right.zernike[0].coeff);
  CHECK(space.names()[24] == "L.mu_y");
  CHECK(space.names()[25] == "R.Z(1,-1)");
  CHECK(params_from_json(space, params_to_json(p)).flatten() == flat);
  CHECK_THROWS_AS(params_from_json(space, nlohmann::json::array({1, 2})), ConfigError);
  CHECK_THROWS_AS(params_from_json(space, nlohmann::json::object()), ConfigError);

  auto bad = p;
  bad.left.theta_lens = -0.1;
  CHECK_THROWS_AS(bad.check(space), ContractError);
  bad = p;
  bad.right.mu_x = 301.0;
  CHECK_THROWS_AS(bad.check(space), ContractError);
  bad = p;
  bad.right.gamma1 = std::nan("");
  CHECK_THROWS_AS(bad.check(space), ContractError);
  CHECK_NOTHROW(p.check(space));
}

TEST_CASE("mask export and import") {
  const PanelGeometry g{6, 8, 10, 8e-6};
  PhaseMask checker(g);
  for (int i = 1; i <= g.height_px; ++i)
    for (int j = 1; j <= g.width_px; ++j) checker.at(i, j) = (i + j) % 2 ? 1023 : 0;

  SUBCASE("pgm round trip and payload layout") {
    const auto path = tmp_path("checker.pgm");
    export_mask(checker, MaskFormat::pgm16, path);
    CHECK(import_mask(path, MaskFormat::pgm16) == checker);
    std::ifstream is(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(is)), {});
    const std::string header = "P5\n8 6\n1023\n";
    REQUIRE(bytes.size() == header.size() + 2 * 48);
    CHECK(bytes.substr(0, header.size()) == header);
    // (1,1) is even -> 0; (1,2) is odd -> 1023 = 0x03FF big-endian
    CHECK(bytes[header.size() + 0] == 0);
    CHECK(bytes[header.size() + 1] == 0);
    CHECK(static_cast<unsigned char>(bytes[header.size() + 2]) == 0x03);
    CHECK(static_cast<unsigned char>(bytes[header.size() + 3]) == 0xFF);
  }

  SUBCASE("csv round trip") {
    const auto path = tmp_path("checker.csv");
    export_mask(checker, MaskFormat::csv, path);
    CHECK(import_mask(path, MaskFormat::csv, 10) == checker);
    std::ifstream is(path);
    std::string first;
    std::getline(is, first);
    CHECK(first == "0,1023,0,1023,0,1023,0,1023");
  }

  SUBCASE("all-zero payload") {
    const auto path = tmp_path("zero.pgm");
    export_mask(PhaseMask(g), MaskFormat::pgm16, path);
    std::ifstream is(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(is)), {});
    const auto payload = bytes.substr(bytes.size() - 96);
    CHECK(std::all_of(payload.begin(), payload.end(), [](char c) { return c == 0; }));
  }

  SUBCASE("random full-size mask round-trips through both formats") {
    Rng rng(41);
    PhaseMask m{PanelGeometry{}};
    for (auto& v : m.values) v = static_cast<std::uint16_t>(rng.next_u64() % 1024);
    for (auto fmt : {MaskFormat::pgm16, MaskFormat::csv}) {
      const auto path = tmp_path(fmt == MaskFormat::csv ? "full.csv" : "full.pgm");
      export_mask(m, fmt, path);
      CHECK(import_mask(path, fmt) == m);
    }
  }

  SUBCASE("malformed inputs") {
    const auto path = tmp_path("bad.csv");
    std::ofstream(path) << "1,2,3\n4,x,6\n";
    CHECK_THROWS_AS(import_mask(path, MaskFormat::csv), IoError);
    std::ofstream(path) << "1,2,3\n4,5\n";
    CHECK_THROWS_AS(import_mask(path, MaskFormat::csv), IoError);
    std::ofstream(path) << "1,2000\n";
    CHECK_THROWS_AS(import_mask(path, MaskFormat::csv), IoError);
    CHECK_THROWS_AS(import_mask(tmp_path("does_not_exist.pgm"), MaskFormat::pgm16), IoError);
  }
}

TEST_CASE("tabulated basis equals direct evaluation bit-exactly") {
  const auto keys = zernike_upto(5);
  const ZernikeBasis basis(keys);
  std::vector<double> z(keys.size());
  Rng rng(43);
  for (int trial = 0; trial < 200; ++trial) {
    const double xi = rng.uniform(-1.0, 1.0), eta = rng.uniform(-1.0, 1.0);
    basis.eval(xi, eta, z);
    const double rho = std::sqrt(xi * xi + eta * eta), phi = std::atan2(eta, xi);
    for (std::size_t t = 0; t < keys.size(); ++t)
      CHECK(z[t] == zernike(keys[t].n, keys[t].m, rho, phi));
  }
}
