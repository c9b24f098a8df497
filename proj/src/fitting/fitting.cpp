#include "sqz/fitting/fitting.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "sqz/common/error.hpp"

namespace sqz::fitting {
namespace {

constexpr double kDbPerNeper = 10.0 / std::numbers::ln10;

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// The model is pi-periodic in theta and mirrors about pi/4, so theta lives on
// (0, pi/4) through a scaled logit.
constexpr double kThetaMax = std::numbers::pi / 4;

double logit(double u) { return std::log(u / (1.0 - u)); }
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Vec3 to_internal(const NoiseParams& p) {
  return {std::log(p.alpha), logit(p.loss), logit(p.theta / kThetaMax)};
}

NoiseParams from_internal(const Vec3& x) {
  return {std::exp(x[0]), sigmoid(x[1]), kThetaMax * sigmoid(x[2])};
}

// Residual count is 1 or 2 per row.
struct Problem {
  std::vector<SqueezeRow> rows;

  int size() const {
    int n = 0;
    for (const auto& r : rows) n += r.antisqueeze_db ? 2 : 1;
    return n;
  }

  // Weighted residuals and their Jacobian w.r.t. the internal coordinates.
  void eval(const Vec3& x, Eigen::VectorXd& res, Eigen::MatrixXd* jac) const {
    const NoiseParams p = from_internal(x);
    const Vec3 chain{p.alpha, p.loss * (1.0 - p.loss), p.theta * (1.0 - p.theta / kThetaMax)};
    res.resize(size());
    if (jac) jac->resize(size(), 3);
    int k = 0;
    for (const auto& r : rows) {
      const auto pr = model_predict(p, r.pump_w);
      const auto jr = jac ? model_jacobian(p, r.pump_w) : std::array<std::array<double, 3>, 2>{};
      res[k] = (pr.squeeze_db - r.squeeze_db) / r.sigma_db;
      if (jac)
        for (int c = 0; c < 3; ++c) (*jac)(k, c) = jr[0][c] * chain[c] / r.sigma_db;
      ++k;
      if (r.antisqueeze_db) {
        res[k] = (pr.antisqueeze_db - *r.antisqueeze_db) / r.sigma_db;
        if (jac)
          for (int c = 0; c < 3; ++c) (*jac)(k, c) = jr[1][c] * chain[c] / r.sigma_db;
        ++k;
      }
    }
  }
};

FitResult levenberg_marquardt(const Problem& prob, const NoiseParams& start, const FitOptions& opt) {
  FitResult out;
  Vec3 x = to_internal(start);
  Eigen::VectorXd r, r_try;
  Eigen::MatrixXd J;
  prob.eval(x, r, &J);
  double cost = r.squaredNorm();
  double lambda = 1e-3;
  int it = 0;
  bool done = false;
  for (; it < opt.max_iterations && !done; ++it) {
    const Mat3 A = J.transpose() * J;
    const Vec3 g = J.transpose() * r;
    if (g.lpNorm<Eigen::Infinity>() < 1e-300) {
      done = true;
      break;
    }
    bool accepted = false;
    for (int tries = 0; tries < 60; ++tries) {
      Mat3 damped = A;
      for (int c = 0; c < 3; ++c) damped(c, c) += lambda * std::max(A(c, c), 1e-12);
      const Vec3 dx = damped.ldlt().solve(-g);
      const Vec3 xt = x + dx;
      if (!xt.allFinite()) {
        lambda *= 10.0;
        continue;
      }
      prob.eval(xt, r_try, nullptr);
      const double ct = r_try.allFinite() ? r_try.squaredNorm() : INFINITY;
      if (ct <= cost) {
        const double rel = dx.norm() / (x.norm() + 1e-12);
        x = xt;
        const double drop = cost - ct;
        cost = ct;
        lambda = std::max(lambda / 10.0, 1e-12);
        accepted = true;
        if (rel < opt.step_tolerance || drop <= 1e-30 * (1.0 + cost)) done = true;
        break;
      }
      lambda *= 10.0;
      if (lambda > 1e16) break;
    }
    if (!accepted) {
      // No decrease possible from here: at a minimum to working precision.
      done = true;
      break;
    }
    prob.eval(x, r, &J);
  }
  out.params = from_internal(x);
  out.iterations = it;
  out.converged = done;
  out.residual_norm = std::sqrt(cost);
  if (!done)
    out.diagnostics = "no convergence after " + std::to_string(it) + " iterations; last lambda " +
                      std::to_string(lambda);
  return out;
}

void fill_covariance(const Problem& prob, FitResult& fr) {
  // Normal matrix in physical parameters.
  Eigen::MatrixXd J(prob.size(), 3);
  int k = 0;
  for (const auto& r : prob.rows) {
    const auto jr = model_jacobian(fr.params, r.pump_w);
    for (int c = 0; c < 3; ++c) J(k, c) = jr[0][c] / r.sigma_db;
    ++k;
    if (r.antisqueeze_db) {
      for (int c = 0; c < 3; ++c) J(k, c) = jr[1][c] / r.sigma_db;
      ++k;
    }
  }
  const Mat3 N = J.transpose() * J;
  Eigen::FullPivLU<Mat3> lu(N);
  const int dof = prob.size() - 3;
  fr.chi2_reduced = dof > 0 ? fr.residual_norm * fr.residual_norm / dof : 0.0;
  if (!lu.isInvertible()) {
    fr.diagnostics += (fr.diagnostics.empty() ? "" : "; ") + std::string("singular normal matrix");
    for (auto& row : fr.covariance) row.fill(NAN);
    for (auto& row : fr.correlation) row.fill(NAN);
    fr.stderr_.fill(NAN);
    return;
  }
  Mat3 inv = lu.inverse();
  inv = 0.5 * (inv + inv.transpose());
  const double scale = dof > 0 ? fr.chi2_reduced : 1.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      fr.covariance[i][j] = inv(i, j) * scale;
      fr.correlation[i][j] = inv(i, j) / std::sqrt(inv(i, i) * inv(j, j));
    }
  for (int i = 0; i < 3; ++i) fr.stderr_[i] = std::sqrt(std::max(0.0, fr.covariance[i][i]));
}

double parse_cell(const std::string& s, int line, int col, const char* what) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size())
    throw ConfigError("line " + std::to_string(line) + ", column " + std::to_string(col) + " (" + what +
                      "): bad value '" + s + "'");
  return v;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string c;
  while (std::getline(ss, c, ',')) {
    while (!c.empty() && (c.back() == ' ' || c.back() == '\r')) c.pop_back();
    while (!c.empty() && c.front() == ' ') c.erase(c.begin());
    cells.push_back(c);
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

}  // namespace

void SqueezeDataset::validate() const {
  std::set<double> pumps;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    const std::string at = "dataset row " + std::to_string(i + 1) + ": ";
    if (!(std::isfinite(r.pump_w) && r.pump_w > 0)) throw ConfigError(at + "pump power must be > 0");
    if (!(std::isfinite(r.sigma_db) && r.sigma_db > 0)) throw ConfigError(at + "sigma must be > 0");
    if (!std::isfinite(r.squeeze_db)) throw ConfigError(at + "squeezing not finite");
    if (r.antisqueeze_db && !std::isfinite(*r.antisqueeze_db))
      throw ConfigError(at + "anti-squeezing not finite");
    if (!r.corrected && !clearance_db)
      throw ConfigError(at + "uncorrected row but no clearance given");
    pumps.insert(r.pump_w);
  }
  if (pumps.size() < 3) throw ConfigError("dataset needs at least 3 distinct pump powers");
}

SqueezeDataset SqueezeDataset::corrected() const {
  SqueezeDataset out = *this;
  for (auto& r : out.rows) {
    if (r.corrected) continue;
    const double circ = -*clearance_db;
    r.squeeze_db = noise::circuit_noise_correct({-r.squeeze_db, 0.0, circ});
    if (r.antisqueeze_db)
      r.antisqueeze_db = -noise::circuit_noise_correct({*r.antisqueeze_db, 0.0, circ});
    r.corrected = true;
  }
  return out;
}

SqueezeDataset read_dataset_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(is, line)) throw ConfigError(path.string() + ": empty file");
  auto head = split(line);
  const std::vector<std::string> want{"pump_w", "squeeze_db", "antisqueeze_db", "sigma_db"};
  const bool has_flag = head.size() == 5 && head[4] == "corrected";
  if (!(std::equal(want.begin(), want.end(), head.begin(), head.begin() + std::min<std::size_t>(4, head.size())) &&
        head.size() >= 4 && (head.size() == 4 || has_flag)))
    throw ConfigError(path.string() + ": header must be pump_w,squeeze_db,antisqueeze_db,sigma_db");
  SqueezeDataset d;
  int ln = 1;
  while (std::getline(is, line)) {
    ++ln;
    if (line.empty() || line == "\r") continue;
    auto c = split(line);
    if (c.size() != head.size())
      throw ConfigError("line " + std::to_string(ln) + ": expected " + std::to_string(head.size()) +
                        " columns, got " + std::to_string(c.size()));
    SqueezeRow r{parse_cell(c[0], ln, 1, "pump_w"), parse_cell(c[1], ln, 2, "squeeze_db"), std::nullopt};
    if (!c[2].empty()) r.antisqueeze_db = parse_cell(c[2], ln, 3, "antisqueeze_db");
    if (!c[3].empty()) r.sigma_db = parse_cell(c[3], ln, 4, "sigma_db");
    if (has_flag && !c[4].empty()) r.corrected = parse_cell(c[4], ln, 5, "corrected") != 0.0;
    d.rows.push_back(r);
  }
  return d;
}

void write_dataset_csv(const SqueezeDataset& d, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os.precision(17);
  os << "pump_w,squeeze_db,antisqueeze_db,sigma_db\n";
  for (const auto& r : d.rows) {
    os << r.pump_w << ',' << r.squeeze_db << ',';
    if (r.antisqueeze_db) os << *r.antisqueeze_db;
    os << ',' << r.sigma_db << '\n';
  }
  if (!os) throw IoError("write failed: " + path.string());
}

Prediction model_predict(const NoiseParams& p, double pump_w) {
  const auto r = noise::observed_levels(p, pump_w);
  return {-noise::to_db(r.minus), noise::to_db(r.plus)};
}

std::array<std::array<double, 3>, 2> model_jacobian(const NoiseParams& p, double pump_w) {
  const double g = 2.0 * std::sqrt(p.alpha * pump_w);
  const double em = std::exp(-g), ep = std::exp(g);
  const double rm = p.loss + (1 - p.loss) * em, rp = p.loss + (1 - p.loss) * ep;
  const double c2 = std::cos(p.theta) * std::cos(p.theta), s2 = std::sin(p.theta) * std::sin(p.theta);
  const double s2t = std::sin(2.0 * p.theta);
  const double om = rm * c2 + rp * s2, op = rp * c2 + rm * s2;
  // dg/dalpha = g / (2 alpha); zero when P = 0
  const double dg = p.alpha > 0 ? g / (2.0 * p.alpha) : 0.0;
  const double drm_da = -(1 - p.loss) * em * dg, drp_da = (1 - p.loss) * ep * dg;
  const double drm_dl = 1 - em, drp_dl = 1 - ep;
  const double dom[3] = {drm_da * c2 + drp_da * s2, drm_dl * c2 + drp_dl * s2, (rp - rm) * s2t};
  const double dop[3] = {drp_da * c2 + drm_da * s2, drp_dl * c2 + drm_dl * s2, (rm - rp) * s2t};
  std::array<std::array<double, 3>, 2> j{};
  for (int c = 0; c < 3; ++c) {
    j[0][c] = -kDbPerNeper * dom[c] / om;
    j[1][c] = kDbPerNeper * dop[c] / op;
  }
  return j;
}

bool in_fit_bounds(const NoiseParams& p) {
  return p.alpha > 0 && p.alpha <= 100 && p.loss >= 0 && p.loss <= 0.5 && p.theta >= 0 &&
         p.theta <= 0.2;
}

NoiseParams initial_guess(const SqueezeDataset& d) {
  require(!d.rows.empty(), "initial_guess: empty dataset");
  const auto deepest = std::max_element(d.rows.begin(), d.rows.end(), [](auto& a, auto& b) {
    return a.squeeze_db < b.squeeze_db;
  });
  // R_- never drops below L, so the deepest point bounds it from above.
  double loss = std::clamp(0.8 * noise::from_db(-deepest->squeeze_db), 1e-3, 0.5);
  const auto low = std::min_element(d.rows.begin(), d.rows.end(), [](auto& a, auto& b) {
    return a.pump_w < b.pump_w;
  });
  double g = 0.0;
  if (low->antisqueeze_db) {
    g = std::log((noise::from_db(*low->antisqueeze_db) - loss) / (1 - loss));
  } else {
    const double rm = noise::from_db(-low->squeeze_db);
    if (rm > loss) g = -std::log((rm - loss) / (1 - loss));
  }
  double alpha = g > 0 && std::isfinite(g) ? g * g / (4.0 * low->pump_w) : 1.0;
  alpha = std::clamp(alpha, 1e-2, 100.0);
  return {alpha, loss, 0.005};
}

FitResult fit(const SqueezeDataset& d, std::optional<NoiseParams> guess, const FitOptions& opt) {
  d.validate();
  const SqueezeDataset data = d.corrected();
  Problem prob{data.rows};
  // Canonical row order so the result does not depend on input order.
  std::sort(prob.rows.begin(), prob.rows.end(), [](const SqueezeRow& a, const SqueezeRow& b) {
    if (a.pump_w != b.pump_w) return a.pump_w < b.pump_w;
    if (a.squeeze_db != b.squeeze_db) return a.squeeze_db < b.squeeze_db;
    const double aa = a.antisqueeze_db.value_or(-INFINITY), ba = b.antisqueeze_db.value_or(-INFINITY);
    if (aa != ba) return aa < ba;
    return a.sigma_db < b.sigma_db;
  });
  std::vector<NoiseParams> starts;
  if (guess) {
    require(in_fit_bounds(*guess), "initial guess outside alpha (0,100], L [0,0.5], theta [0,0.2]");
    NoiseParams g = *guess;
    // interior point for the log/logit transform
    g.loss = std::clamp(g.loss, 1e-6, 0.5);
    g.theta = std::max(g.theta, 1e-6);
    starts.push_back(g);
  }
  const NoiseParams auto_guess = initial_guess(data);
  starts.push_back(auto_guess);
  // a second phase-noise start guards against the theta -> 0 basin
  starts.push_back({auto_guess.alpha, auto_guess.loss, 0.05});

  FitResult best;
  bool have = false;
  for (const auto& s : starts) {
    FitResult r = levenberg_marquardt(prob, s, opt);
    if (!have || r.residual_norm < best.residual_norm) {
      best = r;
      have = true;
    }
  }
  fill_covariance(prob, best);
  return best;
}

nlohmann::json to_json(const FitResult& r) {
  using nlohmann::json;
  json cov = json::array();
  json corr = json::array();
  for (int i = 0; i < 3; ++i) {
    cov.push_back(json(r.covariance[i]));
    corr.push_back(json(r.correlation[i]));
  }
  return {
      {"si",
       {{"alpha_per_w", r.params.alpha},
        {"loss", r.params.loss},
        {"theta_rad", r.params.theta},
        {"stderr", {{"alpha_per_w", r.stderr_[0]}, {"loss", r.stderr_[1]}, {"theta_rad", r.stderr_[2]}}}}},
      {"lab_units",
       {{"alpha_pct_per_w", 100 * r.params.alpha},
        {"loss_pct", 100 * r.params.loss},
        {"theta_mrad", 1e3 * r.params.theta},
        {"stderr",
         {{"alpha_pct_per_w", 100 * r.stderr_[0]},
          {"loss_pct", 100 * r.stderr_[1]},
          {"theta_mrad", 1e3 * r.stderr_[2]}}}}},
      {"covariance_si", cov},
      {"correlation", corr},
      {"residual_norm", r.residual_norm},
      {"chi2_reduced", r.chi2_reduced},
      {"iterations", r.iterations},
      {"converged", r.converged},
      {"diagnostics", r.diagnostics},
  };
}

ScenarioTable compare_scenarios(const NoiseParams& a, const NoiseParams& b,
                                const std::vector<double>& pump_grid) {
  a.validate();
  b.validate();
  ScenarioTable t;
  for (double p : pump_grid) t.rows.push_back({p, model_predict(a, p), model_predict(b, p)});
  const double pmax = pump_grid.empty() ? 1.0 : std::max(1.0, 2.0 * *std::max_element(pump_grid.begin(), pump_grid.end()));
  t.best_a = noise::best_squeezing(a, pmax);
  t.best_b = noise::best_squeezing(b, pmax);
  return t;
}

void write_scenarios_csv(const ScenarioTable& t, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os.precision(10);
  os << "pump_w,a_squeeze_db,a_antisqueeze_db,b_squeeze_db,b_antisqueeze_db\n";
  for (const auto& r : t.rows)
    os << r.pump_w << ',' << r.a.squeeze_db << ',' << r.a.antisqueeze_db << ',' << r.b.squeeze_db
       << ',' << r.b.antisqueeze_db << '\n';
  if (!os) throw IoError("write failed: " + path.string());
}

std::vector<double> default_pump_grid(int n) {
  require(n >= 2, "pump grid needs at least 2 points");
  std::vector<double> g(n);
  for (int i = 0; i < n; ++i) g[i] = 0.05 + (1.0 - 0.05) * i / (n - 1);
  return g;
}

}  // namespace sqz::fitting
