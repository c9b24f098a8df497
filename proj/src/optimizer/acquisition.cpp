#include "sqz/optimizer/acquisition.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "sqz/common/error.hpp"
#include "sqz/optimizer/lbfgs.hpp"

namespace sqz::optimizer {
namespace {

const double kInvSqrt2Pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);

// Phi(-t) / phi(t) for t >= 5 by its continued fraction.
double mills_ratio(double t) {
  double f = t;
  for (int k = 60; k >= 1; --k) f = t + k / f;
  return 1.0 / f;
}

double mes_term(double gamma, double* dterm) {
  const double psi = normal_hazard(gamma);
  if (dterm) *dterm = -0.5 * psi * (1.0 + gamma * gamma + gamma * psi);
  return 0.5 * gamma * psi - normal_log_cdf(gamma);
}

}  // namespace

double normal_pdf(double z) { return kInvSqrt2Pi * std::exp(-0.5 * z * z); }

double normal_log_cdf(double z) {
  if (z > -5.0) return std::log(0.5 * std::erfc(-z / std::numbers::sqrt2));
  return -0.5 * z * z - 0.5 * std::log(2.0 * std::numbers::pi) + std::log(mills_ratio(-z));
}

double normal_hazard(double z) {
  if (z > -5.0) return normal_pdf(z) / (0.5 * std::erfc(-z / std::numbers::sqrt2));
  return 1.0 / mills_ratio(-z);
}

Eigen::MatrixXd rd_sequence(int count, int dim, Rng& rng) {
  // phi_d: positive root of x^(d+1) = x + 1
  double phi = 2.0;
  for (int i = 0; i < 50; ++i) phi = std::pow(1.0 + phi, 1.0 / (dim + 1));
  Eigen::VectorXd a(dim), shift(dim);
  for (int d = 0; d < dim; ++d) {
    a[d] = std::fmod(std::pow(1.0 / phi, d + 1), 1.0);
    shift[d] = rng.uniform();
  }
  Eigen::MatrixXd P(count, dim);
  for (int i = 0; i < count; ++i)
    for (int d = 0; d < dim; ++d) {
      const double v = shift[d] + (i + 1) * a[d];
      P(i, d) = v - std::floor(v);
    }
  return P;
}

MaxValueSamples sample_max_values(const GpModel& gp, int count, int grid_points, Rng& rng) {
  const Eigen::MatrixXd grid = rd_sequence(grid_points, gp.dim(), rng);
  Eigen::MatrixXd pts(grid.rows() + gp.size(), gp.dim());
  pts << grid, gp.inputs();
  Eigen::VectorXd mu, var;
  gp.predict_batch(pts, mu, var);
  const Eigen::VectorXd sd = var.cwiseSqrt();

  auto log_cdf_max = [&](double z) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < mu.size(); ++i) s += normal_log_cdf((z - mu[i]) / sd[i]);
    return s;
  };
  const double hi0 = (mu + 8.0 * sd).maxCoeff();
  const double lo0 = mu.maxCoeff() - 8.0 * sd.maxCoeff();
  auto quantile = [&](double q) {
    double lo = lo0, hi = hi0;
    const double target = std::log(q);
    for (int it = 0; it < 100; ++it) {
      const double mid = 0.5 * (lo + hi);
      (log_cdf_max(mid) < target ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  };
  const double q25 = quantile(0.25), q50 = quantile(0.5), q75 = quantile(0.75);
  MaxValueSamples out;
  // Gumbel quantile: a - b log(-log q)
  const double b = (q75 - q25) / (std::log(-std::log(0.25)) - std::log(-std::log(0.75)));
  const double a = q50 + b * std::log(-std::log(0.5));
  if (!(b > 1e-10) || !std::isfinite(a)) {
    out.degenerate = true;
    return out;
  }
  Eigen::VectorXd mtrain, vtrain;
  gp.predict_batch(gp.inputs(), mtrain, vtrain);
  const double floor_v = mtrain.maxCoeff() + 1e-6;
  for (int k = 0; k < count; ++k) {
    const double u = std::clamp(rng.uniform(), 1e-12, 1.0 - 1e-12);
    out.values.push_back(std::max(a - b * std::log(-std::log(u)), floor_v));
  }
  return out;
}

double mes_value(const GpModel& gp, std::span<const double> ystar, std::span<const double> x,
                 std::span<double> grad) {
  const double K = static_cast<double>(ystar.size());
  if (grad.empty()) {
    const auto p = gp.predict(x);
    const double s = std::sqrt(p.var);
    double v = 0.0;
    for (double y : ystar) v += mes_term((y - p.mean) / s, nullptr);
    return v / K;
  }
  const auto p = gp.predict_grad(x);
  const double s = std::sqrt(p.var);
  double v = 0.0, dsum_mu = 0.0, dsum_s = 0.0;
  for (double y : ystar) {
    const double g = (y - p.mean) / s;
    double dh;
    v += mes_term(g, &dh);
    // dgamma = -dmu / s - gamma ds / s
    dsum_mu += dh * (-1.0 / s);
    dsum_s += dh * (-g / s);
  }
  for (std::size_t d = 0; d < grad.size(); ++d) {
    const double ds = p.dvar[d] / (2.0 * s);
    grad[d] = (dsum_mu * p.dmean[d] + dsum_s * ds) / K;
  }
  return v / K;
}

double ei_value(const GpModel& gp, double best, std::span<const double> x, std::span<double> grad) {
  if (grad.empty()) {
    const auto p = gp.predict(x);
    const double s = std::sqrt(p.var), z = (p.mean - best) / s;
    return s * (z * 0.5 * std::erfc(-z / std::numbers::sqrt2) + normal_pdf(z));
  }
  const auto p = gp.predict_grad(x);
  const double s = std::sqrt(p.var), z = (p.mean - best) / s;
  const double cdf = 0.5 * std::erfc(-z / std::numbers::sqrt2), pdf = normal_pdf(z);
  for (std::size_t d = 0; d < grad.size(); ++d)
    grad[d] = p.dmean[d] * cdf + p.dvar[d] / (2.0 * s) * pdf;
  return s * (z * cdf + pdf);
}

Acquired acquire_next(const GpModel& gp, const AcquisitionOptions& opt, Rng& rng, const Region* region) {
  const int D = gp.dim();
  std::vector<double> lo(D, 0.0), hi(D, 1.0);
  if (region) {
    require(static_cast<int>(region->lo.size()) == D && static_cast<int>(region->hi.size()) == D,
            "acquire_next: region dimension mismatch");
    for (int d = 0; d < D; ++d) {
      lo[d] = std::clamp(region->lo[d], 0.0, 1.0);
      hi[d] = std::clamp(region->hi[d], lo[d], 1.0);
    }
  }
  Acquired out;
  auto fallback = [&](const std::string& why) {
    out.x.resize(D);
    for (auto& v : out.x) v = rng.uniform();
    out.fallback = true;
    out.warning = why;
    return out;
  };

  std::vector<double> ystar;
  double best = gp.targets().maxCoeff();
  if (opt.kind == AcquisitionKind::mes) {
    auto mv = sample_max_values(gp, opt.mes_samples, opt.gumbel_points, rng);
    if (mv.degenerate) return fallback("degenerate max-value distribution; uniform draw");
    ystar = std::move(mv.values);
  }
  auto value = [&](std::span<const double> x, std::span<double> g) {
    return opt.kind == AcquisitionKind::mes ? mes_value(gp, ystar, x, g) : ei_value(gp, best, x, g);
  };

  // start set: uniform points plus sparse perturbations of the best inputs
  std::vector<int> order(gp.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return gp.targets()[a] > gp.targets()[b]; });
  const int anchors = std::min<int>(opt.anchor_points, gp.size());
  const int total = opt.random_starts + anchors * (opt.perturbations + 1);
  Eigen::MatrixXd C(total, D);
  int row = 0;
  for (int i = 0; i < opt.random_starts; ++i, ++row)
    for (int d = 0; d < D; ++d) C(row, d) = rng.uniform(lo[d], hi[d]);
  const auto& scales = opt.perturbation_scales;
  const double p_dim = std::min(1.0, opt.perturbed_dims / D);
  for (int a = 0; a < anchors; ++a) {
    Eigen::VectorXd anchor = gp.inputs().row(order[a]).transpose();
    for (int d = 0; d < D; ++d) anchor[d] = std::clamp(anchor[d], lo[d], hi[d]);
    C.row(row++) = anchor;
    for (int k = 0; k < opt.perturbations; ++k, ++row) {
      const double s = scales[k % scales.size()];
      bool moved = false;
      for (int d = 0; d < D; ++d) {
        double v = anchor[d];
        if (rng.uniform() < p_dim) {
          v += s * rng.normal();
          moved = true;
        }
        C(row, d) = std::clamp(v, lo[d], hi[d]);
      }
      if (!moved) {
        const int d = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(D));
        C(row, d) = std::clamp(anchor[d] + s * rng.normal(), lo[d], hi[d]);
      }
    }
  }

  Eigen::VectorXd mu, var;
  gp.predict_batch(C, mu, var);
  std::vector<double> score(total);
  for (int i = 0; i < total; ++i) {
    const double s = std::sqrt(var[i]);
    if (opt.kind == AcquisitionKind::mes) {
      double v = 0.0;
      for (double y : ystar) v += mes_term((y - mu[i]) / s, nullptr);
      score[i] = v / ystar.size();
    } else {
      const double z = (mu[i] - best) / s;
      score[i] = s * (z * 0.5 * std::erfc(-z / std::numbers::sqrt2) + normal_pdf(z));
    }
  }
  std::vector<int> idx(total);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return score[a] > score[b]; });
  if (!std::isfinite(score[idx[0]])) return fallback("non-finite acquisition values; uniform draw");

  LbfgsOptions lo_opt;
  lo_opt.max_iterations = opt.refine_iterations;
  lo_opt.gradient_tolerance = 1e-9;
  out.value = -INFINITY;
  const int refine = std::min(opt.refine_starts, total);
  for (int r = 0; r < refine; ++r) {
    std::vector<double> x0(D);
    for (int d = 0; d < D; ++d) x0[d] = C(idx[r], d);
    auto neg = [&](std::span<const double> x, std::span<double> g) {
      const double v = value(x, g);
      for (auto& gi : g) gi = -gi;
      return -v;
    };
    const auto res = minimize_box(neg, x0, lo, hi, lo_opt);
    double v = -res.value;
    std::vector<double> x = res.x;
    if (!(v >= score[idx[r]])) {
      x = x0;
      v = score[idx[r]];
    }
    if (v > out.value) {
      out.value = v;
      out.x = x;
    }
  }
  for (int d = 0; d < D; ++d) out.x[d] = std::clamp(out.x[d], lo[d], hi[d]);
  return out;
}

}  // namespace sqz::optimizer
