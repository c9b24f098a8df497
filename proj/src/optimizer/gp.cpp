#include "sqz/optimizer/gp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "sqz/common/error.hpp"
#include "sqz/optimizer/lbfgs.hpp"

namespace sqz::optimizer {
namespace {

const double kSqrt5 = std::sqrt(5.0);

// Squared scaled distances between rows of A and rows of B.
Eigen::MatrixXd scaled_sqdist(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                              const Eigen::VectorXd& inv_ell) {
  const Eigen::MatrixXd As = A * inv_ell.asDiagonal();
  const Eigen::MatrixXd Bs = B * inv_ell.asDiagonal();
  Eigen::MatrixXd R2 = -2.0 * As * Bs.transpose();
  R2.colwise() += As.rowwise().squaredNorm();
  R2.rowwise() += Bs.rowwise().squaredNorm().transpose();
  return R2.cwiseMax(0.0);
}

Eigen::VectorXd inv_lengthscales(const GpHyper& h) {
  Eigen::VectorXd v(h.lengthscales.size());
  for (std::size_t d = 0; d < h.lengthscales.size(); ++d) v[d] = 1.0 / h.lengthscales[d];
  return v;
}

constexpr double kJitterMax = 1e-2;

// Cholesky of K, adding jitter 1e-8, 1e-7, ... 1e-2 on failure.
bool factorize_with_jitter(const Eigen::MatrixXd& K, Eigen::LLT<Eigen::MatrixXd>& llt, double& jitter) {
  llt.compute(K);
  jitter = 0.0;
  if (llt.info() == Eigen::Success) return true;
  const Eigen::Index n = K.rows();
  for (double j = 1e-8; j <= kJitterMax * 1.0001; j *= 10.0) {
    llt.compute(K + j * Eigen::MatrixXd::Identity(n, n));
    if (llt.info() == Eigen::Success) {
      jitter = j;
      return true;
    }
  }
  return false;
}

std::vector<double> pack(const GpHyper& h) {
  std::vector<double> v;
  for (double l : h.lengthscales) v.push_back(std::log(l));
  v.push_back(std::log(h.signal_var));
  v.push_back(std::log(h.noise_var));
  return v;
}

GpHyper unpack(std::span<const double> v) {
  GpHyper h;
  const std::size_t D = v.size() - 2;
  for (std::size_t d = 0; d < D; ++d) h.lengthscales.push_back(std::exp(v[d]));
  h.signal_var = std::exp(v[D]);
  h.noise_var = std::exp(v[D + 1]);
  return h;
}

}  // namespace

double matern52(double r, double signal_var) {
  return signal_var * (1.0 + kSqrt5 * r + 5.0 / 3.0 * r * r) * std::exp(-kSqrt5 * r);
}

double log_marginal_likelihood(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                               const GpHyper& h, std::vector<double>* grad) {
  const Eigen::Index n = X.rows(), D = X.cols();
  const Eigen::VectorXd inv_ell = inv_lengthscales(h);
  const Eigen::MatrixXd R2 = scaled_sqdist(X, X, inv_ell);
  const Eigen::MatrixXd R = R2.cwiseSqrt();
  const Eigen::MatrixXd E = (-kSqrt5 * R).array().exp().matrix();
  const Eigen::MatrixXd Kf =
      (h.signal_var * (1.0 + kSqrt5 * R.array() + 5.0 / 3.0 * R2.array()) * E.array()).matrix();
  Eigen::MatrixXd K = Kf;
  K.diagonal().array() += h.noise_var;
  Eigen::LLT<Eigen::MatrixXd> llt;
  double jitter;
  if (!factorize_with_jitter(K, llt, jitter)) return -INFINITY;
  const Eigen::VectorXd alpha = llt.solve(y);
  const Eigen::MatrixXd& L = llt.matrixLLT();
  double logdet = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) logdet += std::log(L(i, i));
  const double lml = -0.5 * y.dot(alpha) - logdet - 0.5 * n * std::log(2.0 * std::numbers::pi);
  if (grad) {
    grad->assign(D + 2, 0.0);
    const Eigen::MatrixXd Kinv = llt.solve(Eigen::MatrixXd::Identity(n, n));
    const Eigen::MatrixXd A = alpha * alpha.transpose() - Kinv;
    // dK/dlog l_d = G o Delta_d^2 / l_d^2
    const Eigen::MatrixXd G =
        (h.signal_var * 5.0 / 3.0 * (1.0 + kSqrt5 * R.array()) * E.array()).matrix();
    const Eigen::MatrixXd B = A.cwiseProduct(G);
    const Eigen::VectorXd rs = B.rowwise().sum();
    const Eigen::MatrixXd BX = B * X;
    for (Eigen::Index d = 0; d < D; ++d) {
      const double s = X.col(d).cwiseAbs2().dot(rs) - X.col(d).dot(BX.col(d));
      (*grad)[d] = s * inv_ell[d] * inv_ell[d];
    }
    (*grad)[D] = 0.5 * A.cwiseProduct(Kf).sum();
    (*grad)[D + 1] = 0.5 * h.noise_var * A.trace();
  }
  return lml;
}

GpModel GpModel::fit(const Eigen::MatrixXd& X, std::span<const double> y, const GpFitOptions& opt,
                     Rng& rng, const GpHyper* warm) {
  const Eigen::Index n = X.rows(), D = X.cols();
  require(n >= (opt.optimize ? 2 : 1), "fit_gp: need at least 2 observations");
  require(static_cast<Eigen::Index>(y.size()) == n, "fit_gp: size mismatch");
  GpModel m;
  m.X_ = X;
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : y) ss += (v - mean) * (v - mean);
  const double sd = n > 1 ? std::sqrt(ss / (n - 1)) : 0.0;
  if (opt.prior_mean == PriorMean::minimum) mean = *std::min_element(y.begin(), y.end());
  m.mean_ = mean;
  m.scale_ = sd > 1e-12 * std::max(1.0, std::abs(mean)) ? sd : 1.0;
  m.y_.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) m.y_[i] = (y[i] - mean) / m.scale_;

  const auto& b = opt.bounds;
  std::vector<double> lo, hi;
  for (Eigen::Index d = 0; d < D; ++d) {
    lo.push_back(std::log(b.lengthscale_lo));
    hi.push_back(std::log(b.lengthscale_hi));
  }
  lo.push_back(std::log(b.signal_lo));
  hi.push_back(std::log(b.signal_hi));
  lo.push_back(std::log(b.noise_lo));
  hi.push_back(std::log(b.noise_hi));

  std::vector<std::vector<double>> starts;
  if (warm && static_cast<Eigen::Index>(warm->lengthscales.size()) == D) starts.push_back(pack(*warm));
  GpHyper def{std::vector<double>(D, 1.0), 1.0, 1e-2};
  starts.push_back(pack(def));
  if (opt.optimize)
    for (int r = 0; r < opt.random_restarts; ++r) {
      GpHyper h;
      for (Eigen::Index d = 0; d < D; ++d) h.lengthscales.push_back(std::exp(rng.uniform(std::log(0.1), std::log(10.0))));
      h.signal_var = std::exp(rng.uniform(std::log(0.3), std::log(3.0)));
      h.noise_var = std::exp(rng.uniform(std::log(1e-4), std::log(0.1)));
      starts.push_back(pack(h));
    }
  for (auto& s : starts)
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = std::clamp(s[i], lo[i], hi[i]);

  const Eigen::VectorXd& yy = m.y_;
  auto objective = [&](std::span<const double> v, std::span<double> g) -> double {
    std::vector<double> gr;
    const double l = log_marginal_likelihood(X, yy, unpack(v), &gr);
    if (!std::isfinite(l)) return INFINITY;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = -gr[i];
    return -l;
  };

  double best = INFINITY;
  std::vector<double> best_v;
  LbfgsOptions lo_opt;
  lo_opt.max_iterations = opt.max_iterations;
  lo_opt.gradient_tolerance = 1e-5;
  lo_opt.value_tolerance = 1e-9;
  for (const auto& s : starts) {
    std::vector<double> v = s;
    double val;
    if (opt.optimize) {
      const auto r = minimize_box(objective, s, lo, hi, lo_opt);
      v = r.x;
      val = r.value;
    } else {
      std::vector<double> g(s.size());
      val = objective(s, g);
    }
    if (val < best) {
      best = val;
      best_v = v;
    }
    if (!opt.optimize) break;
  }
  if (!std::isfinite(best)) throw NumericalError("GP covariance not positive definite after jitter escalation");
  m.hyper_ = unpack(best_v);
  m.lml_ = -best;
  m.factorize();
  return m;
}

void GpModel::factorize() {
  const Eigen::VectorXd inv_ell = inv_lengthscales(hyper_);
  const Eigen::MatrixXd R = scaled_sqdist(X_, X_, inv_ell).cwiseSqrt();
  Eigen::MatrixXd K = R.unaryExpr([&](double r) { return matern52(r, hyper_.signal_var); });
  K.diagonal().array() += hyper_.noise_var;
  if (!factorize_with_jitter(K, llt_, jitter_))
    throw NumericalError("GP covariance not positive definite after jitter escalation");
  alpha_ = llt_.solve(y_);
}

Posterior GpModel::predict(std::span<const double> x) const {
  Eigen::MatrixXd q(1, dim());
  for (int d = 0; d < dim(); ++d) q(0, d) = x[d];
  Eigen::VectorXd m, v;
  predict_batch(q, m, v);
  return {m[0], v[0]};
}

void GpModel::predict_batch(const Eigen::MatrixXd& Xq, Eigen::VectorXd& mean, Eigen::VectorXd& var) const {
  const Eigen::VectorXd inv_ell = inv_lengthscales(hyper_);
  const Eigen::MatrixXd R = scaled_sqdist(Xq, X_, inv_ell).cwiseSqrt();
  const Eigen::MatrixXd Ks = R.unaryExpr([&](double r) { return matern52(r, hyper_.signal_var); });
  mean = Ks * alpha_;
  const Eigen::MatrixXd V = llt_.matrixL().solve(Ks.transpose());
  var = (hyper_.signal_var - V.colwise().squaredNorm().array()).max(1e-12 * hyper_.signal_var).matrix().transpose();
}

PosteriorGrad GpModel::predict_grad(std::span<const double> x) const {
  const int n = size(), D = dim();
  Eigen::VectorXd k(n), c(n);
  for (int i = 0; i < n; ++i) {
    double r2 = 0.0;
    for (int d = 0; d < D; ++d) {
      const double t = (x[d] - X_(i, d)) / hyper_.lengthscales[d];
      r2 += t * t;
    }
    const double r = std::sqrt(r2);
    const double e = std::exp(-kSqrt5 * r);
    k[i] = hyper_.signal_var * (1.0 + kSqrt5 * r + 5.0 / 3.0 * r2) * e;
    c[i] = -hyper_.signal_var * 5.0 / 3.0 * (1.0 + kSqrt5 * r) * e;  // dk/dx_d = c (x_d - X_d)/l_d^2
  }
  const Eigen::VectorXd v = llt_.matrixL().solve(k);
  const Eigen::VectorXd w = llt_.matrixU().solve(v);  // K^-1 k
  PosteriorGrad out;
  out.mean = k.dot(alpha_);
  out.var = std::max(hyper_.signal_var - v.squaredNorm(), 1e-12 * hyper_.signal_var);
  const Eigen::VectorXd ac = alpha_.cwiseProduct(c), wc = w.cwiseProduct(c);
  const Eigen::RowVectorXd acX = ac.transpose() * X_, wcX = wc.transpose() * X_;
  const double sac = ac.sum(), swc = wc.sum();
  out.dmean.resize(D);
  out.dvar.resize(D);
  for (int d = 0; d < D; ++d) {
    const double il2 = 1.0 / (hyper_.lengthscales[d] * hyper_.lengthscales[d]);
    out.dmean[d] = il2 * (x[d] * sac - acX[d]);
    out.dvar[d] = -2.0 * il2 * (x[d] * swc - wcX[d]);
  }
  return out;
}

}  // namespace sqz::optimizer
