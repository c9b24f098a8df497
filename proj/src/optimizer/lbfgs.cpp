#include "sqz/optimizer/lbfgs.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "sqz/common/error.hpp"

namespace sqz::optimizer {
namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

struct Pair {
  std::vector<double> s, y;
  double rho;
};

}  // namespace

LbfgsResult minimize_box(const Objective& f, std::vector<double> x, std::span<const double> lo,
                         std::span<const double> hi, const LbfgsOptions& opt) {
  const std::size_t n = x.size();
  require(lo.size() == n && hi.size() == n, "minimize_box: bound size mismatch");
  auto project = [&](std::vector<double>& v) {
    for (std::size_t i = 0; i < n; ++i) v[i] = std::clamp(v[i], lo[i], hi[i]);
  };
  project(x);
  std::vector<double> g(n), gn(n), d(n), xn(n), q(n);
  double fx = f(x, g);
  int evals = 1;
  std::deque<Pair> mem;
  LbfgsResult res{x, fx, 0, evals, false};
  if (!std::isfinite(fx)) return res;

  auto at_bound = [&](std::size_t i, double gi) {
    return (x[i] <= lo[i] && gi > 0) || (x[i] >= hi[i] && gi < 0);
  };

  int it = 0;
  for (; it < opt.max_iterations; ++it) {
    double pg = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (!at_bound(i, g[i])) pg = std::max(pg, std::abs(g[i]));
    if (pg <= opt.gradient_tolerance) {
      res.converged = true;
      break;
    }
    // two-loop recursion on the free subspace
    for (std::size_t i = 0; i < n; ++i) q[i] = at_bound(i, g[i]) ? 0.0 : g[i];
    std::vector<double> alpha(mem.size());
    for (std::size_t k = mem.size(); k-- > 0;) {
      alpha[k] = mem[k].rho * dot(mem[k].s, q);
      for (std::size_t i = 0; i < n; ++i) q[i] -= alpha[k] * mem[k].y[i];
    }
    double gamma = 1.0;
    if (!mem.empty()) gamma = dot(mem.back().s, mem.back().y) / dot(mem.back().y, mem.back().y);
    for (std::size_t i = 0; i < n; ++i) q[i] *= gamma;
    for (std::size_t k = 0; k < mem.size(); ++k) {
      const double beta = mem[k].rho * dot(mem[k].y, q);
      for (std::size_t i = 0; i < n; ++i) q[i] += mem[k].s[i] * (alpha[k] - beta);
    }
    for (std::size_t i = 0; i < n; ++i) d[i] = at_bound(i, g[i]) ? 0.0 : -q[i];
    if (dot(d, g) >= 0.0) {
      mem.clear();
      for (std::size_t i = 0; i < n; ++i) d[i] = at_bound(i, g[i]) ? 0.0 : -g[i];
    }
    // first step of a fresh memory: unit step along a scaled gradient
    double t = 1.0;
    if (mem.empty()) {
      double dn = 0.0;
      for (double v : d) dn = std::max(dn, std::abs(v));
      if (dn > 0) t = std::min(1.0, 0.1 / dn);
    }
    bool accepted = false;
    double fn = fx;
    for (int ls = 0; ls < 40; ++ls) {
      for (std::size_t i = 0; i < n; ++i) xn[i] = x[i] + t * d[i];
      project(xn);
      double decrease = 0.0;
      for (std::size_t i = 0; i < n; ++i) decrease += g[i] * (xn[i] - x[i]);
      if (decrease >= 0.0) {
        t *= 0.5;
        continue;
      }
      fn = f(xn, gn);
      ++evals;
      if (std::isfinite(fn) && fn <= fx + 1e-4 * decrease) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      if (mem.empty()) break;
      mem.clear();
      continue;
    }
    Pair p{std::vector<double>(n), std::vector<double>(n), 0.0};
    for (std::size_t i = 0; i < n; ++i) {
      p.s[i] = xn[i] - x[i];
      p.y[i] = gn[i] - g[i];
    }
    const double sy = dot(p.s, p.y);
    if (sy > 1e-12 * std::sqrt(dot(p.s, p.s) * dot(p.y, p.y))) {
      p.rho = 1.0 / sy;
      mem.push_back(std::move(p));
      if (static_cast<int>(mem.size()) > opt.memory) mem.pop_front();
    }
    const double rel = (fx - fn) / std::max({std::abs(fx), std::abs(fn), 1.0});
    x.swap(xn);
    g.swap(gn);
    fx = fn;
    if (rel <= opt.value_tolerance) {
      res.converged = true;
      ++it;
      break;
    }
  }
  res.x = x;
  res.value = fx;
  res.iterations = it;
  res.evaluations = evals;
  return res;
}

}  // namespace sqz::optimizer
