#include "sqz/optimizer/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sqz/common/error.hpp"

namespace sqz::optimizer {

int OptimizerConfig::resolved_n_init() const {
  if (n_init >= 0) return n_init;
  return std::max(1, static_cast<int>(std::lround(0.1 * budget)));
}

void OptimizerConfig::validate() const {
  const int ni = resolved_n_init();
  require(ni >= 1 && budget >= ni, "optimizer: need budget >= n_init >= 1");
  require(full_refit_until >= 0 && refit_every >= 1, "optimizer: bad refit cadence");
}

std::optional<double> OptState::best_value() const {
  if (best < 0) return std::nullopt;
  return history[best].value;
}

std::vector<double> to_unit(std::span<const Bound> bounds, std::span<const double> x) {
  require(bounds.size() == x.size(), "to_unit: size mismatch");
  std::vector<double> u(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    u[i] = std::clamp((x[i] - bounds[i].lo) / (bounds[i].hi - bounds[i].lo), 0.0, 1.0);
  return u;
}

std::vector<double> from_unit(std::span<const Bound> bounds, std::span<const double> u) {
  require(bounds.size() == u.size(), "from_unit: size mismatch");
  std::vector<double> x(u.size());
  for (std::size_t i = 0; i < u.size(); ++i)
    x[i] = std::clamp(bounds[i].lo + u[i] * (bounds[i].hi - bounds[i].lo), bounds[i].lo, bounds[i].hi);
  return x;
}

OptState make_state(const OptimizerConfig& cfg, std::vector<Bound> bounds) {
  cfg.validate();
  require(!bounds.empty(), "optimizer: empty search space");
  for (const auto& b : bounds) require(b.hi > b.lo, "optimizer: empty bound interval");
  OptState s;
  s.config = cfg;
  s.bounds = std::move(bounds);
  return s;
}

namespace {

std::optional<GpModel> fit_model(OptState& s, Rng& rng) {
  std::vector<const Evaluation*> obs;
  for (const auto& e : s.prior)
    if (e.kind != EvalKind::failed) obs.push_back(&e);
  for (const auto& e : s.history)
    if (e.kind != EvalKind::failed) obs.push_back(&e);
  if (obs.size() < 2) return std::nullopt;
  const int D = static_cast<int>(s.bounds.size());
  Eigen::MatrixXd X(obs.size(), D);
  std::vector<double> y(obs.size());
  for (std::size_t i = 0; i < obs.size(); ++i) {
    for (int d = 0; d < D; ++d) X(i, d) = obs[i]->unit[d];
    y[i] = s.config.transform == TargetTransform::neg_linear_power ? -std::pow(10.0, -obs[i]->value / 10.0)
                                                                     : obs[i]->value;
  }
  GpFitOptions opt = s.config.gp;
  const int n = static_cast<int>(obs.size());
  const int it = static_cast<int>(s.history.size());
  if (s.hyper && n > s.config.full_refit_until && it % s.config.refit_every != 0) opt.optimize = false;
  auto m = GpModel::fit(X, y, opt, rng, s.hyper ? &*s.hyper : nullptr);
  s.hyper = m.hyper();
  return m;
}

// Best observed value over prior and budgeted evaluations.
std::optional<double> incumbent(const OptState& s) {
  std::optional<double> best;
  for (const auto* list : {&s.prior, &s.history})
    for (const auto& e : *list)
      if (e.kind != EvalKind::failed && (!best || e.value > *best)) best = e.value;
  return best;
}

// Box around the training input with the highest posterior mean (less
// noise-chasing than the highest observation).
Region trust_region(const OptState& s, const GpModel& gp) {
  const int D = gp.dim();
  Eigen::VectorXd mu, var;
  gp.predict_batch(gp.inputs(), mu, var);
  Eigen::Index c = 0;
  mu.maxCoeff(&c);
  const auto& ls = gp.hyper().lengthscales;
  double log_mean = 0.0;
  for (double l : ls) log_mean += std::log(l);
  log_mean /= D;
  Region r{std::vector<double>(D), std::vector<double>(D)};
  for (int d = 0; d < D; ++d) {
    const double half = 0.5 * s.tr_length * std::exp(std::log(ls[d]) - log_mean);
    r.lo[d] = std::clamp(gp.inputs()(c, d) - half, 0.0, 1.0);
    r.hi[d] = std::clamp(gp.inputs()(c, d) + half, 0.0, 1.0);
  }
  return r;
}

void update_trust_region(OptState& s, std::optional<double> before, const Evaluation& e) {
  const auto& t = s.config.trust_region;
  const bool improved = e.kind != EvalKind::failed && before &&
                        e.value > *before + t.min_improvement * std::abs(*before);
  if (improved) {
    ++s.tr_successes;
    s.tr_failures = 0;
  } else {
    ++s.tr_failures;
    s.tr_successes = 0;
  }
  if (s.tr_successes >= t.success_tolerance) {
    s.tr_length = std::min(2.0 * s.tr_length, t.max_length);
    s.tr_successes = 0;
  } else if (s.tr_failures >= t.failure_tolerance) {
    s.tr_length *= 0.5;
    s.tr_failures = 0;
  }
  if (s.tr_length < t.min_length) s.tr_length = t.init_length;
}

}  // namespace

void step(OptState& s, const BlackBox& f, Rng& rng) {
  require(!s.done(), "optimizer: budget exhausted");
  const int D = static_cast<int>(s.bounds.size());
  const int it = static_cast<int>(s.history.size());
  Evaluation e;
  e.kind = it < s.config.resolved_n_init() ? EvalKind::init : EvalKind::bo;
  if (e.kind == EvalKind::init) {
    e.unit.resize(D);
    for (auto& v : e.unit) v = rng.uniform();
  } else {
    std::optional<GpModel> model;
    try {
      model = fit_model(s, rng);
    } catch (const NumericalError& ex) {
      s.warnings.push_back(std::string("iteration ") + std::to_string(it + 1) + ": " + ex.what());
    }
    if (model) {
      std::optional<Region> region;
      if (s.config.trust_region.enabled) {
        if (s.tr_length <= 0.0) s.tr_length = s.config.trust_region.init_length;
        region = trust_region(s, *model);
      }
      auto a = acquire_next(*model, s.config.acquisition, rng, region ? &*region : nullptr);
      if (a.fallback) s.warnings.push_back("iteration " + std::to_string(it + 1) + ": " + a.warning);
      e.unit = std::move(a.x);
    } else {
      e.unit.resize(D);
      for (auto& v : e.unit) v = rng.uniform();
    }
  }
  const auto x = from_unit(s.bounds, e.unit);
  const EvalKind planned = e.kind;
  const auto before = incumbent(s);
  try {
    e.value = f(x, planned);
    if (!std::isfinite(e.value)) throw NumericalError("objective returned a non-finite value");
  } catch (const std::runtime_error& ex) {
    e.kind = EvalKind::failed;
    e.value = std::numeric_limits<double>::quiet_NaN();
    e.error = ex.what();
  }
  if (planned == EvalKind::bo && s.config.trust_region.enabled && s.tr_length > 0.0)
    update_trust_region(s, before, e);
  s.history.push_back(std::move(e));
  const auto& last = s.history.back();
  if (last.kind != EvalKind::failed && (s.best < 0 || last.value > s.history[s.best].value))
    s.best = static_cast<int>(s.history.size()) - 1;
}

void optimize(OptState& s, const BlackBox& f, Rng& rng,
              const std::function<void(const OptState&)>& after_step) {
  s.config.validate();
  while (!s.done()) {
    step(s, f, rng);
    if (after_step) after_step(s);
  }
}

// ---- serialization ------------------------------------------------------

namespace {

const char* kind_name(EvalKind k) {
  switch (k) {
    case EvalKind::init: return "init";
    case EvalKind::bo: return "bo";
    case EvalKind::failed: return "failed";
  }
  return "?";
}

EvalKind kind_from(const std::string& s) {
  if (s == "init") return EvalKind::init;
  if (s == "bo") return EvalKind::bo;
  if (s == "failed") return EvalKind::failed;
  throw ConfigError("unknown evaluation kind: " + s);
}

nlohmann::json eval_to_json(const Evaluation& e) {
  nlohmann::json j{{"unit", e.unit}, {"kind", kind_name(e.kind)}};
  j["value"] = std::isfinite(e.value) ? nlohmann::json(e.value) : nlohmann::json(nullptr);
  if (!e.error.empty()) j["error"] = e.error;
  return j;
}

Evaluation eval_from_json(const nlohmann::json& j) {
  Evaluation e;
  e.unit = j.at("unit").get<std::vector<double>>();
  e.kind = kind_from(j.at("kind").get<std::string>());
  e.value = j.at("value").is_null() ? std::numeric_limits<double>::quiet_NaN() : j.at("value").get<double>();
  e.error = j.value("error", "");
  return e;
}

}  // namespace

nlohmann::json config_to_json(const OptimizerConfig& c) {
  const auto& a = c.acquisition;
  const auto& g = c.gp;
  return {
      {"budget", c.budget},
      {"n_init", c.n_init},
      {"full_refit_until", c.full_refit_until},
      {"refit_every", c.refit_every},
      {"transform", c.transform == TargetTransform::none ? "none" : "neg_linear_power"},
      {"acquisition",
       {{"kind", a.kind == AcquisitionKind::mes ? "mes" : "ei"},
        {"mes_samples", a.mes_samples},
        {"gumbel_points", a.gumbel_points},
        {"random_starts", a.random_starts},
        {"anchor_points", a.anchor_points},
        {"perturbations", a.perturbations},
        {"perturbation_scales", a.perturbation_scales},
        {"perturbed_dims", a.perturbed_dims},
        {"refine_starts", a.refine_starts},
        {"refine_iterations", a.refine_iterations}}},
      {"gp",
       {{"prior_mean", g.prior_mean == PriorMean::minimum ? "minimum" : "sample_mean"},
        {"random_restarts", g.random_restarts},
        {"max_iterations", g.max_iterations},
        {"lengthscale_bounds", {g.bounds.lengthscale_lo, g.bounds.lengthscale_hi}},
        {"signal_var_bounds", {g.bounds.signal_lo, g.bounds.signal_hi}},
        {"noise_var_bounds", {g.bounds.noise_lo, g.bounds.noise_hi}}}},
      {"trust_region",
       {{"enabled", c.trust_region.enabled},
        {"init_length", c.trust_region.init_length},
        {"min_length", c.trust_region.min_length},
        {"max_length", c.trust_region.max_length},
        {"success_tolerance", c.trust_region.success_tolerance},
        {"failure_tolerance", c.trust_region.failure_tolerance},
        {"min_improvement", c.trust_region.min_improvement}}},
  };
}

OptimizerConfig config_from_json(const nlohmann::json& j) {
  OptimizerConfig c;
  auto check_keys = [](const nlohmann::json& o, std::initializer_list<const char*> keys, const char* where) {
    if (!o.is_object()) throw ConfigError(std::string(where) + ": expected an object");
    for (auto it = o.begin(); it != o.end(); ++it) {
      bool known = false;
      for (const char* k : keys) known = known || it.key() == k;
      if (!known) throw ConfigError(std::string(where) + ": unknown key '" + it.key() + "'");
    }
  };
  try {
    check_keys(j, {"budget", "n_init", "full_refit_until", "refit_every", "transform", "acquisition", "gp",
                   "trust_region"},
               "optimizer");
    c.budget = j.value("budget", c.budget);
    c.n_init = j.value("n_init", c.n_init);
    c.full_refit_until = j.value("full_refit_until", c.full_refit_until);
    c.refit_every = j.value("refit_every", c.refit_every);
    const std::string tf = j.value("transform", std::string("none"));
    if (tf == "none") c.transform = TargetTransform::none;
    else if (tf == "neg_linear_power") c.transform = TargetTransform::neg_linear_power;
    else throw ConfigError("optimizer.transform must be 'none' or 'neg_linear_power'");
    if (j.contains("acquisition")) {
      const auto& a = j["acquisition"];
      check_keys(a, {"kind", "mes_samples", "gumbel_points", "random_starts", "anchor_points", "perturbations",
                     "perturbation_scales", "perturbed_dims", "refine_starts", "refine_iterations"},
                 "optimizer.acquisition");
      auto& o = c.acquisition;
      const std::string kind = a.value("kind", std::string("mes"));
      if (kind == "mes") o.kind = AcquisitionKind::mes;
      else if (kind == "ei") o.kind = AcquisitionKind::ei;
      else throw ConfigError("optimizer.acquisition.kind must be 'mes' or 'ei'");
      o.mes_samples = a.value("mes_samples", o.mes_samples);
      o.gumbel_points = a.value("gumbel_points", o.gumbel_points);
      o.random_starts = a.value("random_starts", o.random_starts);
      o.anchor_points = a.value("anchor_points", o.anchor_points);
      o.perturbations = a.value("perturbations", o.perturbations);
      o.perturbation_scales = a.value("perturbation_scales", o.perturbation_scales);
      o.perturbed_dims = a.value("perturbed_dims", o.perturbed_dims);
      o.refine_starts = a.value("refine_starts", o.refine_starts);
      o.refine_iterations = a.value("refine_iterations", o.refine_iterations);
      if (o.mes_samples < 1 || o.gumbel_points < 1 || o.random_starts < 1 || o.anchor_points < 0 ||
          o.perturbations < 0 || o.refine_starts < 1 || o.refine_iterations < 0 ||
          o.perturbation_scales.empty() || !(o.perturbed_dims > 0))
        throw ConfigError("optimizer.acquisition: counts out of range");
      for (double sc : o.perturbation_scales)
        if (!(sc > 0) || !std::isfinite(sc)) throw ConfigError("optimizer.acquisition: perturbation scales must be > 0");
    }
    if (j.contains("gp")) {
      const auto& g = j["gp"];
      check_keys(g, {"prior_mean", "random_restarts", "max_iterations", "lengthscale_bounds", "signal_var_bounds",
                     "noise_var_bounds"},
                 "optimizer.gp");
      auto& o = c.gp;
      const std::string pm = g.value("prior_mean", std::string("minimum"));
      if (pm == "minimum") o.prior_mean = PriorMean::minimum;
      else if (pm == "sample_mean") o.prior_mean = PriorMean::sample_mean;
      else throw ConfigError("optimizer.gp.prior_mean must be 'minimum' or 'sample_mean'");
      o.random_restarts = g.value("random_restarts", o.random_restarts);
      o.max_iterations = g.value("max_iterations", o.max_iterations);
      auto pair = [&](const char* key, double& lo, double& hi) {
        if (!g.contains(key)) return;
        const auto v = g[key].get<std::vector<double>>();
        if (v.size() != 2 || !(v[0] > 0) || !(v[1] > v[0]))
          throw ConfigError(std::string("optimizer.gp.") + key + ": need [lo, hi] with 0 < lo < hi");
        lo = v[0];
        hi = v[1];
      };
      pair("lengthscale_bounds", o.bounds.lengthscale_lo, o.bounds.lengthscale_hi);
      pair("signal_var_bounds", o.bounds.signal_lo, o.bounds.signal_hi);
      pair("noise_var_bounds", o.bounds.noise_lo, o.bounds.noise_hi);
      if (o.random_restarts < 0 || o.max_iterations < 0) throw ConfigError("optimizer.gp: counts out of range");
    }
    if (j.contains("trust_region")) {
      const auto& t = j["trust_region"];
      check_keys(t, {"enabled", "init_length", "min_length", "max_length", "success_tolerance", "failure_tolerance",
                     "min_improvement"},
                 "optimizer.trust_region");
      auto& o = c.trust_region;
      o.enabled = t.value("enabled", o.enabled);
      o.init_length = t.value("init_length", o.init_length);
      o.min_length = t.value("min_length", o.min_length);
      o.max_length = t.value("max_length", o.max_length);
      o.success_tolerance = t.value("success_tolerance", o.success_tolerance);
      o.failure_tolerance = t.value("failure_tolerance", o.failure_tolerance);
      o.min_improvement = t.value("min_improvement", o.min_improvement);
      if (!(o.min_length > 0 && o.init_length >= o.min_length && o.max_length >= o.init_length) ||
          o.success_tolerance < 1 || o.failure_tolerance < 1 || !(o.min_improvement >= 0))
        throw ConfigError("optimizer.trust_region: need 0 < min <= init <= max lengths and tolerances >= 1");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("optimizer config: ") + e.what());
  }
  if (c.budget < 1 || c.budget > 10000) throw ConfigError("optimizer.budget must be in [1, 10000]");
  const int ni = c.resolved_n_init();
  if (ni < 1 || ni > c.budget) throw ConfigError("optimizer.n_init must be in [1, budget]");
  if (c.refit_every < 1 || c.full_refit_until < 0) throw ConfigError("optimizer: bad refit cadence");
  return c;
}

nlohmann::json state_to_json(const OptState& s) {
  nlohmann::json j;
  j["config"] = config_to_json(s.config);
  nlohmann::json b = nlohmann::json::array();
  for (const auto& x : s.bounds) b.push_back({x.lo, x.hi});
  j["bounds"] = b;
  j["prior"] = nlohmann::json::array();
  for (const auto& e : s.prior) j["prior"].push_back(eval_to_json(e));
  j["history"] = nlohmann::json::array();
  for (const auto& e : s.history) j["history"].push_back(eval_to_json(e));
  j["best"] = s.best;
  if (s.hyper)
    j["hyper"] = {{"lengthscales", s.hyper->lengthscales},
                  {"signal_var", s.hyper->signal_var},
                  {"noise_var", s.hyper->noise_var}};
  j["warnings"] = s.warnings;
  j["trust_region"] = {{"length", s.tr_length}, {"successes", s.tr_successes}, {"failures", s.tr_failures}};
  return j;
}

OptState state_from_json(const nlohmann::json& j) {
  try {
    OptState s;
    s.config = config_from_json(j.at("config"));
    for (const auto& b : j.at("bounds")) s.bounds.push_back({b.at(0).get<double>(), b.at(1).get<double>()});
    for (const auto& e : j.at("prior")) s.prior.push_back(eval_from_json(e));
    for (const auto& e : j.at("history")) s.history.push_back(eval_from_json(e));
    s.best = j.at("best").get<int>();
    if (j.contains("hyper")) {
      const auto& h = j["hyper"];
      s.hyper = GpHyper{h.at("lengthscales").get<std::vector<double>>(), h.at("signal_var").get<double>(),
                        h.at("noise_var").get<double>()};
    }
    s.warnings = j.value("warnings", std::vector<std::string>{});
    if (j.contains("trust_region")) {
      const auto& t = j["trust_region"];
      s.tr_length = t.at("length").get<double>();
      s.tr_successes = t.at("successes").get<int>();
      s.tr_failures = t.at("failures").get<int>();
    }
    if (s.best >= static_cast<int>(s.history.size()) || static_cast<int>(s.history.size()) > s.config.budget)
      throw ConfigError("checkpoint: inconsistent optimizer state");
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("checkpoint: ") + e.what());
  }
}

}  // namespace sqz::optimizer
