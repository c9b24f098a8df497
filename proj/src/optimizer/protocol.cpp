#include "sqz/optimizer/protocol.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "sqz/common/error.hpp"

namespace sqz::optimizer {
namespace {

const char* kind_name(RecordKind k) {
  switch (k) {
    case RecordKind::baseline: return "baseline";
    case RecordKind::init: return "init";
    case RecordKind::bo: return "bo";
    case RecordKind::failed: return "failed";
  }
  return "?";
}

RecordKind kind_from(const std::string& s) {
  if (s == "baseline") return RecordKind::baseline;
  if (s == "init") return RecordKind::init;
  if (s == "bo") return RecordKind::bo;
  if (s == "failed") return RecordKind::failed;
  throw ConfigError("unknown record kind: " + s);
}

nlohmann::json num(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }
double num_from(const nlohmann::json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

TraceRecord record_from_json(const nlohmann::json& j) {
  TraceRecord r;
  r.run = j.at("run");
  r.iteration = j.at("iteration");
  r.kind = kind_from(j.at("kind"));
  r.beta = j.at("beta").get<std::vector<double>>();
  if (!j.at("squeezing_db").is_null()) {
    bench::Measurement m;
    m.shot_dbm = j.at("shot_dbm");
    m.sqz_dbm = j.at("sqz_dbm");
    m.squeezing_db = j.at("squeezing_db");
    m.lo_power_at_detector = j.at("lo_power_at_detector");
    m.timestamp = j.at("timestamp");
    r.measurement = m;
  }
  r.best_so_far = num_from(j.at("best_so_far"));
  r.debug_eta = num_from(j.at("debug_eta_ground_truth"));
  r.error = j.value("error", "");
  return r;
}

nlohmann::json summary_to_json(const RunSummary& s) {
  return {{"run", s.run},           {"budget", s.budget},   {"best_iteration", s.best_iteration},
          {"baseline_db", s.baseline_db}, {"best_db", s.best_db}, {"best_beta", s.best_beta},
          {"eta_after_debug", s.eta_after}};
}

RunSummary summary_from_json(const nlohmann::json& j) {
  RunSummary s;
  s.run = j.at("run");
  s.budget = j.at("budget");
  s.best_iteration = j.at("best_iteration");
  s.baseline_db = j.at("baseline_db");
  s.best_db = j.at("best_db");
  s.best_beta = j.at("best_beta").get<std::vector<double>>();
  s.eta_after = j.at("eta_after_debug");
  return s;
}

// Baseline measurement of the current starting mask.
TraceRecord measure_baseline(bench::Bench& b, int run) {
  TraceRecord r;
  r.run = run;
  r.iteration = 0;
  r.kind = RecordKind::baseline;
  r.beta.assign(b.space().dimension(), 0.0);
  r.measurement = b.measure(maskgen::MaskParams::zeros(b.space()));
  r.best_so_far = r.measurement->squeezing_db;
  r.debug_eta = b.last_debug_eta();
  return r;
}

}  // namespace

nlohmann::json record_to_json(const TraceRecord& r) {
  nlohmann::json j;
  j["run"] = r.run;
  j["iteration"] = r.iteration;
  j["kind"] = kind_name(r.kind);
  j["beta"] = r.beta;
  if (r.measurement) {
    j["shot_dbm"] = r.measurement->shot_dbm;
    j["sqz_dbm"] = r.measurement->sqz_dbm;
    j["squeezing_db"] = r.measurement->squeezing_db;
    j["lo_power_at_detector"] = r.measurement->lo_power_at_detector;
    j["timestamp"] = r.measurement->timestamp;
  } else {
    for (const char* k : {"shot_dbm", "sqz_dbm", "squeezing_db", "lo_power_at_detector", "timestamp"})
      j[k] = nullptr;
  }
  j["best_so_far"] = num(r.best_so_far);
  j["debug_eta_ground_truth"] = num(r.debug_eta);
  if (!r.error.empty()) j["error"] = r.error;
  return j;
}

std::string archive_ndjson(const RunArchive& a) {
  std::string out;
  for (const auto& r : a.records) {
    out += record_to_json(r).dump();
    out += '\n';
  }
  return out;
}

nlohmann::json archive_summary(const RunArchive& a) {
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& s : a.runs) runs.push_back(summary_to_json(s));
  return {{"runs", runs}, {"final_db", a.final_db}, {"records", a.records.size()}, {"warnings", a.warnings}};
}

void write_archive(const std::filesystem::path& dir, const RunArchive& a, const nlohmann::json& manifest) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  auto write = [](const std::filesystem::path& p, const std::string& text) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw IoError("cannot open " + p.string() + " for writing");
    f << text;
    if (!f) throw IoError("write failed: " + p.string());
  };
  write(dir / "trace.ndjson", archive_ndjson(a));
  write(dir / "manifest.json", manifest.dump(2) + "\n");
}

RunArchive run_protocol(bench::Bench& b, const std::vector<int>& schedule, const ProtocolOptions& opt,
                        const CheckpointFn& checkpoint, const nlohmann::json* resume) {
  for (int n : schedule)
    if (n < 1 || n > 10000) throw ConfigError("schedule: iterations per run must be in [1, 10000]");
  const auto& space = b.space();
  const auto bounds = space.bounds();
  const auto zero_unit = to_unit(bounds, maskgen::MaskParams::zeros(space).flatten());

  RunArchive archive;
  Rng rng(opt.optimizer_seed);
  std::size_t first_run = 0;
  std::optional<OptState> resumed_state;
  std::optional<TraceRecord> resumed_baseline;

  if (resume) {
    try {
      if (resume->at("schedule").get<std::vector<int>>() != schedule)
        throw ConfigError("checkpoint: schedule differs from the requested one");
      for (const auto& r : resume->at("records")) archive.records.push_back(record_from_json(r));
      for (const auto& s : resume->at("runs")) archive.runs.push_back(summary_from_json(s));
      archive.warnings = resume->value("warnings", std::vector<std::string>{});
      // replay the completed runs' mask and alignment updates
      for (const auto& s : archive.runs) {
        b.accumulate(maskgen::MaskParams::unflatten(space, s.best_beta));
        if (opt.realign) b.realign();
      }
      first_run = archive.runs.size();
      if (resume->contains("current")) {
        const auto& c = (*resume)["current"];
        resumed_state = state_from_json(c.at("state"));
        resumed_baseline = record_from_json(c.at("baseline"));
      }
      b.rng().load_state(resume->at("bench_rng"));
      b.set_timestamp(resume->at("bench_clock").get<std::uint64_t>());
      rng.load_state(resume->at("optimizer_rng"));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("checkpoint: ") + e.what());
    }
  }

  for (std::size_t ri = first_run; ri < schedule.size(); ++ri) {
    const int run = static_cast<int>(ri) + 1;
    OptimizerConfig cfg = opt.optimizer;
    cfg.budget = schedule[ri];
    if (opt.random_search) cfg.n_init = cfg.budget;
    cfg.n_init = std::min(cfg.resolved_n_init(), cfg.budget);

    TraceRecord base;
    OptState state;
    if (resumed_state) {
      state = std::move(*resumed_state);
      base = std::move(*resumed_baseline);
      resumed_state.reset();
    } else {
      base = measure_baseline(b, run);
      archive.records.push_back(base);
      state = make_state(cfg, bounds);
      Evaluation prior;
      prior.unit = zero_unit;
      prior.value = base.measurement->squeezing_db;
      prior.kind = EvalKind::init;
      state.prior.push_back(prior);
    }

    double best_db = base.measurement->squeezing_db;
    int best_iter = 0;
    std::vector<double> best_beta = base.beta;
    for (const auto& r : archive.records)
      if (r.run == run && r.iteration > 0 && r.measurement && r.measurement->squeezing_db > best_db) {
        best_db = r.measurement->squeezing_db;
        best_iter = r.iteration;
        best_beta = r.beta;
      }

    TraceRecord pending;
    auto f = [&](std::span<const double> x, EvalKind kind) {
      pending = TraceRecord{};
      pending.run = run;
      pending.iteration = static_cast<int>(state.history.size()) + 1;
      pending.kind = kind == EvalKind::init ? RecordKind::init : RecordKind::bo;
      pending.beta.assign(x.begin(), x.end());
      try {
        pending.measurement = b.measure(maskgen::MaskParams::unflatten(space, x));
        pending.debug_eta = b.last_debug_eta();
      } catch (const std::runtime_error& e) {
        pending.kind = RecordKind::failed;
        pending.error = e.what();
        pending.debug_eta = std::numeric_limits<double>::quiet_NaN();
        throw;
      }
      return pending.measurement->squeezing_db;
    };
    auto after = [&](const OptState& s) {
      if (pending.measurement && pending.measurement->squeezing_db > best_db) {
        best_db = pending.measurement->squeezing_db;
        best_iter = pending.iteration;
        best_beta = pending.beta;
      }
      pending.best_so_far = best_db;
      archive.records.push_back(pending);
      if (checkpoint) {
        nlohmann::json j;
        j["schedule"] = schedule;
        j["records"] = nlohmann::json::array();
        for (const auto& r : archive.records) j["records"].push_back(record_to_json(r));
        j["runs"] = nlohmann::json::array();
        for (const auto& r : archive.runs) j["runs"].push_back(summary_to_json(r));
        j["warnings"] = archive.warnings;
        if (!s.done()) j["current"] = {{"state", state_to_json(s)}, {"baseline", record_to_json(base)}};
        j["bench_rng"] = b.rng().save_state();
        j["bench_clock"] = b.timestamp();
        j["optimizer_rng"] = rng.save_state();
        // a finished run is checkpointed after its accumulate/realign instead
        if (!s.done()) checkpoint(j);
      }
    };
    optimize(state, f, rng, after);
    for (const auto& w : state.warnings) archive.warnings.push_back("run " + std::to_string(run) + ": " + w);

    RunSummary sum;
    sum.run = run;
    sum.budget = cfg.budget;
    sum.best_iteration = best_iter;
    sum.baseline_db = base.measurement->squeezing_db;
    sum.best_db = best_db;
    sum.best_beta = best_beta;
    b.accumulate(maskgen::MaskParams::unflatten(space, best_beta));
    if (opt.realign) b.realign();
    sum.eta_after = b.debug_eta(maskgen::MaskParams::zeros(space));
    archive.runs.push_back(sum);
    if (checkpoint) {
      nlohmann::json j;
      j["schedule"] = schedule;
      j["records"] = nlohmann::json::array();
      for (const auto& r : archive.records) j["records"].push_back(record_to_json(r));
      j["runs"] = nlohmann::json::array();
      for (const auto& r : archive.runs) j["runs"].push_back(summary_to_json(r));
      j["warnings"] = archive.warnings;
      j["bench_rng"] = b.rng().save_state();
      j["bench_clock"] = b.timestamp();
      j["optimizer_rng"] = rng.save_state();
      checkpoint(j);
    }
  }

  const auto fin = measure_baseline(b, static_cast<int>(schedule.size()) + 1);
  archive.records.push_back(fin);
  archive.final_db = fin.measurement->squeezing_db;
  return archive;
}

}  // namespace sqz::optimizer
