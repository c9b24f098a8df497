#include "sqz/cli/app.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "sqz/bench/bench.hpp"
#include "sqz/cli/config.hpp"
#include "sqz/common/error.hpp"
#include "sqz/common/hash.hpp"
#include "sqz/fitting/fitting.hpp"
#include "sqz/maskgen/mask.hpp"
#include "sqz/maskgen/mask_io.hpp"
#include "sqz/noise/noise.hpp"
#include "sqz/optimizer/protocol.hpp"

namespace sqz::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kVersion = "1.0.0";

// Write-then-rename so readers never see a half-written file.
void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create " + path.parent_path().string() + ": " + ec.message());
  }
  fs::path tmp = path;
  tmp += ".partial";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw IoError("cannot open " + tmp.string() + " for writing");
    os << text;
    if (!os) throw IoError("write failed: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + ": " + ec.message());
}

std::string read_file(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::string fmt(double v) {
  if (!std::isfinite(v)) return "";
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Options shared by every subcommand that reads a workbench config.
struct CommonOptions {
  std::string config;
  std::uint64_t seed = 0;
  std::string out;
  int grid = 0;
  std::string clearance;
  bool quiet = false;
  CLI::Option* seed_opt = nullptr;
};

void add_common(CLI::App* sub, CommonOptions& o) {
  sub->add_option("-c,--config", o.config, "Workbench config JSON (every key optional except schema_version)")
      ->check(CLI::ExistingFile);
  o.seed_opt = sub->add_option("--seed", o.seed, "Seed (overrides /seed; default 1)");
  sub->add_option("-o,--out", o.out,
                  std::string("Output directory (overrides /output_dir; default sqzbench-out, relative paths "
                              "resolve under $") + kOutputRootEnv + " when set)");
  sub->add_option("--grid", o.grid, "Simulation grid size N for an N x N grid (overrides /layout/grid_size; default 256)");
  sub->add_option("--clearance-db", o.clearance,
                  "Dark-noise clearance in dB, or 'inf' for none (overrides /noise/clearance_db; default 28)");
  sub->add_flag("-q,--quiet", o.quiet, "No progress output on stderr");
}

WorkbenchConfig load_config(const CommonOptions& o) {
  WorkbenchConfig c;
  if (!o.config.empty()) c = config_from_json(read_json_file(o.config));
  if (o.seed_opt && o.seed_opt->count()) c.seed = o.seed;
  if (!o.out.empty()) c.output_dir = o.out;
  if (o.grid) c.bench.layout.grid.nx = c.bench.layout.grid.ny = o.grid;
  if (!o.clearance.empty()) {
    if (o.clearance == "inf") {
      c.bench.clearance_db = std::numeric_limits<double>::infinity();
    } else {
      try {
        std::size_t used = 0;
        c.bench.clearance_db = std::stod(o.clearance, &used);
        if (used != o.clearance.size()) throw std::invalid_argument(o.clearance);
      } catch (const std::logic_error&) {
        throw ConfigError("--clearance-db: expected a number or 'inf', got '" + o.clearance + "'");
      }
    }
  }
  c.validate();
  return c;
}

std::string default_config_text() {
  return "Default configuration (all keys optional except schema_version):\n" +
         WorkbenchConfig{}.to_json().dump(2) + "\n";
}

// ---------------------------------------------------------------- mask

struct MaskOptions {
  CommonOptions common;
  std::string beta_file;
  std::string beta_json;
  bool zero = false;
  std::string format = "pgm16";
  std::string path;
};

maskgen::MaskParams read_beta(const maskgen::ParamSpace& space, const json& j, const std::string& source) {
  const json* v = &j;
  if (j.is_object()) {
    if (j.contains("beta")) v = &j["beta"];
    else if (j.contains("best_beta")) v = &j["best_beta"];
    else throw ConfigError(source + ": expected an array or an object with 'beta' or 'best_beta'");
  }
  maskgen::MaskParams p;
  try {
    p = maskgen::params_from_json(space, *v);
    p.check(space);
  } catch (const ConfigError& e) {
    throw ConfigError(source + ": " + e.what());
  } catch (const ContractError& e) {
    throw ConfigError(source + ": " + e.what());
  }
  return p;
}

int cmd_mask(const MaskOptions& o, std::ostream& out) {
  const WorkbenchConfig cfg = load_config(o.common);
  const auto& space = cfg.bench.space;
  const int given = (o.beta_file.empty() ? 0 : 1) + (o.beta_json.empty() ? 0 : 1) + (o.zero ? 1 : 0);
  if (given != 1) throw ConfigError("mask: give exactly one of --beta, --beta-json, --zero");
  const auto format = maskgen::parse_mask_format(o.format);

  maskgen::MaskParams beta = maskgen::MaskParams::zeros(space);
  if (!o.beta_file.empty()) beta = read_beta(space, read_json_file(o.beta_file), o.beta_file);
  if (!o.beta_json.empty()) beta = read_beta(space, parse_json_text(o.beta_json, "--beta-json"), "--beta-json");

  const std::string hash = cfg.hash();
  const maskgen::PhaseMask mask = maskgen::compose_mask(beta, maskgen::StartingMask(cfg.bench.geometry));
  const fs::path path = o.path.empty()
                            ? cfg.output_path() / (format == maskgen::MaskFormat::csv ? "mask.csv" : "mask.pgm")
                            : fs::path(o.path);
  fs::path sidecar = path;
  sidecar += ".json";

  // Everything is computed; only now touch the file system.
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".partial";
  try {
    maskgen::export_mask(mask, format, tmp, "config_hash " + hash);
    fs::rename(tmp, path);
  } catch (...) {
    std::error_code ec;
    fs::remove(tmp, ec);
    throw;
  }
  const json side{{"config_hash", hash},
                  {"format", o.format},
                  {"geometry",
                   {{"height_px", mask.geometry.height_px},
                    {"width_px", mask.geometry.width_px},
                    {"bit_depth", mask.geometry.bit_depth}}},
                  {"parameter_names", space.names()},
                  {"beta", beta.flatten()},
                  {"mask_fnv1a", hash_hex(read_file(path))}};
  try {
    write_file(sidecar, side.dump(2) + "\n");
  } catch (...) {
    std::error_code ec;
    fs::remove(path, ec);
    throw;
  }
  out << path.string() << "\n";
  return kOk;
}

// ---------------------------------------------------------------- simulate

struct SimulateOptions {
  CommonOptions common;
  std::string beta_file;
  int phase_points = 0;
};

int cmd_simulate(const SimulateOptions& o, std::ostream& out) {
  const WorkbenchConfig cfg = load_config(o.common);
  const auto& space = cfg.bench.space;
  maskgen::MaskParams beta = maskgen::MaskParams::zeros(space);
  if (!o.beta_file.empty()) beta = read_beta(space, read_json_file(o.beta_file), o.beta_file);
  if (o.phase_points < 0 || o.phase_points > 100000) throw ConfigError("--phase-scan: must be in [0, 100000]");

  bench::Bench b(cfg.bench_config());
  const auto m = b.measure(beta);
  const std::string hash = cfg.hash();
  const json result{{"config_hash", hash},
                    {"seed", cfg.seed},
                    {"beta", beta.flatten()},
                    {"shot_dbm", m.shot_dbm},
                    {"sqz_dbm", m.sqz_dbm},
                    {"squeezing_db", m.squeezing_db},
                    {"lo_power_at_detector", m.lo_power_at_detector},
                    {"debug_eta_ground_truth", b.last_debug_eta()}};
  const fs::path dir = cfg.output_path();
  write_file(dir / "simulate.json", result.dump(2) + "\n");
  if (o.phase_points > 0) {
    std::vector<double> phases;
    for (int i = 0; i < o.phase_points; ++i) phases.push_back(std::numbers::pi * i / o.phase_points);
    const auto trace = b.scan_phase(beta, phases);
    std::string csv = "# config_hash " + hash + "\nphase_rad,noise_rel_shot\n";
    for (std::size_t i = 0; i < phases.size(); ++i) csv += fmt(phases[i]) + "," + fmt(trace[i]) + "\n";
    write_file(dir / "phase_scan.csv", csv);
  }
  out << result.dump(2) << "\n";
  return kOk;
}

// ---------------------------------------------------------------- optimize

struct OptimizeOptions {
  CommonOptions common;
  std::vector<int> schedule;
  int budget = 0;
  int n_init = 0;
  std::string acquisition;
  bool random_search = false;
  int seed_sweep = 0;
  bool dry_run = false;
  bool resume = false;
  bool no_checkpoint = false;
};

json dimension_report(const WorkbenchConfig& cfg) {
  const auto& space = cfg.bench.space;
  const auto names = space.names();
  const auto bounds = space.bounds();
  json params = json::array();
  for (std::size_t i = 0; i < names.size(); ++i) params.push_back({names[i], bounds[i].lo, bounds[i].hi});
  int evaluations = 0;
  for (int n : cfg.schedule) evaluations += n;
  return {{"dimension", space.dimension()},
          {"per_panel", space.panel_size()},
          {"zernike_terms_per_panel", space.keys.size()},
          {"parameters", params},
          {"runs", cfg.schedule.size()},
          {"budgeted_evaluations", evaluations},
          {"baseline_measurements", cfg.schedule.size() + 1}};
}

struct SeedOutcome {
  std::uint64_t seed;
  std::string hash;
  json summary;
};

SeedOutcome run_seed(const WorkbenchConfig& cfg, const fs::path& dir, const OptimizeOptions& o, std::ostream& err) {
  const std::string hash = cfg.hash();
  const fs::path ckpt = dir / "checkpoint.json";
  json resume_state;
  bool resuming = false;
  if (o.resume && fs::exists(ckpt)) {
    const json saved = read_json_file(ckpt);
    if (saved.value("config_hash", std::string()) != hash)
      throw ConfigError(ckpt.string() + ": checkpoint belongs to a different config (hash mismatch)");
    resume_state = saved.at("state");
    resuming = true;
    if (!o.common.quiet) err << "seed " << cfg.seed << ": resuming from " << ckpt.string() << "\n";
  }

  bench::Bench b(cfg.bench_config());
  std::size_t runs_seen = 0;
  auto on_checkpoint = [&](const json& state) {
    if (!o.no_checkpoint)
      write_file(ckpt, json{{"config_hash", hash}, {"seed", cfg.seed}, {"state", state}}.dump() + "\n");
    if (o.common.quiet) return;
    const auto& runs = state.at("runs");
    for (; runs_seen < runs.size(); ++runs_seen) {
      const auto& r = runs[runs_seen];
      err << "seed " << cfg.seed << " run " << r.at("run").get<int>() << "/" << cfg.schedule.size()
          << ": baseline " << r.at("baseline_db").get<double>() << " dB, best " << r.at("best_db").get<double>()
          << " dB at iteration " << r.at("best_iteration").get<int>() << "\n";
    }
  };
  const auto archive = optimizer::run_protocol(b, cfg.schedule, cfg.protocol_options(), on_checkpoint,
                                               resuming ? &resume_state : nullptr);

  std::vector<json> records;
  std::string trace = json{{"type", "header"}, {"config_hash", hash}, {"seed", cfg.seed},
                           {"schema_version", kSchemaVersion}}.dump() + "\n";
  for (const auto& r : archive.records) {
    records.push_back(optimizer::record_to_json(r));
    trace += records.back().dump() + "\n";
  }
  json summary = summarize_trace(records);
  summary["config_hash"] = hash;
  summary["seed"] = cfg.seed;
  summary["runs"] = optimizer::archive_summary(archive).at("runs");
  summary["warnings"] = archive.warnings;

  // The output location is not part of the run, so it stays out of the manifest.
  json echoed = cfg.to_json();
  echoed.erase("output_dir");
  const json manifest{{"tool", "sqzbench"},
                      {"version", kVersion},
                      {"config_hash", hash},
                      {"seed", cfg.seed},
                      {"config", echoed},
                      {"files", {"trace.ndjson", "summary.json"}}};
  write_file(dir / "trace.ndjson", trace);
  write_file(dir / "summary.json", summary.dump(2) + "\n");
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
  std::error_code ec;
  fs::remove(ckpt, ec);
  if (!o.common.quiet)
    err << "seed " << cfg.seed << ": best " << summary["best_squeezing_db"].get<double>() << " dB, final "
        << summary["final_db"].get<double>() << " dB\n";
  return {cfg.seed, hash, std::move(summary)};
}

int cmd_optimize(const OptimizeOptions& o, std::ostream& out, std::ostream& err) {
  WorkbenchConfig cfg = load_config(o.common);
  if (!o.schedule.empty() && o.budget) throw ConfigError("optimize: --schedule and --budget are exclusive");
  if (!o.schedule.empty()) cfg.schedule = o.schedule;
  if (o.budget) cfg.schedule = {o.budget};
  if (o.n_init) cfg.optimizer.n_init = o.n_init;
  if (!o.acquisition.empty()) {
    if (o.acquisition == "mes") cfg.optimizer.acquisition.kind = optimizer::AcquisitionKind::mes;
    else if (o.acquisition == "ei") cfg.optimizer.acquisition.kind = optimizer::AcquisitionKind::ei;
    else throw ConfigError("--acquisition: expected 'mes' or 'ei'");
  }
  if (o.random_search) cfg.random_search = true;
  if (o.seed_sweep < 0 || o.seed_sweep > 10000) throw ConfigError("--seed-sweep: must be in [1, 10000]");
  cfg.validate();
  for (int n : cfg.schedule)
    if (cfg.optimizer.n_init > n) throw ConfigError("/optimizer/n_init: exceeds a run budget in /schedule");

  if (o.dry_run) {
    json echo{{"config", cfg.to_json()}, {"config_hash", cfg.hash()}, {"dimensions", dimension_report(cfg)}};
    if (o.seed_sweep) {
      json seeds = json::array();
      for (int i = 0; i < o.seed_sweep; ++i) seeds.push_back(cfg.seed + static_cast<std::uint64_t>(i));
      echo["seeds"] = seeds;
    }
    out << echo.dump(2) << "\n";
    return kOk;
  }

  const fs::path root = cfg.output_path();
  if (!o.seed_sweep) {
    const auto r = run_seed(cfg, root, o, err);
    out << r.summary.dump(2) << "\n";
    return kOk;
  }

  // Seeds run one after another, each in its own directory.
  json rows = json::array();
  std::vector<double> best, initial, improvement, final_db;
  for (int i = 0; i < o.seed_sweep; ++i) {
    WorkbenchConfig c = cfg;
    c.seed = cfg.seed + static_cast<std::uint64_t>(i);
    const auto r = run_seed(c, root / ("seed_" + std::to_string(c.seed)), o, err);
    const auto& s = r.summary;
    rows.push_back({{"seed", r.seed},
                    {"config_hash", r.hash},
                    {"initial_db", s["initial_db"]},
                    {"best_squeezing_db", s["best_squeezing_db"]},
                    {"final_db", s["final_db"]},
                    {"improvement_db", s["improvement_db"]}});
    initial.push_back(s["initial_db"].get<double>());
    best.push_back(s["best_squeezing_db"].get<double>());
    final_db.push_back(s["final_db"].get<double>());
    improvement.push_back(s["improvement_db"].get<double>());
  }
  const json sweep{{"config_hash", cfg.hash()},
                   {"seeds", rows},
                   {"median_initial_db", median(initial)},
                   {"median_best_db", median(best)},
                   {"median_final_db", median(final_db)},
                   {"median_improvement_db", median(improvement)}};
  write_file(root / "sweep.json", sweep.dump(2) + "\n");
  out << sweep.dump(2) << "\n";
  return kOk;
}

// ---------------------------------------------------------------- fit

struct FitOptions {
  CommonOptions common;
  std::string data;
  std::vector<double> guess;
  int points = 41;
  double pump_max = 1.0;
};

int cmd_fit(const FitOptions& o, std::ostream& out, std::ostream& err) {
  const WorkbenchConfig cfg = load_config(o.common);
  if (o.points < 2 || o.points > 100000) throw ConfigError("--points: must be in [2, 100000]");
  if (!(o.pump_max > 0) || !std::isfinite(o.pump_max)) throw ConfigError("--pump-max: must be positive");
  std::optional<noise::NoiseParams> guess;
  if (!o.guess.empty()) {
    if (o.guess.size() != 3) throw ConfigError("--guess: expected alpha_pct_per_w,loss,theta_rad");
    guess = noise::NoiseParams::from_percent_per_watt(o.guess[0], o.guess[1], o.guess[2]);
    if (!fitting::in_fit_bounds(*guess)) throw ConfigError("--guess: outside the fit bounds");
  }
  if (fs::exists(o.data) && fs::file_size(o.data) == 0) throw ConfigError(o.data + ": empty file");
  const auto data = fitting::read_dataset_csv(o.data);
  data.validate();
  const auto r = fitting::fit(data, guess);

  const std::string hash = cfg.hash();
  json result{{"config_hash", hash},
              {"data", o.data},
              {"data_fnv1a", hash_hex(read_file(o.data))},
              {"points", data.rows.size()},
              {"fit", fitting::to_json(r)}};
  std::string csv = "# config_hash " + hash + "\npump_w,squeeze_db,antisqueeze_db\n";
  for (int i = 0; i < o.points; ++i) {
    const double p = o.pump_max * (i + 1) / o.points;
    const auto pred = fitting::model_predict(r.params, p);
    csv += fmt(p) + "," + fmt(pred.squeeze_db) + "," + fmt(pred.antisqueeze_db) + "\n";
  }
  const fs::path dir = cfg.output_path();
  write_file(dir / "fit.json", result.dump(2) + "\n");
  write_file(dir / "fit_curves.csv", csv);
  out << result.dump(2) << "\n";
  if (!r.converged) {
    err << "fit did not converge: " << r.diagnostics << "\n";
    return kRuntimeError;
  }
  return kOk;
}

// ---------------------------------------------------------------- report

struct ReportOptions {
  CommonOptions common;
  std::string run_dir;
  bool model = false;
  double compare_loss = 0.08;
  std::vector<double> params{876.0, 0.044, 0.009};
  int points = 40;
};

struct Trace {
  std::string hash;
  std::uint64_t seed = 0;
  std::vector<json> records;
};

Trace read_trace(const fs::path& path) {
  std::istringstream is(read_file(path));
  Trace t;
  std::string line;
  int ln = 0;
  while (std::getline(is, line)) {
    ++ln;
    if (line.empty()) continue;
    json j = parse_json_text(line, path.string() + " line " + std::to_string(ln));
    if (j.value("type", std::string()) == "header") {
      t.hash = j.value("config_hash", std::string());
      t.seed = j.value("seed", std::uint64_t{0});
      continue;
    }
    for (const char* k : {"run", "iteration", "kind", "squeezing_db", "best_so_far", "beta"})
      if (!j.contains(k)) throw ConfigError(path.string() + " line " + std::to_string(ln) + ": missing '" + k + "'");
    t.records.push_back(std::move(j));
  }
  if (t.records.empty()) throw ConfigError(path.string() + ": no records");
  return t;
}

json report_one(const fs::path& dir, const fs::path& out_dir) {
  const Trace t = read_trace(dir / "trace.ndjson");
  json s = summarize_trace(t.records);
  const std::string head = "# config_hash " + t.hash + "\n";

  std::string conv = head + "index,run,iteration,kind,squeezing_db,best_so_far_run,best_so_far\n";
  for (const auto& row : s["convergence"]["rows"]) {
    conv += std::to_string(row[0].get<int>()) + "," + std::to_string(row[1].get<int>()) + "," +
            std::to_string(row[2].get<int>()) + "," + row[3].get<std::string>();
    for (int k = 4; k < 7; ++k) conv += "," + (row[k].is_null() ? std::string() : fmt(row[k].get<double>()));
    conv += "\n";
  }
  write_file(out_dir / "convergence.csv", conv);

  // Per-run table from the trace itself.
  std::string runs = head + "run,evaluations,baseline_db,best_db,best_iteration,improvement_db\n";
  json run_rows = json::array();
  std::size_t i = 0;
  while (i < t.records.size()) {
    const int run = t.records[i]["run"].get<int>();
    double baseline = std::numeric_limits<double>::quiet_NaN();
    double best = -std::numeric_limits<double>::infinity();
    int best_it = 0, evals = 0;
    for (; i < t.records.size() && t.records[i]["run"].get<int>() == run; ++i) {
      const auto& r = t.records[i];
      const auto& q = r["squeezing_db"];
      if (r["kind"] == "baseline") {
        baseline = q.is_null() ? baseline : q.get<double>();
      } else {
        ++evals;
      }
      if (q.is_number() && q.get<double>() > best) {
        best = q.get<double>();
        best_it = r["iteration"].get<int>();
      }
    }
    if (evals == 0 && i == t.records.size()) break;  // baseline of the final mask, reported as final_db
    runs += std::to_string(run) + "," + std::to_string(evals) + "," + fmt(baseline) + "," + fmt(best) + "," +
            std::to_string(best_it) + "," + fmt(best - baseline) + "\n";
    run_rows.push_back({{"run", run}, {"evaluations", evals}, {"baseline_db", baseline}, {"best_db", best},
                        {"best_iteration", best_it}});
  }
  write_file(out_dir / "runs.csv", runs);

  s.erase("convergence");
  s["config_hash"] = t.hash;
  s["seed"] = t.seed;
  s["runs"] = run_rows;
  write_file(out_dir / "report.json", s.dump(2) + "\n");
  return s;
}

int cmd_report(const ReportOptions& o, std::ostream& out) {
  const WorkbenchConfig cfg = load_config(o.common);
  if (o.model == !o.run_dir.empty()) throw ConfigError("report: give exactly one of --run, --model");

  if (o.model) {
    if (o.params.size() != 3) throw ConfigError("--params: expected alpha_pct_per_w,loss,theta_rad");
    if (o.points < 2 || o.points > 100000) throw ConfigError("--points: must be in [2, 100000]");
    noise::NoiseParams a;
    try {
      a = noise::NoiseParams::from_percent_per_watt(o.params[0], o.params[1], o.params[2]);
      a.validate();
    } catch (const ContractError& e) {
      throw ConfigError(std::string("--params: ") + e.what());
    }
    noise::NoiseParams b = a;
    b.loss = o.compare_loss;
    try {
      b.validate();
    } catch (const ContractError& e) {
      throw ConfigError(std::string("--compare-loss: ") + e.what());
    }
    const auto table = fitting::compare_scenarios(a, b, fitting::default_pump_grid(o.points));
    const std::string hash = cfg.hash();
    std::string csv = "# config_hash " + hash + "\npump_w,squeeze_db_a,antisqueeze_db_a,squeeze_db_b,antisqueeze_db_b\n";
    for (const auto& r : table.rows)
      csv += fmt(r.pump_w) + "," + fmt(r.a.squeeze_db) + "," + fmt(r.a.antisqueeze_db) + "," + fmt(r.b.squeeze_db) +
             "," + fmt(r.b.antisqueeze_db) + "\n";
    auto side = [&](const noise::NoiseParams& p, const noise::Optimum& best) {
      return json{{"alpha_per_w", p.alpha},
                  {"loss", p.loss},
                  {"theta_rad", p.theta},
                  {"at_pump_w", cfg.bench.pump_w},
                  {"squeeze_db", noise::squeezing_db(p, cfg.bench.pump_w)},
                  {"antisqueeze_db", noise::antisqueezing_db(p, cfg.bench.pump_w)},
                  {"best_pump_w", best.pump_w},
                  {"best_squeeze_db", best.squeezing_db}};
    };
    const json model{{"config_hash", hash}, {"a", side(a, table.best_a)}, {"b", side(b, table.best_b)}};
    const fs::path dir = cfg.output_path();
    write_file(dir / "model.csv", csv);
    write_file(dir / "model.json", model.dump(2) + "\n");
    out << model.dump(2) << "\n";
    return kOk;
  }

  const fs::path in(o.run_dir);
  const fs::path dest = o.common.out.empty() ? in : fs::path(o.common.out);
  if (fs::exists(in / "trace.ndjson")) {
    out << report_one(in, dest).dump(2) << "\n";
    return kOk;
  }
  // A seed-sweep directory: one report per seed plus a sweep table.
  std::vector<fs::path> seeds;
  if (fs::is_directory(in))
    for (const auto& e : fs::directory_iterator(in))
      if (e.is_directory() && e.path().filename().string().rfind("seed_", 0) == 0 &&
          fs::exists(e.path() / "trace.ndjson"))
        seeds.push_back(e.path());
  if (seeds.empty()) throw ConfigError(in.string() + ": no trace.ndjson and no seed_* run directories");
  std::sort(seeds.begin(), seeds.end(), [](const fs::path& a, const fs::path& b) {
    return std::stoull(a.filename().string().substr(5)) < std::stoull(b.filename().string().substr(5));
  });
  std::string csv = "seed,config_hash,initial_db,best_squeezing_db,final_db,improvement_db\n";
  std::vector<double> best, improvement;
  for (const auto& d : seeds) {
    const json s = report_one(d, dest / d.filename());
    csv += std::to_string(s["seed"].get<std::uint64_t>()) + "," + s["config_hash"].get<std::string>() + "," +
           fmt(s["initial_db"].get<double>()) + "," + fmt(s["best_squeezing_db"].get<double>()) + "," +
           fmt(s["final_db"].get<double>()) + "," + fmt(s["improvement_db"].get<double>()) + "\n";
    best.push_back(s["best_squeezing_db"].get<double>());
    improvement.push_back(s["improvement_db"].get<double>());
  }
  write_file(dest / "sweep.csv", csv);
  const json agg{{"seeds", seeds.size()}, {"median_best_db", median(best)}, {"median_improvement_db", median(improvement)}};
  write_file(dest / "sweep_report.json", agg.dump(2) + "\n");
  out << agg.dump(2) << "\n";
  return kOk;
}

}  // namespace

json summarize_trace(const std::vector<json>& records) {
  if (records.empty()) throw ConfigError("trace has no records");
  double overall = -std::numeric_limits<double>::infinity();
  std::size_t best = 0;
  int evaluations = 0, best_evaluation = 0;
  json rows = json::array();
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (r.at("kind") != "baseline") ++evaluations;
    const auto& q = r.at("squeezing_db");
    if (q.is_number() && q.get<double>() > overall) {
      overall = q.get<double>();
      best = i;
      best_evaluation = r.at("kind") == "baseline" ? 0 : evaluations;
    }
    rows.push_back({i, r.at("run"), r.at("iteration"), r.at("kind"), q, r.at("best_so_far"),
                    std::isfinite(overall) ? json(overall) : json(nullptr)});
  }
  const auto& first = records.front().at("squeezing_db");
  const auto& last = records.back();
  const double initial = first.is_number() ? first.get<double>() : std::numeric_limits<double>::quiet_NaN();
  const double final_db = last.at("kind") == "baseline" && last.at("squeezing_db").is_number()
                              ? last.at("squeezing_db").get<double>()
                              : std::numeric_limits<double>::quiet_NaN();
  const auto& b = records[best];
  return {{"best_squeezing_db", overall},
          {"best_beta", b.at("beta")},
          {"best_run", b.at("run")},
          {"best_iteration", b.at("iteration")},
          {"best_evaluation", best_evaluation},
          {"initial_db", initial},
          {"final_db", final_db},
          {"improvement_db", overall - initial},
          {"evaluations", evaluations},
          {"records", records.size()},
          {"convergence",
           {{"columns", {"index", "run", "iteration", "kind", "squeezing_db", "best_so_far_run", "best_so_far"}},
            {"rows", rows}}}};
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"sqzbench: spatial-light-modulator mode matching for squeezed-light detection"};
  app.footer(default_config_text() + "\nExit codes: 0 success, 2 configuration error, 3 runtime error.");
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  MaskOptions mo;
  auto* mask = app.add_subcommand("mask", "Compose an SLM phase mask from a parameter vector");
  add_common(mask, mo.common);
  mask->add_option("--beta", mo.beta_file, "JSON file: flat parameter array, or an object with 'beta'/'best_beta'")
      ->check(CLI::ExistingFile);
  mask->add_option("--beta-json", mo.beta_json, "Inline JSON parameter array");
  mask->add_flag("--zero", mo.zero, "All-zero parameters");
  mask->add_option("--format", mo.format, "pgm16 or csv")->capture_default_str();
  mask->add_option("--path", mo.path, "Mask file (default <out>/mask.pgm or mask.csv); sidecar is <path>.json");

  SimulateOptions so;
  auto* sim = app.add_subcommand("simulate", "One bench measurement for a parameter vector (default zero)");
  add_common(sim, so.common);
  sim->add_option("--beta", so.beta_file, "Parameter JSON file")->check(CLI::ExistingFile);
  sim->add_option("--phase-scan", so.phase_points, "Also write an N-point LO phase scan")->capture_default_str();

  OptimizeOptions oo;
  auto* opt = app.add_subcommand("optimize", "Closed-loop optimization with restarts");
  add_common(opt, oo.common);
  opt->add_option("--schedule", oo.schedule, "Iterations per run, comma separated (default 200,200)")->delimiter(',');
  opt->add_option("--budget", oo.budget, "Single run of this many iterations");
  opt->add_option("--n-init", oo.n_init, "Uniform initial points per run (default max(1, round(0.1 budget)))");
  opt->add_option("--acquisition", oo.acquisition, "mes or ei (default mes)");
  opt->add_flag("--random-search", oo.random_search, "Uniform sampling instead of the surrogate model");
  opt->add_option("--seed-sweep", oo.seed_sweep, "Run N seeds starting at --seed, each under <out>/seed_<s>");
  opt->add_flag("--dry-run", oo.dry_run, "Print the resolved config and dimension report; no evaluations");
  opt->add_flag("--resume", oo.resume, "Continue from <out>/checkpoint.json when present");
  opt->add_flag("--no-checkpoint", oo.no_checkpoint, "Do not write checkpoints");

  FitOptions fo;
  auto* fit = app.add_subcommand("fit", "Fit the noise model to squeezing vs pump data");
  add_common(fit, fo.common);
  fit->add_option("data", fo.data, "CSV: pump_w,squeeze_db,antisqueeze_db,sigma_db[,corrected]")
      ->required()
      ->check(CLI::ExistingFile);
  fit->add_option("--guess", fo.guess, "Initial alpha_pct_per_w,loss,theta_rad")->delimiter(',');
  fit->add_option("--points", fo.points, "Points on the predicted-curve grid")->capture_default_str();
  fit->add_option("--pump-max", fo.pump_max, "Upper end of the pump grid in W")->capture_default_str();

  ReportOptions ro;
  auto* rep = app.add_subcommand("report", "Tables from an optimize output, or noise-model scenarios");
  add_common(rep, ro.common);
  rep->add_option("--run", ro.run_dir, "Directory written by optimize (single seed or sweep)");
  rep->add_flag("--model", ro.model, "Noise-model tables for --params against --compare-loss");
  rep->add_option("--params", ro.params, "alpha_pct_per_w,loss,theta_rad")->delimiter(',')->capture_default_str();
  rep->add_option("--compare-loss", ro.compare_loss, "Loss of the comparison scenario")->capture_default_str();
  rep->add_option("--points", ro.points, "Pump grid points")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (mask->parsed()) return cmd_mask(mo, out);
    if (sim->parsed()) return cmd_simulate(so, out);
    if (opt->parsed()) return cmd_optimize(oo, out, err);
    if (fit->parsed()) return cmd_fit(fo, out, err);
    if (rep->parsed()) return cmd_report(ro, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return kConfigError;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace sqz::cli
