#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "sqz/bench/bench.hpp"
#include "sqz/cli/app.hpp"
#include "sqz/cli/config.hpp"
#include "sqz/common/error.hpp"
#include "sqz/common/hash.hpp"
#include "sqz/fitting/fitting.hpp"
#include "sqz/maskgen/mask_io.hpp"

using nlohmann::json;
namespace fs = std::filesystem;
using namespace sqz;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result sqzbench(std::vector<std::string> args) {
  args.insert(args.begin(), "sqzbench");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

// Fresh scratch directory per test case.
fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("sqzbench_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::binary);
  os << text;
}

std::vector<json> trace_records(const fs::path& p) {
  std::vector<json> out;
  std::istringstream is(slurp(p));
  std::string line;
  while (std::getline(is, line))
    if (!line.empty()) out.push_back(json::parse(line));
  return out;
}

// Distinct, clearly non-trivial parameters on the two half-panels.
maskgen::MaskParams two_panel_beta(const maskgen::ParamSpace& space) {
  auto b = maskgen::MaskParams::zeros(space);
  auto set = [](maskgen::PanelParams& p, int n, int m, double c) {
    for (auto& t : p.zernike)
      if (t.index.n == n && t.index.m == m) t.coeff = c;
  };
  set(b.left, 2, 2, 200.0);
  set(b.left, 3, 1, -150.0);
  b.left.gamma1 = 5e-4;
  set(b.right, 2, 0, 120.0);
  set(b.right, 4, -2, 60.0);
  b.right.gamma2 = -8e-4;
  b.right.theta_lens = 0.4;
  b.right.mu_x = 40.0;
  return b;
}

}  // namespace

TEST_CASE("config: defaults round-trip and the hash ignores the output directory") {
  cli::WorkbenchConfig d;
  const auto back = cli::config_from_json(d.to_json());
  CHECK(back.to_json() == d.to_json());
  CHECK(back.hash() == d.hash());
  auto moved = d;
  moved.output_dir = "elsewhere";
  CHECK(moved.hash() == d.hash());
  auto reseeded = d;
  reseeded.seed = 2;
  CHECK(reseeded.hash() != d.hash());
  CHECK(d.bench.layout.grid.nx == 256);
  CHECK(std::isinf(cli::config_from_json({{"schema_version", 1}, {"noise", {{"clearance_db", nullptr}}}}).bench.clearance_db));
}

TEST_CASE("config: schema violations name the offending path") {
  auto err = [](const json& j) {
    try {
      cli::config_from_json(j);
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string("accepted");
  };
  CHECK(err({{"noise", json::object()}}).find("/schema_version") != std::string::npos);
  CHECK(err({{"schema_version", 2}}).find("/schema_version") != std::string::npos);
  CHECK(err({{"schema_version", 1}, {"colour", 1}}).find("unknown key 'colour'") != std::string::npos);
  CHECK(err({{"schema_version", 1}, {"layout", {{"grid_sise", 64}}}}).find("/layout: unknown key 'grid_sise'") !=
        std::string::npos);
  CHECK(err({{"schema_version", 1}, {"noise", {{"alpha", "fast"}}}}).find("/noise/alpha") != std::string::npos);
  CHECK(err({{"schema_version", 1}, {"schedule", {200, 0}}}).find("/schedule/1") != std::string::npos);
  CHECK(err({{"schema_version", 1}, {"optimizer", {{"gp", {{"kernel", "rbf"}}}}}}).find("kernel") != std::string::npos);
  CHECK(err({{"schema_version", 1}, {"truth", "tilted"}}).find("tilted") != std::string::npos);

  try {
    cli::parse_json_text("{\n  \"schema_version\": 1,\n  \"seed\": ,\n}", "cfg.json");
    FAIL("parsed");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("line 3, column") != std::string::npos);
  }
}

TEST_CASE("cli: help documents every default; bad usage is a config error") {
  const auto h = sqzbench({"--help"});
  CHECK(h.code == 0);
  for (const char* key : {"schema_version", "clearance_db", "grid_size", "zernike_keys", "schedule", "perturbed_dims"})
    CHECK(h.out.find(key) != std::string::npos);
  CHECK(sqzbench({}).code == cli::kConfigError);
  CHECK(sqzbench({"frobnicate"}).code == cli::kConfigError);
  CHECK(sqzbench({"optimize", "--budget", "ten"}).code == cli::kConfigError);
}

TEST_CASE("cli mask: zero parameters give an all-zero mask with a hashed sidecar") {
  const auto dir = scratch("mask_zero");
  for (std::string fmt : {"pgm16", "csv"}) {
    const fs::path path = dir / ("zero." + fmt);
    const auto r = sqzbench({"mask", "--zero", "--format", fmt, "--path", path.string()});
    REQUIRE(r.code == 0);
    const auto m = maskgen::import_mask(path, maskgen::parse_mask_format(fmt));
    CHECK(m.geometry.width_px == 1920);
    CHECK(m.geometry.height_px == 1200);
    CHECK(std::all_of(m.values.begin(), m.values.end(), [](auto v) { return v == 0; }));
    const json side = json::parse(slurp(path.string() + ".json"));
    CHECK(side["config_hash"] == cli::WorkbenchConfig{}.hash());
    CHECK(side["beta"].size() == 50);
    CHECK(side["mask_fnv1a"] == hash_hex(slurp(path)));
  }
  CHECK(slurp(dir / "zero.pgm16").find("# config_hash " + cli::WorkbenchConfig{}.hash()) != std::string::npos);
}

TEST_CASE("cli mask: two-panel parameters match the frozen golden image") {
  const auto dir = scratch("mask_golden");
  const cli::WorkbenchConfig cfg;
  const auto beta = two_panel_beta(cfg.bench.space);
  spit(dir / "beta.json", json{{"beta", beta.flatten()}}.dump());
  const auto r = sqzbench({"mask", "--beta", (dir / "beta.json").string(), "--path", (dir / "two_panel.pgm").string()});
  REQUIRE(r.code == 0);
  const auto m = maskgen::import_mask(dir / "two_panel.pgm", maskgen::MaskFormat::pgm16);
  int differing = 0;
  for (int i = 1; i <= 1200; i += 7)
    for (int j = 1; j <= 960; j += 7) differing += m.at(i, j) != m.at(i, j + 960);
  CHECK(differing > 1000);
  CHECK(slurp(dir / "two_panel.pgm").find("# config_hash " + cfg.hash()) != std::string::npos);
  // Pixel data generated once by this implementation and frozen. The header
  // is left out because it carries the config hash.
  const std::string_view pixels(reinterpret_cast<const char*>(m.values.data()), m.values.size() * sizeof(m.values[0]));
  CHECK(hash_hex(pixels) == "a5334af5208e6ff9");
}

TEST_CASE("cli mask: malformed or out-of-bounds parameters leave no output") {
  const auto dir = scratch("mask_bad");
  spit(dir / "trunc.json", "[1.0, 2.0,\n 3.0");
  spit(dir / "short.json", "[1.0, 2.0]");
  std::vector<double> far(50, 0.0);
  far[0] = 1e6;
  spit(dir / "far.json", json(far).dump());
  for (const char* f : {"trunc.json", "short.json", "far.json"}) {
    const fs::path out = dir / (std::string(f) + ".out");
    const auto r = sqzbench({"mask", "--beta", (dir / f).string(), "--path", (out / "m.pgm").string()});
    CHECK(r.code == cli::kConfigError);
    CHECK(!fs::exists(out));
  }
  CHECK(sqzbench({"mask", "--beta", (dir / "trunc.json").string()}).err.find("line 2") != std::string::npos);
  CHECK(sqzbench({"mask", "--zero", "--beta-json", "[]"}).code == cli::kConfigError);
}

TEST_CASE("cli: flags override file values; the env var moves relative outputs") {
  const auto dir = scratch("override");
  spit(dir / "c.json", json{{"schema_version", 1}, {"seed", 5}, {"output_dir", "rel"}, {"layout", {{"grid_size", 240}}}}.dump());
  auto r = sqzbench({"optimize", "--dry-run", "-c", (dir / "c.json").string(), "--seed", "9", "--grid", "192"});
  REQUIRE(r.code == 0);
  json j = json::parse(r.out);
  CHECK(j["config"]["seed"] == 9);
  CHECK(j["config"]["layout"]["grid_size"] == 192);
  CHECK(j["config"]["output_dir"] == "rel");

  setenv(cli::kOutputRootEnv, (dir / "root").string().c_str(), 1);
  r = sqzbench({"simulate", "-c", (dir / "c.json").string(), "-q"});
  unsetenv(cli::kOutputRootEnv);
  REQUIRE(r.code == 0);
  CHECK(fs::exists(dir / "root" / "rel" / "simulate.json"));
  CHECK(json::parse(slurp(dir / "root" / "rel" / "simulate.json"))["config_hash"].is_string());
}

TEST_CASE("cli optimize: dry run reports dimensions and evaluates nothing") {
  const auto dir = scratch("dry");
  const auto r = sqzbench({"optimize", "--dry-run", "-o", (dir / "out").string(), "--seed-sweep", "3"});
  REQUIRE(r.code == 0);
  const json j = json::parse(r.out);
  CHECK(j["dimensions"]["dimension"] == 50);
  CHECK(j["dimensions"]["parameters"].size() == 50);
  CHECK(j["dimensions"]["budgeted_evaluations"] == 400);
  CHECK(j["seeds"] == json({1, 2, 3}));
  CHECK(!fs::exists(dir / "out"));
}

TEST_CASE("cli optimize: budget 10 with one initial point; byte-identical reruns") {
  const auto dir = scratch("opt10");
  for (const char* sub : {"a", "b"})
    REQUIRE(sqzbench({"optimize", "--budget", "10", "--n-init", "1", "-q", "-o", (dir / sub).string()}).code == 0);
  for (const char* f : {"trace.ndjson", "summary.json", "manifest.json"}) CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
  CHECK(!fs::exists(dir / "a" / "checkpoint.json"));

  const auto recs = trace_records(dir / "a" / "trace.ndjson");
  REQUIRE(recs.size() == 1 + 1 + 10 + 1);  // header, baseline, evaluations, final baseline
  const std::string hash = recs[0]["config_hash"];
  int budgeted = 0, init = 0;
  for (std::size_t i = 1; i < recs.size(); ++i) {
    budgeted += recs[i]["kind"] != "baseline";
    init += recs[i]["kind"] == "init";
  }
  CHECK(budgeted == 10);
  CHECK(init == 1);

  const json s = json::parse(slurp(dir / "a" / "summary.json"));
  CHECK(s["config_hash"] == hash);
  CHECK(json::parse(slurp(dir / "a" / "manifest.json"))["config_hash"] == hash);
  CHECK(s["evaluations"] == 10);
  CHECK(s["best_beta"].size() == 50);
  CHECK(s["convergence"]["rows"].size() == 12);
  double best = -1e9;
  for (std::size_t i = 1; i < recs.size(); ++i)
    if (recs[i]["squeezing_db"].is_number()) best = std::max(best, recs[i]["squeezing_db"].get<double>());
  CHECK(s["best_squeezing_db"].get<double>() == best);
  const auto& last = s["convergence"]["rows"].back();
  CHECK(last[6].get<double>() == best);

  // Report tables carry the same hash.
  REQUIRE(sqzbench({"report", "--run", (dir / "a").string()}).code == 0);
  const auto conv = slurp(dir / "a" / "convergence.csv");
  CHECK(conv.rfind("# config_hash " + hash + "\n", 0) == 0);
  CHECK(std::count(conv.begin(), conv.end(), '\n') == 2 + 12);
  const auto runs = slurp(dir / "a" / "runs.csv");
  CHECK(std::count(runs.begin(), runs.end(), '\n') == 3);
}

TEST_CASE("cli optimize: resume from a checkpoint reproduces the uninterrupted run") {
  const auto dir = scratch("resume");
  REQUIRE(sqzbench({"optimize", "--schedule", "4,4", "-q", "-o", (dir / "ref").string()}).code == 0);

  // Interrupt the same protocol after 6 checkpoints and leave the last one behind.
  cli::WorkbenchConfig cfg;
  cfg.schedule = {4, 4};
  cfg.output_dir = (dir / "cut").string();
  bench::Bench b(cfg.bench_config());
  int calls = 0;
  json last;
  struct Stop {};
  try {
    optimizer::run_protocol(b, cfg.schedule, cfg.protocol_options(), [&](const json& j) {
      last = j;
      if (++calls == 6) throw Stop{};
    });
  } catch (const Stop&) {
  }
  fs::create_directories(dir / "cut");
  spit(dir / "cut" / "checkpoint.json", json{{"config_hash", cfg.hash()}, {"seed", cfg.seed}, {"state", last}}.dump());
  const auto r = sqzbench({"optimize", "--schedule", "4,4", "-o", (dir / "cut").string(), "--resume"});
  REQUIRE(r.code == 0);
  CHECK(r.err.find("resuming") != std::string::npos);
  CHECK(slurp(dir / "cut" / "trace.ndjson") == slurp(dir / "ref" / "trace.ndjson"));
  CHECK(slurp(dir / "cut" / "summary.json") == slurp(dir / "ref" / "summary.json"));

  // A checkpoint from a different config is refused.
  spit(dir / "cut" / "checkpoint.json", json{{"config_hash", "0000000000000000"}, {"state", last}}.dump());
  CHECK(sqzbench({"optimize", "--schedule", "4,4", "-q", "-o", (dir / "cut").string(), "--resume"}).code ==
        cli::kConfigError);
}

TEST_CASE("cli optimize: seed sweep isolates seeds and aggregates medians") {
  const auto dir = scratch("sweep");
  const auto r = sqzbench({"optimize", "--budget", "3", "--seed", "4", "--seed-sweep", "3", "-q", "-o", (dir / "s").string()});
  REQUIRE(r.code == 0);
  const json sw = json::parse(slurp(dir / "s" / "sweep.json"));
  REQUIRE(sw["seeds"].size() == 3);
  std::vector<double> best;
  for (int s = 4; s <= 6; ++s) {
    CHECK(fs::exists(dir / "s" / ("seed_" + std::to_string(s)) / "trace.ndjson"));
    best.push_back(json::parse(slurp(dir / "s" / ("seed_" + std::to_string(s)) / "summary.json"))["best_squeezing_db"]);
  }
  std::sort(best.begin(), best.end());
  CHECK(sw["median_best_db"].get<double>() == best[1]);
  CHECK(sw["seeds"][0]["config_hash"] != sw["seeds"][1]["config_hash"]);

  REQUIRE(sqzbench({"report", "--run", (dir / "s").string(), "-q"}).code == 0);
  const auto csv = slurp(dir / "s" / "sweep.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
  CHECK(fs::exists(dir / "s" / "seed_5" / "convergence.csv"));
}

TEST_CASE("cli fit: synthetic round trip, curve table, parse and empty-file errors") {
  const auto dir = scratch("fit");
  const noise::NoiseParams truth{8.76, 0.044, 0.009};
  fitting::SqueezeDataset d;
  for (double p : {0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.585, 0.7, 0.85}) {
    const auto pr = fitting::model_predict(truth, p);
    d.rows.push_back({p, pr.squeeze_db, pr.antisqueeze_db, 0.2, true});
  }
  fitting::write_dataset_csv(d, dir / "synth.csv");
  const auto r = sqzbench({"fit", (dir / "synth.csv").string(), "-o", (dir / "out").string(), "--points", "11"});
  REQUIRE(r.code == 0);
  const json j = json::parse(slurp(dir / "out" / "fit.json"));
  CHECK(j["fit"]["si"]["alpha_per_w"].get<double>() == doctest::Approx(truth.alpha).epsilon(1e-6));
  CHECK(j["fit"]["si"]["loss"].get<double>() == doctest::Approx(truth.loss).epsilon(1e-6));
  CHECK(j["fit"]["si"]["theta_rad"].get<double>() == doctest::Approx(truth.theta).epsilon(1e-6));
  CHECK(j["config_hash"] == cli::WorkbenchConfig{}.hash());
  const auto curves = slurp(dir / "out" / "fit_curves.csv");
  CHECK(curves.rfind("# config_hash ", 0) == 0);
  CHECK(std::count(curves.begin(), curves.end(), '\n') == 2 + 11);

  spit(dir / "empty.csv", "");
  auto e = sqzbench({"fit", (dir / "empty.csv").string(), "-o", (dir / "e").string()});
  CHECK(e.code != 0);
  CHECK(e.err.find("empty") != std::string::npos);

  spit(dir / "bad.csv", "pump_w,squeeze_db,antisqueeze_db,sigma_db\n0.1,3.0,4.0,0.2\n0.2,x,5.0,0.2\n");
  e = sqzbench({"fit", (dir / "bad.csv").string(), "-o", (dir / "e").string()});
  CHECK(e.code == cli::kConfigError);
  CHECK(e.err.find("line 3, column 2") != std::string::npos);
}

TEST_CASE("cli report: noise-model scenarios") {
  const auto dir = scratch("model");
  const auto r = sqzbench({"report", "--model", "-o", dir.string(), "--points", "20"});
  REQUIRE(r.code == 0);
  const json j = json::parse(slurp(dir / "model.json"));
  CHECK(j["a"]["squeeze_db"].get<double>() == doctest::Approx(noise::squeezing_db({8.76, 0.044, 0.009}, 0.585)));
  CHECK(j["b"]["best_squeeze_db"].get<double>() < j["a"]["best_squeeze_db"].get<double>());
  const auto csv = slurp(dir / "model.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 2 + 20);
  CHECK(sqzbench({"report", "-q"}).code == cli::kConfigError);
}

TEST_CASE("cli: unwritable output is a runtime error") {
  const auto dir = scratch("unwritable");
  spit(dir / "file", "x");
  const auto r = sqzbench({"simulate", "-q", "-o", (dir / "file" / "sub").string()});
  CHECK(r.code == cli::kRuntimeError);
}
