#include "sqz/cli/config.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "sqz/common/error.hpp"
#include "sqz/common/hash.hpp"
#include "sqz/common/rng.hpp"

namespace sqz::cli {

using nlohmann::json;

namespace {

// Reads one JSON object, remembering which keys were consumed so leftovers
// can be reported as unknown.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + ": expected an object");
  }

  const json* find(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void number(const char* key, double& out) {
    if (const json* v = find(key)) {
      if (!v->is_number()) throw ConfigError(at(key) + ": expected a number");
      out = v->get<double>();
    }
  }
  void integer(const char* key, int& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer()) throw ConfigError(at(key) + ": expected an integer");
      const auto x = v->get<long long>();
      if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max())
        throw ConfigError(at(key) + ": out of range");
      out = static_cast<int>(x);
    }
  }
  void boolean(const char* key, bool& out) {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) throw ConfigError(at(key) + ": expected true or false");
      out = v->get<bool>();
    }
  }
  void string(const char* key, std::string& out) {
    if (const json* v = find(key)) {
      if (!v->is_string()) throw ConfigError(at(key) + ": expected a string");
      out = v->get<std::string>();
    }
  }
  void pair(const char* key, double& a, double& b) {
    if (const json* v = find(key)) {
      if (!v->is_array() || v->size() != 2 || !(*v)[0].is_number() || !(*v)[1].is_number())
        throw ConfigError(at(key) + ": expected [x, y]");
      a = (*v)[0].get<double>();
      b = (*v)[1].get<double>();
    }
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(where() + ": unknown key '" + it.key() + "'");
  }

  std::string at(const char* key) const { return path_ + "/" + key; }

 private:
  std::string where() const { return path_.empty() ? "/" : path_; }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

const char* sampling_name(optics::Sampling s) {
  return s == optics::Sampling::nearest ? "nearest" : "exact_pitch";
}

json aberration_json(const std::vector<maskgen::ZernikeTerm>& terms) {
  json a = json::array();
  for (const auto& t : terms) a.push_back({{"n", t.index.n}, {"m", t.index.m}, {"coeff", t.coeff}});
  return a;
}

void read_truth(const json& j, WorkbenchConfig& c) {
  if (j.is_string()) {
    c.truth_preset = j.get<std::string>();
    c.bench.truth = bench::HiddenTruth::preset(c.truth_preset);
    return;
  }
  ObjectReader r(j, "/truth");
  r.string("preset", c.truth_preset);
  c.bench.truth = bench::HiddenTruth::preset(c.truth_preset);
  if (const json* a = r.find("aberration")) {
    if (!a->is_array()) throw ConfigError("/truth/aberration: expected an array");
    c.bench.truth.aberration.clear();
    for (std::size_t i = 0; i < a->size(); ++i) {
      ObjectReader t((*a)[i], "/truth/aberration/" + std::to_string(i));
      maskgen::ZernikeTerm term;
      t.integer("n", term.index.n);
      t.integer("m", term.index.m);
      t.number("coeff", term.coeff);
      t.finish();
      if (!maskgen::is_valid_zernike(term.index.n, term.index.m))
        throw ConfigError("/truth/aberration/" + std::to_string(i) + ": invalid Zernike index");
      c.bench.truth.aberration.push_back(term);
    }
  }
  r.finish();
}

}  // namespace

bench::BenchConfig WorkbenchConfig::default_bench() {
  bench::BenchConfig b;
  b.layout.grid = {256, 256, 16e-6};
  b.layout.sampling = optics::Sampling::nearest;
  return b;
}

json WorkbenchConfig::to_json() const {
  const auto& b = bench;
  const auto& L = b.layout;
  json clearance = std::isfinite(b.clearance_db) ? json(b.clearance_db) : json(nullptr);
  return {
      {"schema_version", kSchemaVersion},
      {"seed", seed},
      {"output_dir", output_dir},
      {"schedule", schedule},
      {"realign", b.realign},
      {"geometry",
       {{"height_px", b.geometry.height_px},
        {"width_px", b.geometry.width_px},
        {"bit_depth", b.geometry.bit_depth},
        {"pixel_pitch", b.geometry.pixel_pitch}}},
      {"space",
       {{"zernike_keys", zernike_keys},
        {"zernike_bound", b.space.zernike_bound},
        {"gamma_bound", b.space.gamma_bound},
        {"mu_bound", b.space.mu_bound}}},
      {"layout",
       {{"grid_size", L.grid.nx},
        {"grid_pitch", L.grid.pitch},
        {"wavelength", L.wavelength},
        {"sampling", sampling_name(L.sampling)},
        {"left_offset_px", {L.left.offset_x_px, L.left.offset_y_px}},
        {"right_offset_px", {L.right.offset_x_px, L.right.offset_y_px}},
        {"inter_reflection_distance", L.inter_reflection_distance},
        {"distance_to_beamsplitter", L.distance_to_beamsplitter}}},
      {"truth", {{"preset", truth_preset}, {"aberration", aberration_json(b.truth.aberration)}}},
      {"noise",
       {{"pump_w", b.pump_w},
        {"alpha", b.noise_fixed.alpha},
        {"loss_fixed", b.noise_fixed.loss},
        {"theta", b.noise_fixed.theta},
        {"meas_sigma_db", b.meas_sigma},
        {"clearance_db", clearance},
        {"shot_ref_dbm", b.shot_ref_dbm},
        {"lo_power_scale", b.lo_power_scale}}},
      {"optimizer", [&] {
         json o = optimizer::config_to_json(optimizer);
         o.erase("budget");
         o["random_search"] = random_search;
         return o;
       }()},
  };
}

std::string WorkbenchConfig::hash() const {
  json j = to_json();
  j.erase("output_dir");
  return hash_hex(j.dump());
}

bench::BenchConfig WorkbenchConfig::bench_config() const {
  bench::BenchConfig b = bench;
  Rng r(seed);
  b.rng_seed = r.split();
  return b;
}

optimizer::ProtocolOptions WorkbenchConfig::protocol_options() const {
  optimizer::ProtocolOptions p;
  p.optimizer = optimizer;
  Rng r(seed);
  r.split();
  p.optimizer_seed = r.split();
  p.random_search = random_search;
  p.realign = bench.realign;
  return p;
}

std::filesystem::path WorkbenchConfig::output_path() const {
  std::filesystem::path p(output_dir);
  if (p.is_relative())
    if (const char* root = std::getenv(kOutputRootEnv); root && *root) return std::filesystem::path(root) / p;
  return p;
}

void WorkbenchConfig::validate() const {
  bench.validate();
  for (int n : schedule)
    if (n < 1 || n > 10000) throw ConfigError("/schedule: iterations per run must be in [1, 10000]");
  if (output_dir.empty()) throw ConfigError("/output_dir: must not be empty");
  if (bench.layout.grid.nx < 16) throw ConfigError("/layout/grid_size: must be at least 16");
  try {
    auto o = optimizer;
    o.budget = std::max(o.resolved_n_init(), 1);
    o.validate();
  } catch (const ContractError& e) {
    throw ConfigError(std::string("/optimizer: ") + e.what());
  }
}

WorkbenchConfig config_from_json(const json& j) {
  WorkbenchConfig c;
  ObjectReader r(j, "");
  const json* version = r.find("schema_version");
  if (!version) throw ConfigError("/schema_version: required");
  if (!version->is_number_integer() || version->get<long long>() != kSchemaVersion)
    throw ConfigError("/schema_version: unsupported (this build reads version " + std::to_string(kSchemaVersion) + ")");

  if (const json* s = r.find("seed")) {
    if (!s->is_number_unsigned()) throw ConfigError("/seed: expected a non-negative integer");
    c.seed = s->get<std::uint64_t>();
  }
  r.string("output_dir", c.output_dir);
  if (const json* s = r.find("schedule")) {
    if (!s->is_array()) throw ConfigError("/schedule: expected an array of integers");
    c.schedule.clear();
    for (std::size_t i = 0; i < s->size(); ++i) {
      if (!(*s)[i].is_number_integer()) throw ConfigError("/schedule/" + std::to_string(i) + ": expected an integer");
      const auto n = (*s)[i].get<long long>();
      if (n < 1 || n > 10000) throw ConfigError("/schedule/" + std::to_string(i) + ": must be in [1, 10000]");
      c.schedule.push_back(static_cast<int>(n));
    }
  }
  r.boolean("realign", c.bench.realign);

  auto& b = c.bench;
  if (const json* g = r.find("geometry")) {
    ObjectReader s(*g, "/geometry");
    s.integer("height_px", b.geometry.height_px);
    s.integer("width_px", b.geometry.width_px);
    s.integer("bit_depth", b.geometry.bit_depth);
    s.number("pixel_pitch", b.geometry.pixel_pitch);
    s.finish();
  }
  if (const json* sp = r.find("space")) {
    ObjectReader s(*sp, "/space");
    s.string("zernike_keys", c.zernike_keys);
    b.space.keys = maskgen::zernike_preset(c.zernike_keys);
    s.number("zernike_bound", b.space.zernike_bound);
    s.number("gamma_bound", b.space.gamma_bound);
    s.number("mu_bound", b.space.mu_bound);
    s.finish();
    if (!(b.space.zernike_bound > 0 && b.space.gamma_bound > 0 && b.space.mu_bound > 0))
      throw ConfigError("/space: bounds must be positive");
  }
  if (const json* l = r.find("layout")) {
    ObjectReader s(*l, "/layout");
    auto& L = b.layout;
    int n = L.grid.nx;
    s.integer("grid_size", n);
    L.grid.nx = L.grid.ny = n;
    s.number("grid_pitch", L.grid.pitch);
    s.number("wavelength", L.wavelength);
    std::string sampling = sampling_name(L.sampling);
    s.string("sampling", sampling);
    if (sampling == "nearest") L.sampling = optics::Sampling::nearest;
    else if (sampling == "exact_pitch") L.sampling = optics::Sampling::exact_pitch;
    else throw ConfigError("/layout/sampling: expected 'nearest' or 'exact_pitch'");
    s.pair("left_offset_px", L.left.offset_x_px, L.left.offset_y_px);
    s.pair("right_offset_px", L.right.offset_x_px, L.right.offset_y_px);
    s.number("inter_reflection_distance", L.inter_reflection_distance);
    s.number("distance_to_beamsplitter", L.distance_to_beamsplitter);
    s.finish();
    if (!(L.wavelength > 0)) throw ConfigError("/layout/wavelength: must be positive");
  }
  if (const json* t = r.find("truth")) read_truth(*t, c);
  if (const json* nz = r.find("noise")) {
    ObjectReader s(*nz, "/noise");
    s.number("pump_w", b.pump_w);
    s.number("alpha", b.noise_fixed.alpha);
    s.number("loss_fixed", b.noise_fixed.loss);
    s.number("theta", b.noise_fixed.theta);
    s.number("meas_sigma_db", b.meas_sigma);
    if (const json* cl = s.find("clearance_db")) {
      if (cl->is_null()) b.clearance_db = std::numeric_limits<double>::infinity();
      else if (cl->is_number()) b.clearance_db = cl->get<double>();
      else throw ConfigError("/noise/clearance_db: expected a number or null (no circuit noise)");
    }
    s.number("shot_ref_dbm", b.shot_ref_dbm);
    s.number("lo_power_scale", b.lo_power_scale);
    s.finish();
    try {
      b.noise_fixed.validate();
    } catch (const ContractError& e) {
      throw ConfigError(std::string("/noise: ") + e.what());
    }
  }
  if (const json* o = r.find("optimizer")) {
    if (!o->is_object()) throw ConfigError("/optimizer: expected an object");
    json rest = *o;
    if (rest.contains("random_search")) {
      if (!rest["random_search"].is_boolean()) throw ConfigError("/optimizer/random_search: expected true or false");
      c.random_search = rest["random_search"].get<bool>();
      rest.erase("random_search");
    }
    if (rest.contains("budget")) throw ConfigError("/optimizer/budget: set per run through /schedule");
    try {
      c.optimizer = optimizer::config_from_json(rest);
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("/") + e.what());
    }
  }
  r.finish();
  c.validate();
  return c;
}

json parse_json_text(const std::string& text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    // nlohmann reports "line L, column C"; keep its message after the tag.
    std::string msg = e.what();
    if (auto p = msg.find("] "); p != std::string::npos) msg = msg.substr(p + 2);
    throw ConfigError(source + ": " + msg);
  }
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_json_text(ss.str(), path.string());
}

}  // namespace sqz::cli
