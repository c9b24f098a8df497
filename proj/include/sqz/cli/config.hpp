#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "sqz/bench/bench.hpp"
#include "sqz/optimizer/optimize.hpp"
#include "sqz/optimizer/protocol.hpp"

namespace sqz::cli {

inline constexpr int kSchemaVersion = 1;
/// Overrides the root that a relative output_dir is resolved against.
inline constexpr const char* kOutputRootEnv = "SQZBENCH_OUTPUT_ROOT";

/// Everything a subcommand needs, in one versioned JSON document. Every key
/// is optional; missing keys keep the defaults below.
struct WorkbenchConfig {
  bench::BenchConfig bench = default_bench();  ///< rng_seed is derived from `seed`
  std::string truth_preset = "default";
  std::string zernike_keys = "full";
  optimizer::OptimizerConfig optimizer;  ///< budget comes from the schedule
  bool random_search = false;
  std::vector<int> schedule{200, 200};
  std::string output_dir = "sqzbench-out";
  std::uint64_t seed = 1;

  /// Closed-loop defaults: 256^2 grid at 16 um with nearest-pixel lookup.
  static bench::BenchConfig default_bench();

  /// Canonical, fully resolved form (also what --dry-run prints).
  nlohmann::json to_json() const;
  /// FNV-1a of the canonical form without output_dir.
  std::string hash() const;

  /// Bench and optimizer seeds are split from `seed`.
  bench::BenchConfig bench_config() const;
  optimizer::ProtocolOptions protocol_options() const;

  /// output_dir, resolved against $SQZBENCH_OUTPUT_ROOT when relative.
  std::filesystem::path output_path() const;

  /// ConfigError on any invalid value.
  void validate() const;
};

/// Strict: unknown keys, wrong types and a missing or unsupported
/// schema_version are ConfigErrors naming the JSON path.
WorkbenchConfig config_from_json(const nlohmann::json& j);

/// Parse a JSON document; syntax errors report line and column.
nlohmann::json parse_json_text(const std::string& text, const std::string& source);
nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace sqz::cli
