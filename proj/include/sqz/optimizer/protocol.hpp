#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sqz/bench/bench.hpp"
#include "sqz/optimizer/optimize.hpp"

namespace sqz::optimizer {

enum class RecordKind { baseline, init, bo, failed };

/// One line of the run trace. `debug_eta` is the ground-truth overlap and
/// is for post-hoc analysis only.
struct TraceRecord {
  int run = 0;        ///< 1-based
  int iteration = 0;  ///< 0 for the zero-beta baseline of the run
  RecordKind kind = RecordKind::baseline;
  std::vector<double> beta;
  std::optional<bench::Measurement> measurement;
  double best_so_far = 0.0;  ///< squeezing dB, including the baseline
  double debug_eta = 0.0;
  std::string error;
};

struct RunSummary {
  int run = 0;
  int budget = 0;
  int best_iteration = 0;  ///< 0: the baseline was never beaten
  double baseline_db = 0.0;
  double best_db = 0.0;
  std::vector<double> best_beta;
  double eta_after = 0.0;  ///< ground-truth overlap after accumulate and realign (debug)
};

/// Everything one protocol execution produced. The trace ends with the
/// baseline of the final accumulated mask (run index = schedule size + 1).
struct RunArchive {
  std::vector<TraceRecord> records;
  std::vector<RunSummary> runs;
  std::vector<std::string> warnings;
  double final_db = 0.0;
};

struct ProtocolOptions {
  OptimizerConfig optimizer;  ///< budget is overridden per run by the schedule
  std::uint64_t optimizer_seed = 1;
  bool random_search = false;  ///< every iteration uniform (n_init = budget)
  bool realign = true;
};

/// Called after every budgeted evaluation with a resumable checkpoint.
using CheckpointFn = std::function<void(const nlohmann::json&)>;

/// Baseline at zero beta, optimize, fold the best beta into the starting
/// mask, realign; repeated for each entry of `schedule` (iterations per run,
/// each in [1, 10000]). The baseline is fed to the model but not counted in
/// the budget. `resume` continues from a checkpoint produced by the same
/// bench configuration and options.
RunArchive run_protocol(bench::Bench& bench, const std::vector<int>& schedule, const ProtocolOptions& opt,
                        const CheckpointFn& checkpoint = {}, const nlohmann::json* resume = nullptr);

nlohmann::json record_to_json(const TraceRecord& r);
/// Newline-delimited JSON, one record per line.
std::string archive_ndjson(const RunArchive& a);
nlohmann::json archive_summary(const RunArchive& a);

/// Write trace.ndjson and manifest.json under `dir` (created). IoError on failure.
void write_archive(const std::filesystem::path& dir, const RunArchive& a, const nlohmann::json& manifest);

}  // namespace sqz::optimizer
