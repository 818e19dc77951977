#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rlingua/config.hpp"

namespace rlingua {

/// A seed failed mid-run; whatever was produced is on disk next to an
/// INCOMPLETE marker.
class RunError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunOptions {
  int jobs = 1;                 // seeds trained concurrently
  std::ostream* log = nullptr;  // one progress line per finished seed
};

struct SeedSummary {
  std::uint64_t seed = 0;
  double final_ema = 0.0;
  double best_ema = 0.0;
  double final_raw = 0.0;
  std::optional<std::uint64_t> steps_to_target;
  std::uint64_t llm_actions = 0;
};

struct RunResult {
  std::filesystem::path dir;  // <out>/<task>-<arm>
  std::vector<SeedSummary> seeds;
  std::vector<std::vector<MetricRow>> curves;  // same order as seeds
};

/// Layout under `config.out_dir`:
///
///   <task>-<arm>/config.ini            effective config, canonical form
///   <task>-<arm>/summary.json
///   <task>-<arm>/seed-<n>/metrics.csv
///   <task>-<arm>/seed-<n>/agent.ckpt   (not for the controller arm)
///   <task>-<arm>/INCOMPLETE            present until every seed finished
///
/// Throws RunError on any failure after the directory was created.
RunResult run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

SeedSummary summarize(std::uint64_t seed, const std::vector<MetricRow>& rows, double target);

/// Mean EMA line with a min/max band per arm, one SVG file. Inputs are
/// metrics.csv files; seeds are grouped by the arm named in each header.
/// Throws std::runtime_error listing every unreadable or malformed input.
void render_curves(const std::vector<std::filesystem::path>& metric_files,
                   const std::filesystem::path& output);
std::string render_curves_svg(const std::vector<std::filesystem::path>& metric_files);

}  // namespace rlingua
