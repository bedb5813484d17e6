#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "aoc/config.hpp"
#include "aoc/metrics.hpp"

namespace aoc {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitTraining = 3;

// Diagnostics of one learner at one point in training.
struct SnapshotMetrics {
  std::uint64_t frames = 0;
  std::uint64_t episodes = 0;
  EvalResult eval;
  Coverage coverage;
  std::optional<double> overlap;  // needs >= 2 options
  std::optional<double> consistency;
};

SnapshotMetrics measure(const Trainer& trainer, const RunConfig& cfg, std::uint64_t eval_seed);

// Mean of the last `window` values at each index (fewer at the start).
std::vector<double> trailing_mean(std::span<const double> values, int window);

// Cross-run mean and population std at each index; runs may differ in
// length, `n` counts the runs covering an index.
struct CurveStats {
  std::vector<double> mean;
  std::vector<double> std;
  std::vector<int> n;
};
CurveStats aggregate_runs(const std::vector<std::vector<double>>& runs);

// First index at or after `from` whose trailing mean drops below
// `threshold`.
std::optional<std::size_t> first_below(std::span<const double> trailing, double threshold, std::size_t from = 0);

// Builds a learner for one seed from the run configuration.
Trainer make_trainer(const RunConfig& cfg, std::uint64_t seed);
Trainer make_trainer(const RunConfig& cfg, const GridLayout& layout, std::uint64_t seed);

// CLI verbs. Progress and errors go to `log`; files go under
// cfg.output_dir. Return a process exit code.
int cmd_train(const RunConfig& cfg, std::ostream& log);
// `from` is a train run directory (seed_<n>/final.bin per seed), a single
// checkpoint file, or empty for inline pre-training.
int cmd_transfer(const RunConfig& cfg, const std::string& from, std::ostream& log);
int cmd_sweep(const RunConfig& cfg, std::ostream& log);
int cmd_report(const std::string& run_dir, std::ostream& log);

}  // namespace aoc
