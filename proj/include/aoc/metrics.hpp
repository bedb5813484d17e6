#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "aoc/agent.hpp"

namespace aoc {

// Option-execution counts per state (states x options).
struct UsageMap {
  Eigen::MatrixXd counts;
  int episodes = 0;

  static UsageMap zeros(int num_states, int num_options);
  double total() const { return counts.sum(); }
  // Per-option share of all executions; zeros when nothing was counted.
  std::vector<double> fractions() const;
  double dominant() const;
};

struct EvalOptions {
  int episodes = 50;
  double epsilon = 0.1;
  std::uint64_t seed = 0;
};

struct EvalResult {
  UsageMap usage;
  double mean_return = 0.0;
  double mean_length = 0.0;
  double dominant_usage = 0.0;
  int reached_goal = 0;
};

// Call-and-return rollouts without learning: epsilon-greedy over option
// values, sampled actions, sampled terminations. `env` supplies layout,
// goal, blocking and parameters; it is copied, not stepped.
EvalResult evaluate(const Network& net, const AttentionBank& bank, const FourRooms& env, const EvalOptions& opts);
EvalResult evaluate(const Trainer& trainer, const EvalOptions& opts);

struct Coverage {
  double least = 0.0;
  double most = 0.0;
  std::vector<double> per_option;  // percentages, summing to 100
};

// Share of states where each option's attention is the largest; ties go to
// the lowest option id. `h` is options x states.
Coverage attentive_coverage(const Eigen::MatrixXd& h);

struct OverlapThresholds {
  double min_gap = 0.3;      // max - second max must exceed this
  double max_second = 0.05;  // second max must stay below this
};

// Percentage of states attended by essentially one option.
double attention_overlap(const Eigen::MatrixXd& h, const OverlapThresholds& th = {});

// Probability that the executing option's attention at the visited state is
// below `threshold`; empty when nothing was executed.
std::optional<double> usage_attention_consistency(const UsageMap& usage, const Eigen::MatrixXd& h,
                                                  double threshold = 0.01);

// Per-option sample standard deviation of usage fractions across runs.
std::vector<double> usage_std(const std::vector<std::vector<double>>& runs);

// Mean absolute elementwise difference between two attention snapshots.
double mean_abs_change(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

}  // namespace aoc
