#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "aoc/attention.hpp"
#include "aoc/env.hpp"
#include "aoc/network.hpp"
#include "aoc/rng.hpp"

namespace aoc {

enum class Mode { AOC, OC };
std::string_view mode_name(Mode m);
Mode parse_mode(std::string_view s);

// Linear interpolation from `start` to `end` over `horizon` steps, then
// clamped at `end`.
struct LinearSchedule {
  double start = 1.0;
  double end = 0.1;
  double horizon = 1e5;

  double at(double step) const;
  static LinearSchedule constant(double v) { return {v, v, 1.0}; }
};

enum class AttentionInit { Random, Identity, HardcodedRooms };
std::string_view attention_init_name(AttentionInit a);
AttentionInit parse_attention_init(std::string_view s);

struct AgentConfig {
  Mode mode = Mode::AOC;
  int num_options = 4;
  double gamma = 0.99;
  int hidden1 = 60;
  int hidden2 = 200;

  double lr_trunk = 1e-3;
  double lr_value = 1e-3;
  double lr_policy = 1e-4;        // theta
  double lr_termination = 1e-3;   // nu
  double lr_attention = 2e-3;     // phi
  RmsPropConfig rmsprop{};

  LinearSchedule epsilon{1.0, 0.1, 1e5};
  LinearSchedule entropy{1e2, 1e-1, 1e5};

  double w1 = 4.0;  // cosine diversity weight
  double w2 = 2.0;  // temporal regularization weight
  // +1 subtracts the similarity/irregularity penalties from the attention
  // objective (penalize); -1 adds them.
  double attention_loss_sign = 1.0;

  int rollout_length = 5;
  int num_workers = 5;
  double value_loss_weight = 1.0;
  // false: the policy-gradient critic signal is the n-step Q_U estimate;
  // true: Q_U minus Q_Omega(o_w, w).
  bool policy_baseline = true;
  // false: bootstrap max over each option on its own masked observation;
  // true: max over the heads of the executing option's masked observation.
  bool literal_max = false;

  AttentionInit attention_init = AttentionInit::Random;
  double attention_init_scale = 1.0;
  double attention_init_mean = 2.0;
  // Explicit room assignment for hardcoded attention; empty means
  // rooms_round_robin.
  std::vector<std::vector<int>> hardcoded_rooms;

  // Throws ConfigError on invalid values.
  void validate() const;
  // OC forces identity attention and zero attention-loss weights.
  AgentConfig effective() const;
};

// Heads of every option evaluated on its own masked observation of one
// state: heads[w] = network(h_w * s).
struct StateEval {
  int state = -1;
  std::vector<Tape> tapes;
  std::vector<HeadOutputs> heads;

  double q(int option) const { return heads[static_cast<std::size_t>(option)].q[option]; }
  double beta(int option) const { return heads[static_cast<std::size_t>(option)].beta[option]; }
  std::vector<double> own_q() const;
};

StateEval evaluate_state(const Network& net, const AttentionBank& bank, int state, bool record_tapes = true);

// epsilon-greedy over own_q[w] = Q_Omega(o_w, w); ties go to the lowest id.
int select_option(std::span<const double> own_q, double epsilon, Rng& rng);
int greedy_option(std::span<const double> own_q);
// Samples from one simplex row.
Action act(const Eigen::Ref<const Eigen::RowVectorXd>& pi_row, Rng& rng);

// Value on arrival U(w, s'): (1 - beta) Q(o'_w, w) + beta max_v Q(o'_v, v).
double arrival_value(std::span<const HeadOutputs> next, int option, bool literal_max = false);
// r at terminal transitions, r + gamma * U(w, s') otherwise.
double td_target(double r, bool done, std::span<const HeadOutputs> next, int option, double gamma,
                 bool literal_max = false);
// epsilon-soft option-level value: (1 - eps) max_w Q + eps * mean_w Q.
double soft_option_value(std::span<const double> own_q, double epsilon);

struct Transition {
  int state = -1;
  int option = 0;
  int action = 0;
  double reward = 0.0;
  int next_state = -1;
  bool done = false;
  bool truncated = false;
  bool terminated = false;  // termination sampled at next_state
  int eval = -1;            // index of the state_t evaluation in the segment
  int next_eval = -1;       // index of the next-state evaluation; -1 at the goal
};

struct WorkerSegment {
  std::vector<StateEval> evals;
  std::vector<Transition> steps;
};

struct RolloutBatch {
  std::vector<WorkerSegment> workers;
  std::size_t size() const;
};

// Critic signals frozen before differentiation.
struct BatchTargets {
  std::vector<std::vector<double>> returns;     // n-step Q_U estimate per transition
  std::vector<std::vector<double>> critic;      // policy-gradient weight
  std::vector<std::vector<double>> advantage;   // A_Omega(s', w), 0 at the goal
};

BatchTargets compute_targets(const RolloutBatch& batch, const AgentConfig& cfg, double epsilon);

struct LossBreakdown {
  double value = 0.0;        // mean 0.5 (Q - R)^2, weighted
  double policy = 0.0;       // mean -critic * log pi
  double entropy = 0.0;      // mean entropy (bonus, not negated)
  double termination = 0.0;  // mean beta * A
  double attention_q = 0.0;  // mean Q(o_w, w) used by the attention objective
  double diversity = 0.0;    // L1
  double temporal = 0.0;     // L2 averaged over workers
  double network_loss = 0.0;
  double attention_loss = 0.0;
};

// Accumulates the network gradient of
//   mean_t [c_v/2 (Q - R)^2 - C log pi(a) - eta H(pi) + beta(s') A]
// and the attention-logit gradient of
//   -mean_t Q(o_w, w) + sign * (w1 L1 + w2 L2).
LossBreakdown improvement_grads(const Network& net, const AttentionBank& bank, const RolloutBatch& batch,
                                const BatchTargets& targets, const AgentConfig& cfg, double entropy_coef,
                                GradBuffer& net_grads, Eigen::MatrixXd& attention_grads);

struct EpisodeRecord {
  std::uint64_t episode = 0;  // 0-based, in completion order
  int worker = 0;
  double ret = 0.0;
  int length = 0;
  bool reached_goal = false;
  std::uint64_t frames = 0;  // environment frames when it finished
  std::vector<int> option_steps;
};

class Trainer;

class TrainSink {
 public:
  virtual ~TrainSink() = default;
  virtual void on_episode(const EpisodeRecord&) {}
  virtual void on_checkpoint(const Trainer&) {}
};

struct TaskSpec {
  std::optional<Cell> goal;  // random when empty
  std::optional<int> blocked_hallway;
};

// Synchronous multi-worker AOC/OC learner.
class Trainer {
 public:
  Trainer(const AgentConfig& cfg, GridLayout layout, EnvParams env_params, TaskSpec task, std::uint64_t seed);

  // Runs whole rollout windows until `target` episodes have completed in
  // total. Checkpoint callbacks fire every `checkpoint_every` frames
  // (0 disables).
  void run_until(std::uint64_t target_episodes, TrainSink* sink = nullptr, std::uint64_t checkpoint_every = 0);
  // One rollout window plus one update.
  void iterate(TrainSink* sink = nullptr);
  // The two halves of iterate(): gather rollout_length steps from every
  // worker against the current parameters, then apply one update.
  RolloutBatch collect(TrainSink* sink = nullptr);
  void update(const RolloutBatch& batch);

  // Task changes restart every worker's episode.
  void set_goal(Cell goal);
  void block_hallway(int hallway);
  // Replaces goal and blocking together (empty clears the blocking).
  void set_task(Cell goal, std::optional<int> blocked_hallway);
  void set_freeze(const FreezeMask& mask) { freeze_ = mask; }
  const FreezeMask& freeze() const { return freeze_; }
  // Replaces schedules and weights; network and attention are kept.
  void set_config(const AgentConfig& cfg);

  const AgentConfig& config() const { return cfg_; }
  const Network& network() const { return net_; }
  Network& network() { return net_; }
  const AttentionBank& attention() const { return bank_; }
  AttentionBank& attention() { return bank_; }
  const NetworkOptimizer& optimizer() const { return opt_; }
  NetworkOptimizer& optimizer() { return opt_; }
  const FourRooms& env(int worker = 0) const { return workers_.at(static_cast<std::size_t>(worker)).env; }
  const GridLayout& layout() const { return layout_; }
  EnvParams env_params() const { return env_params_; }
  std::uint64_t seed() const { return seed_; }

  std::uint64_t frames() const { return frames_; }
  std::uint64_t episodes() const { return episodes_; }
  std::uint64_t updates() const { return updates_; }
  // Frames counted for the schedules; reset by set_config.
  std::uint64_t schedule_frames() const { return frames_ - schedule_origin_; }
  double epsilon() const;
  double entropy_coef() const;
  const LossBreakdown& last_loss() const { return last_loss_; }

  void restore_counters(std::uint64_t frames, std::uint64_t episodes, std::uint64_t updates);

 private:
  struct Worker {
    FourRooms env;
    Rng rng;
    int state = -1;
    int option = 0;
    bool need_option = true;
    double ep_return = 0.0;
    int ep_length = 0;
    std::vector<int> option_steps;
  };

  void start_episode(Worker& w);
  void configure_optimizer();

  AgentConfig cfg_;
  GridLayout layout_;
  EnvParams env_params_;
  std::uint64_t seed_;
  Network net_;
  NetworkOptimizer opt_;
  AttentionBank bank_;
  FreezeMask freeze_;
  std::vector<Worker> workers_;
  std::uint64_t frames_ = 0;
  std::uint64_t episodes_ = 0;
  std::uint64_t updates_ = 0;
  std::uint64_t schedule_origin_ = 0;
  std::uint64_t next_checkpoint_ = 0;
  LossBreakdown last_loss_;
};

AttentionBank make_attention(const AgentConfig& cfg, const GridLayout& layout, Rng& rng);

}  // namespace aoc
