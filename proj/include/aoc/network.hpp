#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "aoc/rng.hpp"

namespace aoc {

struct NetworkShape {
  int input_dim = 0;
  int num_options = 4;
  int num_actions = 4;
  int hidden1 = 60;
  int hidden2 = 200;

  bool operator==(const NetworkShape&) const = default;
};

// Parameter tensors in storage order. Biases are single-column matrices.
enum class Tensor : int {
  W1 = 0, b1, W2, b2,        // shared trunk
  Wq, bq,                    // option values
  Wpi, bpi,                  // intra-option policy logits, row o*A + a
  Wbeta, bbeta,              // termination logits
  Count
};
inline constexpr int kNumTensors = static_cast<int>(Tensor::Count);
std::string_view tensor_name(Tensor t);

enum class ParamGroup : int { Trunk = 0, ValueHead, PolicyHead, TerminationHead, Count };
inline constexpr int kNumGroups = static_cast<int>(ParamGroup::Count);
ParamGroup group_of(Tensor t);
std::string_view group_name(ParamGroup g);

using TensorArray = std::array<Eigen::MatrixXd, kNumTensors>;

// Gradient slots mirroring NetworkParams.
struct GradBuffer {
  TensorArray t;

  Eigen::MatrixXd& operator[](Tensor k) { return t[static_cast<std::size_t>(k)]; }
  const Eigen::MatrixXd& operator[](Tensor k) const { return t[static_cast<std::size_t>(k)]; }
  void zero();
  bool all_finite() const;
};

struct HeadOutputs {
  Eigen::VectorXd q;         // Q_Omega per option
  Eigen::MatrixXd pi;        // options x actions, rows on the simplex
  Eigen::MatrixXd log_pi;    // stable log-softmax of the same rows
  Eigen::VectorXd beta;      // termination probability per option
};

// Intermediate activations of one forward pass. Only valid for the
// parameter version it was recorded against.
struct Tape {
  Eigen::VectorXd input;
  Eigen::VectorXd h1;  // post-ReLU
  Eigen::VectorXd h2;  // post-ReLU
  std::uint64_t version = 0;
};

// Loss gradients with respect to the head pre-activations: option values,
// policy logits (options x actions) and termination logits.
struct HeadGrads {
  Eigen::VectorXd dq;
  Eigen::MatrixXd dpi_logits;
  Eigen::VectorXd dbeta_logits;

  static HeadGrads zeros(const NetworkShape& s);
  void set_zero();
  bool any_nonzero() const;
};

// Shared trunk (input -> 60 -> 200, ReLU) with value, softmax policy and
// logistic termination heads.
class Network {
 public:
  Network() = default;
  // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases.
  Network(const NetworkShape& shape, Rng& rng);

  const NetworkShape& shape() const { return shape_; }
  Eigen::MatrixXd& operator[](Tensor k) { return params_[static_cast<std::size_t>(k)]; }
  const Eigen::MatrixXd& operator[](Tensor k) const { return params_[static_cast<std::size_t>(k)]; }
  TensorArray& tensors() { return params_; }
  const TensorArray& tensors() const { return params_; }

  std::uint64_t version() const { return version_; }
  // Any in-place parameter change must call this so existing tapes go stale.
  void bump_version() { ++version_; }

  HeadOutputs forward(const Eigen::VectorXd& masked_obs) const;
  // Same outputs, recording activations for backward().
  HeadOutputs forward(const Eigen::VectorXd& masked_obs, Tape& tape) const;

  // Accumulates dLoss/dparams into `grads`; writes dLoss/dinput when
  // `input_grad` is non-null.
  void backward(const Tape& tape, const HeadGrads& loss_grads, GradBuffer& grads,
                Eigen::VectorXd* input_grad = nullptr) const;
  // dLoss/dinput only; parameters untouched.
  Eigen::VectorXd input_gradient(const Tape& tape, const HeadGrads& loss_grads) const;

  GradBuffer zero_grads() const;

 private:
  void check_tape(const Tape& tape) const;

  NetworkShape shape_;
  TensorArray params_;
  std::uint64_t version_ = 1;
};

struct RmsPropConfig {
  double decay = 0.99;
  double eps = 1e-5;
};

// p <- p - lr * g / (sqrt(v) + eps),  v <- decay * v + (1 - decay) * g^2
class RmsProp {
 public:
  explicit RmsProp(RmsPropConfig cfg = {}) : cfg_(cfg) {}
  const RmsPropConfig& config() const { return cfg_; }
  // Throws TrainingError on a non-finite gradient entry.
  void step(Eigen::MatrixXd& param, const Eigen::MatrixXd& grad, Eigen::MatrixXd& accum,
            double lr) const;

 private:
  RmsPropConfig cfg_;
};

// Skips frozen tensors exactly: neither the parameter nor its accumulator
// is touched.
struct FreezeMask {
  std::array<bool, kNumGroups> frozen{};
  bool attention = false;

  bool is_frozen(Tensor t) const { return frozen[static_cast<std::size_t>(group_of(t))]; }
  bool operator==(const FreezeMask&) const = default;
};
// Group names: trunk, value_head, policy_head, termination_head, attention,
// heads (all three heads), all. Unknown names throw ConfigError.
FreezeMask freeze_mask(const std::vector<std::string>& groups);

struct NetworkOptimizer {
  RmsProp rule;
  TensorArray accum;
  // Per-group learning rates, indexed by ParamGroup.
  std::array<double, kNumGroups> lr{1e-3, 1e-3, 1e-3, 1e-3};

  NetworkOptimizer() = default;
  NetworkOptimizer(const Network& net, RmsPropConfig cfg);
  void apply(Network& net, const GradBuffer& grads, const FreezeMask& mask = {});
};

}  // namespace aoc
