#include "aoc/network.hpp"

#include <cmath>

#include "aoc/errors.hpp"

namespace aoc {

namespace {

constexpr std::array<std::string_view, kNumTensors> kTensorNames{
    "trunk.w1", "trunk.b1", "trunk.w2", "trunk.b2", "q.w", "q.b", "pi.w", "pi.b", "beta.w", "beta.b"};

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

std::string_view tensor_name(Tensor t) { return kTensorNames[static_cast<std::size_t>(t)]; }

ParamGroup group_of(Tensor t) {
  switch (t) {
    case Tensor::W1:
    case Tensor::b1:
    case Tensor::W2:
    case Tensor::b2:
      return ParamGroup::Trunk;
    case Tensor::Wq:
    case Tensor::bq:
      return ParamGroup::ValueHead;
    case Tensor::Wpi:
    case Tensor::bpi:
      return ParamGroup::PolicyHead;
    default:
      return ParamGroup::TerminationHead;
  }
}

std::string_view group_name(ParamGroup g) {
  switch (g) {
    case ParamGroup::Trunk: return "trunk";
    case ParamGroup::ValueHead: return "value_head";
    case ParamGroup::PolicyHead: return "policy_head";
    case ParamGroup::TerminationHead: return "termination_head";
    default: return "?";
  }
}

void GradBuffer::zero() {
  for (auto& m : t) m.setZero();
}

bool GradBuffer::all_finite() const {
  for (const auto& m : t) {
    if (!m.allFinite()) return false;
  }
  return true;
}

HeadGrads HeadGrads::zeros(const NetworkShape& s) {
  HeadGrads g;
  g.dq = Eigen::VectorXd::Zero(s.num_options);
  g.dpi_logits = Eigen::MatrixXd::Zero(s.num_options, s.num_actions);
  g.dbeta_logits = Eigen::VectorXd::Zero(s.num_options);
  return g;
}

void HeadGrads::set_zero() {
  dq.setZero();
  dpi_logits.setZero();
  dbeta_logits.setZero();
}

bool HeadGrads::any_nonzero() const {
  return (dq.array() != 0.0).any() || (dpi_logits.array() != 0.0).any() ||
         (dbeta_logits.array() != 0.0).any();
}

Network::Network(const NetworkShape& shape, Rng& rng) : shape_(shape) {
  if (shape.input_dim <= 0 || shape.num_options <= 0 || shape.num_actions <= 0 || shape.hidden1 <= 0 ||
      shape.hidden2 <= 0) {
    throw ConfigError("network: all layer sizes must be positive");
  }
  const int O = shape.num_options;
  const int A = shape.num_actions;
  struct Layer {
    Tensor w, b;
    int out, in;
  };
  const std::array<Layer, 5> layers{{{Tensor::W1, Tensor::b1, shape.hidden1, shape.input_dim},
                                     {Tensor::W2, Tensor::b2, shape.hidden2, shape.hidden1},
                                     {Tensor::Wq, Tensor::bq, O, shape.hidden2},
                                     {Tensor::Wpi, Tensor::bpi, O * A, shape.hidden2},
                                     {Tensor::Wbeta, Tensor::bbeta, O, shape.hidden2}}};
  for (const auto& l : layers) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(l.in));
    auto draw = [&] { return (2.0 * uniform01(rng) - 1.0) * bound; };
    auto& w = (*this)[l.w];
    auto& b = (*this)[l.b];
    w.resize(l.out, l.in);
    b.resize(l.out, 1);
    for (int j = 0; j < l.in; ++j)
      for (int i = 0; i < l.out; ++i) w(i, j) = draw();
    for (int i = 0; i < l.out; ++i) b(i, 0) = draw();
  }
}

GradBuffer Network::zero_grads() const {
  GradBuffer g;
  for (int k = 0; k < kNumTensors; ++k) {
    const auto& p = params_[static_cast<std::size_t>(k)];
    g.t[static_cast<std::size_t>(k)] = Eigen::MatrixXd::Zero(p.rows(), p.cols());
  }
  return g;
}

HeadOutputs Network::forward(const Eigen::VectorXd& masked_obs) const {
  Tape tape;
  return forward(masked_obs, tape);
}

HeadOutputs Network::forward(const Eigen::VectorXd& x, Tape& tape) const {
  if (x.size() != shape_.input_dim) {
    throw UsageError("network: input has " + std::to_string(x.size()) + " entries, expected " +
                     std::to_string(shape_.input_dim));
  }
  const auto& W1 = (*this)[Tensor::W1];
  // Observations are one-hot after masking, so only nonzero columns of W1
  // are touched.
  tape.input = x;
  tape.h1 = (*this)[Tensor::b1].col(0);
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    if (x[j] != 0.0) tape.h1.noalias() += W1.col(j) * x[j];
  }
  tape.h1 = tape.h1.cwiseMax(0.0);
  tape.h2.noalias() = (*this)[Tensor::W2] * tape.h1;
  tape.h2 = (tape.h2 + (*this)[Tensor::b2].col(0)).cwiseMax(0.0);

  const int O = shape_.num_options;
  const int A = shape_.num_actions;
  HeadOutputs out;
  out.q.noalias() = (*this)[Tensor::Wq] * tape.h2;
  out.q += (*this)[Tensor::bq].col(0);

  Eigen::VectorXd logits = (*this)[Tensor::Wpi] * tape.h2 + (*this)[Tensor::bpi].col(0);
  out.pi.resize(O, A);
  out.log_pi.resize(O, A);
  for (int o = 0; o < O; ++o) {
    const auto row = logits.segment(o * A, A);
    const double m = row.maxCoeff();
    const double lse = m + std::log((row.array() - m).exp().sum());
    for (int a = 0; a < A; ++a) {
      out.log_pi(o, a) = row[a] - lse;
      out.pi(o, a) = std::exp(out.log_pi(o, a));
    }
  }

  Eigen::VectorXd beta_logits = (*this)[Tensor::Wbeta] * tape.h2 + (*this)[Tensor::bbeta].col(0);
  out.beta.resize(O);
  for (int o = 0; o < O; ++o) out.beta[o] = sigmoid(beta_logits[o]);
  tape.version = version_;
  return out;
}

void Network::check_tape(const Tape& tape) const {
  if (tape.version != version_) throw UsageError("network: tape is stale (parameters changed since forward)");
}

void Network::backward(const Tape& tape, const HeadGrads& g, GradBuffer& grads,
                       Eigen::VectorXd* input_grad) const {
  check_tape(tape);
  const int O = shape_.num_options;
  const int A = shape_.num_actions;
  // Policy logits are laid out o*A + a in the head.
  Eigen::VectorXd dpl(O * A);
  for (int o = 0; o < O; ++o)
    for (int a = 0; a < A; ++a) dpl[o * A + a] = g.dpi_logits(o, a);

  grads[Tensor::Wq].noalias() += g.dq * tape.h2.transpose();
  grads[Tensor::bq].col(0) += g.dq;
  grads[Tensor::Wpi].noalias() += dpl * tape.h2.transpose();
  grads[Tensor::bpi].col(0) += dpl;
  grads[Tensor::Wbeta].noalias() += g.dbeta_logits * tape.h2.transpose();
  grads[Tensor::bbeta].col(0) += g.dbeta_logits;

  Eigen::VectorXd g2 = (*this)[Tensor::Wq].transpose() * g.dq;
  g2.noalias() += (*this)[Tensor::Wpi].transpose() * dpl;
  g2.noalias() += (*this)[Tensor::Wbeta].transpose() * g.dbeta_logits;
  g2 = (tape.h2.array() > 0.0).select(g2, 0.0);

  grads[Tensor::W2].noalias() += g2 * tape.h1.transpose();
  grads[Tensor::b2].col(0) += g2;

  Eigen::VectorXd g1 = (*this)[Tensor::W2].transpose() * g2;
  g1 = (tape.h1.array() > 0.0).select(g1, 0.0);

  auto& gW1 = grads[Tensor::W1];
  for (Eigen::Index j = 0; j < tape.input.size(); ++j) {
    if (tape.input[j] != 0.0) gW1.col(j) += g1 * tape.input[j];
  }
  grads[Tensor::b1].col(0) += g1;

  if (input_grad) *input_grad = (*this)[Tensor::W1].transpose() * g1;
}

Eigen::VectorXd Network::input_gradient(const Tape& tape, const HeadGrads& g) const {
  check_tape(tape);
  const int O = shape_.num_options;
  const int A = shape_.num_actions;
  Eigen::VectorXd dpl(O * A);
  for (int o = 0; o < O; ++o)
    for (int a = 0; a < A; ++a) dpl[o * A + a] = g.dpi_logits(o, a);

  Eigen::VectorXd g2 = (*this)[Tensor::Wq].transpose() * g.dq;
  g2.noalias() += (*this)[Tensor::Wpi].transpose() * dpl;
  g2.noalias() += (*this)[Tensor::Wbeta].transpose() * g.dbeta_logits;
  g2 = (tape.h2.array() > 0.0).select(g2, 0.0);
  Eigen::VectorXd g1 = (*this)[Tensor::W2].transpose() * g2;
  g1 = (tape.h1.array() > 0.0).select(g1, 0.0);
  return (*this)[Tensor::W1].transpose() * g1;
}

void RmsProp::step(Eigen::MatrixXd& p, const Eigen::MatrixXd& g, Eigen::MatrixXd& v, double lr) const {
  if (!g.allFinite()) throw TrainingError("rmsprop: non-finite gradient");
  v = cfg_.decay * v + (1.0 - cfg_.decay) * g.cwiseAbs2();
  p.array() -= lr * g.array() / (v.array().sqrt() + cfg_.eps);
}

FreezeMask freeze_mask(const std::vector<std::string>& groups) {
  FreezeMask m;
  for (const auto& name : groups) {
    bool known = false;
    for (int k = 0; k < kNumGroups; ++k) {
      if (name == group_name(static_cast<ParamGroup>(k))) {
        m.frozen[static_cast<std::size_t>(k)] = true;
        known = true;
      }
    }
    if (name == "heads") {
      m.frozen[1] = m.frozen[2] = m.frozen[3] = true;
      known = true;
    } else if (name == "attention") {
      m.attention = true;
      known = true;
    } else if (name == "all") {
      m.frozen.fill(true);
      m.attention = true;
      known = true;
    }
    if (!known) throw ConfigError("freeze: unknown parameter group '" + name + "'");
  }
  return m;
}

NetworkOptimizer::NetworkOptimizer(const Network& net, RmsPropConfig cfg) : rule(cfg) {
  for (int k = 0; k < kNumTensors; ++k) {
    const auto& p = net.tensors()[static_cast<std::size_t>(k)];
    accum[static_cast<std::size_t>(k)] = Eigen::MatrixXd::Zero(p.rows(), p.cols());
  }
}

void NetworkOptimizer::apply(Network& net, const GradBuffer& grads, const FreezeMask& mask) {
  if (!grads.all_finite()) throw TrainingError("optimizer: non-finite gradient in network update");
  for (int k = 0; k < kNumTensors; ++k) {
    const auto t = static_cast<Tensor>(k);
    if (mask.is_frozen(t)) continue;
    rule.step(net[t], grads[t], accum[static_cast<std::size_t>(k)],
              lr[static_cast<std::size_t>(group_of(t))]);
  }
  net.bump_version();
}

}  // namespace aoc
