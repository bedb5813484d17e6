#include "aoc/agent.hpp"

#include <algorithm>
#include <cmath>

#include "aoc/errors.hpp"

namespace aoc {

std::string_view mode_name(Mode m) { return m == Mode::AOC ? "aoc" : "oc"; }

Mode parse_mode(std::string_view s) {
  if (s == "aoc" || s == "AOC") return Mode::AOC;
  if (s == "oc" || s == "OC") return Mode::OC;
  throw ConfigError("unknown mode '" + std::string(s) + "' (expected aoc or oc)");
}

std::string_view attention_init_name(AttentionInit a) {
  switch (a) {
    case AttentionInit::Random: return "random";
    case AttentionInit::Identity: return "identity";
    case AttentionInit::HardcodedRooms: return "hardcoded_rooms";
  }
  return "?";
}

AttentionInit parse_attention_init(std::string_view s) {
  if (s == "random") return AttentionInit::Random;
  if (s == "identity") return AttentionInit::Identity;
  if (s == "hardcoded_rooms") return AttentionInit::HardcodedRooms;
  throw ConfigError("unknown attention init '" + std::string(s) + "'");
}

double LinearSchedule::at(double step) const {
  if (step >= horizon) return end;
  if (step <= 0.0) return start;
  return start + (end - start) * (step / horizon);
}

void AgentConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("agent config: " + m); };
  if (num_options < 1) fail("num_options must be >= 1");
  if (hidden1 < 1 || hidden2 < 1) fail("hidden layer sizes must be >= 1");
  if (!(gamma >= 0.0 && gamma < 1.0)) fail("gamma must lie in [0, 1)");
  for (double lr : {lr_trunk, lr_value, lr_policy, lr_termination, lr_attention}) {
    if (!(lr >= 0.0) || !std::isfinite(lr)) fail("learning rates must be finite and >= 0");
  }
  if (!(rmsprop.decay >= 0.0 && rmsprop.decay < 1.0)) fail("rmsprop decay must lie in [0, 1)");
  if (!(rmsprop.eps > 0.0)) fail("rmsprop eps must be > 0");
  for (const auto* s : {&epsilon, &entropy}) {
    if (s->start < 0.0 || s->end < 0.0) fail("schedules must be non-negative");
    if (!(s->horizon > 0.0)) fail("schedule horizon must be > 0");
  }
  if (epsilon.start > 1.0 || epsilon.end > 1.0) fail("epsilon must not exceed 1");
  if (w1 < 0.0 || w2 < 0.0) fail("w1 and w2 must be >= 0");
  if (rollout_length < 1) fail("rollout_length must be >= 1");
  if (num_workers < 1) fail("num_workers must be >= 1");
  if (value_loss_weight < 0.0) fail("value_loss_weight must be >= 0");
  if (!(attention_init_scale >= 0.0)) fail("attention_init_scale must be >= 0");
  if (!std::isfinite(attention_init_mean)) fail("attention_init_mean must be finite");
  if (!hardcoded_rooms.empty() && static_cast<int>(hardcoded_rooms.size()) != num_options) {
    fail("hardcoded_rooms must list one room set per option");
  }
}

AgentConfig AgentConfig::effective() const {
  AgentConfig c = *this;
  if (c.mode == Mode::OC) {
    c.attention_init = AttentionInit::Identity;
    c.w1 = 0.0;
    c.w2 = 0.0;
  }
  return c;
}

std::vector<double> StateEval::own_q() const {
  std::vector<double> q(heads.size());
  for (std::size_t o = 0; o < heads.size(); ++o) q[o] = heads[o].q[static_cast<Eigen::Index>(o)];
  return q;
}

StateEval evaluate_state(const Network& net, const AttentionBank& bank, int state, bool record_tapes) {
  const int O = bank.num_options();
  StateEval ev;
  ev.state = state;
  ev.heads.reserve(static_cast<std::size_t>(O));
  ev.tapes.resize(record_tapes ? static_cast<std::size_t>(O) : 1);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(bank.dim());
  for (int o = 0; o < O; ++o) {
    x[state] = bank.h(o, state);
    ev.heads.push_back(net.forward(x, ev.tapes[record_tapes ? static_cast<std::size_t>(o) : 0]));
  }
  if (!record_tapes) ev.tapes.clear();
  return ev;
}

int greedy_option(std::span<const double> own_q) {
  int best = 0;
  for (int o = 1; o < static_cast<int>(own_q.size()); ++o) {
    if (own_q[static_cast<std::size_t>(o)] > own_q[static_cast<std::size_t>(best)]) best = o;
  }
  return best;
}

int select_option(std::span<const double> own_q, double epsilon, Rng& rng) {
  if (own_q.empty()) throw UsageError("select_option: no options");
  if (uniform01(rng) < epsilon) return uniform_int(rng, static_cast<int>(own_q.size()));
  return greedy_option(own_q);
}

Action act(const Eigen::Ref<const Eigen::RowVectorXd>& pi_row, Rng& rng) {
  const double u = uniform01(rng);
  double acc = 0.0;
  const Eigen::Index n = pi_row.size();
  for (Eigen::Index a = 0; a < n; ++a) {
    acc += pi_row[a];
    if (u < acc) return static_cast<Action>(a);
  }
  // Rounding left u above the accumulated mass: take the last action with
  // nonzero probability.
  for (Eigen::Index a = n - 1; a >= 0; --a) {
    if (pi_row[a] > 0.0) return static_cast<Action>(a);
  }
  return static_cast<Action>(n - 1);
}

double arrival_value(std::span<const HeadOutputs> next, int option, bool literal_max) {
  const auto& own = next[static_cast<std::size_t>(option)];
  const double beta = own.beta[option];
  const double cont = own.q[option];
  double best;
  if (literal_max) {
    best = own.q.maxCoeff();
  } else {
    best = next[0].q[0];
    for (std::size_t o = 1; o < next.size(); ++o) best = std::max(best, next[o].q[static_cast<Eigen::Index>(o)]);
  }
  return (1.0 - beta) * cont + beta * best;
}

double td_target(double r, bool done, std::span<const HeadOutputs> next, int option, double gamma,
                 bool literal_max) {
  if (done) return r;
  return r + gamma * arrival_value(next, option, literal_max);
}

double soft_option_value(std::span<const double> own_q, double epsilon) {
  double best = own_q[0];
  double sum = 0.0;
  for (double q : own_q) {
    best = std::max(best, q);
    sum += q;
  }
  return (1.0 - epsilon) * best + epsilon * sum / static_cast<double>(own_q.size());
}

std::size_t RolloutBatch::size() const {
  std::size_t n = 0;
  for (const auto& w : workers) n += w.steps.size();
  return n;
}

BatchTargets compute_targets(const RolloutBatch& batch, const AgentConfig& cfg, double epsilon) {
  BatchTargets t;
  t.returns.resize(batch.workers.size());
  t.critic.resize(batch.workers.size());
  t.advantage.resize(batch.workers.size());
  for (std::size_t w = 0; w < batch.workers.size(); ++w) {
    const auto& seg = batch.workers[w];
    const std::size_t n = seg.steps.size();
    auto& ret = t.returns[w];
    auto& critic = t.critic[w];
    auto& adv = t.advantage[w];
    ret.assign(n, 0.0);
    critic.assign(n, 0.0);
    adv.assign(n, 0.0);
    double R = 0.0;
    for (std::size_t i = n; i-- > 0;) {
      const auto& tr = seg.steps[i];
      if (tr.done) {
        R = tr.reward;
      } else if (tr.truncated || i + 1 == n) {
        const auto& next = seg.evals[static_cast<std::size_t>(tr.next_eval)];
        R = tr.reward + cfg.gamma * arrival_value(next.heads, tr.option, cfg.literal_max);
      } else {
        R = tr.reward + cfg.gamma * R;
      }
      ret[i] = R;
      const double q = seg.evals[static_cast<std::size_t>(tr.eval)].q(tr.option);
      critic[i] = cfg.policy_baseline ? R - q : R;
      if (tr.next_eval >= 0) {
        const auto& next = seg.evals[static_cast<std::size_t>(tr.next_eval)];
        const auto own = next.own_q();
        adv[i] = next.q(tr.option) - soft_option_value(own, epsilon);
      }
    }
  }
  return t;
}

LossBreakdown improvement_grads(const Network& net, const AttentionBank& bank, const RolloutBatch& batch,
                                const BatchTargets& targets, const AgentConfig& cfg, double entropy_coef,
                                GradBuffer& net_grads, Eigen::MatrixXd& attention_grads) {
  const auto& shape = net.shape();
  const int O = shape.num_options;
  const int A = shape.num_actions;
  if (bank.num_options() != O || bank.dim() != shape.input_dim) {
    throw UsageError("improvement_grads: attention bank does not match the network");
  }
  if (attention_grads.rows() != O || attention_grads.cols() != bank.dim()) {
    attention_grads = Eigen::MatrixXd::Zero(O, bank.dim());
  }
  const std::size_t total = batch.size();
  LossBreakdown loss;
  if (total == 0) return loss;
  const double inv_n = 1.0 / static_cast<double>(total);
  const bool learn_attention = bank.learnable();

  for (std::size_t w = 0; w < batch.workers.size(); ++w) {
    const auto& seg = batch.workers[w];
    // Loss gradients per (evaluation, option) pair, backpropagated once each.
    std::vector<HeadGrads> head(seg.evals.size() * static_cast<std::size_t>(O));
    std::vector<double> att_dq(seg.evals.size() * static_cast<std::size_t>(O), 0.0);
    auto slot = [&](int e, int o) -> HeadGrads& {
      auto& g = head[static_cast<std::size_t>(e * O + o)];
      if (g.dq.size() == 0) g = HeadGrads::zeros(shape);
      return g;
    };

    for (std::size_t i = 0; i < seg.steps.size(); ++i) {
      const auto& tr = seg.steps[i];
      const int o = tr.option;
      const auto& heads = seg.evals[static_cast<std::size_t>(tr.eval)].heads[static_cast<std::size_t>(o)];
      const double R = targets.returns[w][i];
      const double C = targets.critic[w][i];

      const double q = heads.q[o];
      auto& g = slot(tr.eval, o);
      g.dq[o] += cfg.value_loss_weight * (q - R) * inv_n;
      loss.value += 0.5 * cfg.value_loss_weight * (q - R) * (q - R) * inv_n;

      double H = 0.0;
      for (int a = 0; a < A; ++a) H -= heads.pi(o, a) * heads.log_pi(o, a);
      for (int a = 0; a < A; ++a) {
        const double p = heads.pi(o, a);
        const double indicator = a == tr.action ? 1.0 : 0.0;
        g.dpi_logits(o, a) += (-C * (indicator - p) + entropy_coef * p * (heads.log_pi(o, a) + H)) * inv_n;
      }
      loss.policy -= C * heads.log_pi(o, tr.action) * inv_n;
      loss.entropy += H * inv_n;

      if (tr.next_eval >= 0) {
        const auto& nh = seg.evals[static_cast<std::size_t>(tr.next_eval)].heads[static_cast<std::size_t>(o)];
        const double beta = nh.beta[o];
        const double adv = targets.advantage[w][i];
        slot(tr.next_eval, o).dbeta_logits[o] += adv * beta * (1.0 - beta) * inv_n;
        loss.termination += beta * adv * inv_n;
      }

      loss.attention_q += q * inv_n;
      if (learn_attention) att_dq[static_cast<std::size_t>(tr.eval * O + o)] -= inv_n;
    }

    for (std::size_t e = 0; e < seg.evals.size(); ++e) {
      const auto& ev = seg.evals[e];
      for (int o = 0; o < O; ++o) {
        const auto& g = head[e * static_cast<std::size_t>(O) + static_cast<std::size_t>(o)];
        if (g.dq.size() != 0) net.backward(ev.tapes[static_cast<std::size_t>(o)], g, net_grads);
        const double adq = att_dq[e * static_cast<std::size_t>(O) + static_cast<std::size_t>(o)];
        if (adq != 0.0) {
          HeadGrads ag = HeadGrads::zeros(shape);
          ag.dq[o] = adq;
          const Eigen::VectorXd d_input = net.input_gradient(ev.tapes[static_cast<std::size_t>(o)], ag);
          const double h = bank.h(o, ev.state);
          attention_grads(o, ev.state) += d_input[ev.state] * h * (1.0 - h);
        }
      }
    }
  }

  loss.network_loss = loss.value + loss.policy - entropy_coef * loss.entropy + loss.termination;
  loss.attention_loss = -loss.attention_q;

  if (learn_attention) {
    if (cfg.w1 != 0.0 && O >= 2) {
      const auto l1 = cosine_diversity_loss(bank);
      loss.diversity = l1.value;
      attention_grads += (cfg.attention_loss_sign * cfg.w1) * l1.grad;
    }
    if (cfg.w2 != 0.0) {
      const double inv_w = 1.0 / static_cast<double>(batch.workers.size());
      for (const auto& seg : batch.workers) {
        std::vector<int> chain;
        auto flush = [&] {
          if (chain.size() >= 2) {
            const auto l2 = temporal_reg_loss(bank, chain);
            loss.temporal += l2.value * inv_w;
            attention_grads += (cfg.attention_loss_sign * cfg.w2 * inv_w) * l2.grad;
          }
          chain.clear();
        };
        for (const auto& tr : seg.steps) {
          if (chain.empty()) chain.push_back(tr.state);
          chain.push_back(tr.next_state);
          if (tr.done || tr.truncated) flush();
        }
        flush();
      }
    }
    loss.attention_loss += cfg.attention_loss_sign * (cfg.w1 * loss.diversity + cfg.w2 * loss.temporal);
  }
  return loss;
}

AttentionBank make_attention(const AgentConfig& cfg, const GridLayout& layout, Rng& rng) {
  switch (cfg.attention_init) {
    case AttentionInit::Identity:
      return AttentionBank::identity(cfg.num_options, layout.num_states());
    case AttentionInit::HardcodedRooms:
      return hardcode_rooms(layout, cfg.hardcoded_rooms.empty() ? rooms_round_robin(layout, cfg.num_options)
                                                                : cfg.hardcoded_rooms);
    case AttentionInit::Random:
    default:
      return AttentionBank::random(cfg.num_options, layout.num_states(), rng, cfg.attention_init_scale,
                                   cfg.attention_init_mean);
  }
}

Trainer::Trainer(const AgentConfig& cfg, GridLayout layout, EnvParams env_params, TaskSpec task,
                 std::uint64_t seed)
    : cfg_(cfg.effective()), layout_(std::move(layout)), env_params_(env_params), seed_(seed) {
  cfg_.validate();
  NetworkShape shape;
  shape.input_dim = layout_.num_states();
  shape.num_options = cfg_.num_options;
  shape.num_actions = kNumActions;
  shape.hidden1 = cfg_.hidden1;
  shape.hidden2 = cfg_.hidden2;
  Rng init_rng(derive_seed(seed, 0));
  net_ = Network(shape, init_rng);
  Rng att_rng(derive_seed(seed, 1));
  bank_ = make_attention(cfg_, layout_, att_rng);
  opt_ = NetworkOptimizer(net_, cfg_.rmsprop);
  configure_optimizer();

  if (task.blocked_hallway &&
      (*task.blocked_hallway < 0 || *task.blocked_hallway >= static_cast<int>(layout_.hallways().size()))) {
    throw ConfigError("task: invalid blocked hallway id");
  }
  Cell goal;
  if (task.goal) {
    goal = *task.goal;
  } else {
    Rng goal_rng(derive_seed(seed, 2));
    do {
      goal = layout_.cell_of(uniform_int(goal_rng, layout_.num_states()));
    } while (task.blocked_hallway && layout_.hallways()[static_cast<std::size_t>(*task.blocked_hallway)] == goal);
  }

  workers_.reserve(static_cast<std::size_t>(cfg_.num_workers));
  for (int w = 0; w < cfg_.num_workers; ++w) {
    Worker wk{FourRooms(layout_, env_params_), Rng(derive_seed(seed, 200 + static_cast<std::uint64_t>(w))), -1,
              0, true, 0.0, 0, {}};
    if (task.blocked_hallway) wk.env.block_hallway(*task.blocked_hallway);
    const auto r = wk.env.reset(goal, derive_seed(seed, 100 + static_cast<std::uint64_t>(w)));
    wk.state = r.state;
    wk.option_steps.assign(static_cast<std::size_t>(cfg_.num_options), 0);
    workers_.push_back(std::move(wk));
  }
}

void Trainer::configure_optimizer() {
  opt_.lr = {cfg_.lr_trunk, cfg_.lr_value, cfg_.lr_policy, cfg_.lr_termination};
  opt_.rule = RmsProp(cfg_.rmsprop);
}

double Trainer::epsilon() const { return cfg_.epsilon.at(static_cast<double>(schedule_frames())); }
double Trainer::entropy_coef() const { return cfg_.entropy.at(static_cast<double>(schedule_frames())); }

void Trainer::start_episode(Worker& w) {
  const auto r = w.env.reset();
  w.state = r.state;
  w.need_option = true;
  w.ep_return = 0.0;
  w.ep_length = 0;
  std::fill(w.option_steps.begin(), w.option_steps.end(), 0);
}

void Trainer::set_goal(Cell goal) {
  for (auto& w : workers_) {
    w.env.set_goal(goal);
    start_episode(w);
  }
}

void Trainer::block_hallway(int hallway) {
  for (auto& w : workers_) {
    w.env.block_hallway(hallway);
    start_episode(w);
  }
}

void Trainer::set_task(Cell goal, std::optional<int> blocked_hallway) {
  for (auto& w : workers_) {
    w.env.unblock_hallway();
    w.env.set_goal(goal);
    if (blocked_hallway) w.env.block_hallway(*blocked_hallway);
    start_episode(w);
  }
}

void Trainer::set_config(const AgentConfig& cfg) {
  AgentConfig next = cfg.effective();
  next.validate();
  if (next.num_options != cfg_.num_options || next.num_workers != cfg_.num_workers) {
    throw ConfigError("set_config: option and worker counts cannot change on a live trainer");
  }
  cfg_ = next;
  configure_optimizer();
  schedule_origin_ = frames_;
}

void Trainer::restore_counters(std::uint64_t frames, std::uint64_t episodes, std::uint64_t updates) {
  frames_ = frames;
  episodes_ = episodes;
  updates_ = updates;
  schedule_origin_ = 0;
  next_checkpoint_ = 0;
}

void Trainer::iterate(TrainSink* sink) { update(collect(sink)); }

RolloutBatch Trainer::collect(TrainSink* sink) {
  const double eps = epsilon();
  RolloutBatch batch;
  batch.workers.resize(workers_.size());
  for (std::size_t w = 0; w < workers_.size(); ++w) {
    batch.workers[w].evals.push_back(evaluate_state(net_, bank_, workers_[w].state));
    batch.workers[w].steps.reserve(static_cast<std::size_t>(cfg_.rollout_length));
  }

  for (int t = 0; t < cfg_.rollout_length; ++t) {
    for (std::size_t wi = 0; wi < workers_.size(); ++wi) {
      Worker& w = workers_[wi];
      auto& seg = batch.workers[wi];
      const int cur = static_cast<int>(seg.evals.size()) - 1;
      if (w.need_option) {
        const auto own = seg.evals.back().own_q();
        w.option = select_option(own, eps, w.rng);
        w.need_option = false;
      }
      const auto& heads = seg.evals.back().heads[static_cast<std::size_t>(w.option)];
      const Action a = act(heads.pi.row(w.option), w.rng);
      const StepResult res = w.env.step(a);
      ++frames_;

      Transition tr;
      tr.state = w.state;
      tr.option = w.option;
      tr.action = static_cast<int>(a);
      tr.reward = res.reward;
      tr.next_state = res.state;
      tr.done = res.done;
      tr.truncated = res.truncated;
      tr.eval = cur;
      w.ep_return += res.reward;
      ++w.ep_length;
      ++w.option_steps[static_cast<std::size_t>(w.option)];

      if (res.done || res.truncated) {
        if (res.truncated) {
          seg.evals.push_back(evaluate_state(net_, bank_, res.state));
          tr.next_eval = static_cast<int>(seg.evals.size()) - 1;
        }
        EpisodeRecord rec;
        rec.episode = episodes_++;
        rec.worker = static_cast<int>(wi);
        rec.ret = w.ep_return;
        rec.length = w.ep_length;
        rec.reached_goal = res.done;
        rec.frames = frames_;
        rec.option_steps = w.option_steps;
        if (sink) sink->on_episode(rec);
        start_episode(w);
        seg.evals.push_back(evaluate_state(net_, bank_, w.state));
      } else {
        seg.evals.push_back(evaluate_state(net_, bank_, res.state));
        tr.next_eval = static_cast<int>(seg.evals.size()) - 1;
        const double beta = seg.evals.back().beta(w.option);
        tr.terminated = uniform01(w.rng) < beta;
        if (tr.terminated) w.need_option = true;
        w.state = res.state;
      }
      seg.steps.push_back(tr);
    }
  }
  return batch;
}

void Trainer::update(const RolloutBatch& batch) {
  const auto targets = compute_targets(batch, cfg_, epsilon());
  GradBuffer grads = net_.zero_grads();
  Eigen::MatrixXd att = Eigen::MatrixXd::Zero(bank_.num_options(), bank_.dim());
  last_loss_ = improvement_grads(net_, bank_, batch, targets, cfg_, entropy_coef(), grads, att);
  if (!std::isfinite(last_loss_.network_loss) || !std::isfinite(last_loss_.attention_loss)) {
    throw TrainingError("non-finite loss at update " + std::to_string(updates_) + " (frames " +
                        std::to_string(frames_) + "): value=" + std::to_string(last_loss_.value) +
                        " policy=" + std::to_string(last_loss_.policy) +
                        " termination=" + std::to_string(last_loss_.termination));
  }
  opt_.apply(net_, grads, freeze_);
  if (bank_.learnable() && !freeze_.attention) {
    if (!att.allFinite()) throw TrainingError("non-finite attention gradient at update " + std::to_string(updates_));
    bank_.rmsprop_step(opt_.rule, att, cfg_.lr_attention);
  }
  ++updates_;
}

void Trainer::run_until(std::uint64_t target_episodes, TrainSink* sink, std::uint64_t checkpoint_every) {
  if (checkpoint_every > 0 && next_checkpoint_ <= frames_) {
    next_checkpoint_ = (frames_ / checkpoint_every + 1) * checkpoint_every;
  }
  while (episodes_ < target_episodes) {
    iterate(sink);
    if (checkpoint_every > 0 && frames_ >= next_checkpoint_) {
      if (sink) sink->on_checkpoint(*this);
      while (next_checkpoint_ <= frames_) next_checkpoint_ += checkpoint_every;
    }
  }
}

}  // namespace aoc
