#include "aoc/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "aoc/errors.hpp"

namespace aoc {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'A', 'O', 'C', 'C', 'K', 'P', 'T', '\0'};

const std::string kAttentionLogits = "attention.logits";
const std::string kAttentionH = "attention.h";
const std::string kAttentionAccum = "attention.rmsprop";

std::string accum_name(Tensor t) { return "rmsprop." + std::string(tensor_name(t)); }

template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& in, const std::string& path) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw ConfigError("checkpoint " + path + ": truncated");
  return v;
}

nlohmann::json meta_to_json(const CheckpointMeta& m) {
  nlohmann::json j;
  j["shape"] = {{"input_dim", m.shape.input_dim},
                {"num_options", m.shape.num_options},
                {"num_actions", m.shape.num_actions},
                {"hidden1", m.shape.hidden1},
                {"hidden2", m.shape.hidden2}};
  j["mode"] = m.mode;
  j["seed"] = m.seed;
  j["goal"] = {m.goal.row, m.goal.col};
  j["blocked_hallway"] = m.blocked_hallway ? nlohmann::json(*m.blocked_hallway) : nlohmann::json(nullptr);
  j["frames"] = m.frames;
  j["episodes"] = m.episodes;
  j["updates"] = m.updates;
  j["layout"] = m.layout;
  j["rmsprop"] = {{"decay", m.rmsprop.decay}, {"eps", m.rmsprop.eps}};
  j["attention_learnable"] = m.attention_learnable;
  return j;
}

CheckpointMeta meta_from_json(const nlohmann::json& j) {
  CheckpointMeta m;
  const auto& s = j.at("shape");
  m.shape.input_dim = s.at("input_dim").get<int>();
  m.shape.num_options = s.at("num_options").get<int>();
  m.shape.num_actions = s.at("num_actions").get<int>();
  m.shape.hidden1 = s.at("hidden1").get<int>();
  m.shape.hidden2 = s.at("hidden2").get<int>();
  m.mode = j.at("mode").get<std::string>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.goal = {j.at("goal").at(0).get<int>(), j.at("goal").at(1).get<int>()};
  if (!j.at("blocked_hallway").is_null()) m.blocked_hallway = j.at("blocked_hallway").get<int>();
  m.frames = j.at("frames").get<std::uint64_t>();
  m.episodes = j.at("episodes").get<std::uint64_t>();
  m.updates = j.at("updates").get<std::uint64_t>();
  m.layout = j.at("layout").get<std::string>();
  m.rmsprop.decay = j.at("rmsprop").at("decay").get<double>();
  m.rmsprop.eps = j.at("rmsprop").at("eps").get<double>();
  m.attention_learnable = j.at("attention_learnable").get<bool>();
  return m;
}

bool same_bits(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  return a.size() == 0 || std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

}  // namespace

const Eigen::MatrixXd& Checkpoint::tensor(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return t.value;
  throw ConfigError("checkpoint: missing tensor '" + name + "'");
}

bool Checkpoint::has(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return true;
  return false;
}

Checkpoint capture(const Trainer& trainer) {
  Checkpoint c;
  auto& m = c.meta;
  m.shape = trainer.network().shape();
  m.mode = std::string(mode_name(trainer.config().mode));
  m.seed = trainer.seed();
  m.goal = trainer.env().goal();
  m.blocked_hallway = trainer.env().blocked_hallway();
  m.frames = trainer.frames();
  m.episodes = trainer.episodes();
  m.updates = trainer.updates();
  m.layout = trainer.layout().to_text();
  m.rmsprop = trainer.optimizer().rule.config();
  m.attention_learnable = trainer.attention().learnable();

  for (int k = 0; k < kNumTensors; ++k) {
    const auto t = static_cast<Tensor>(k);
    c.tensors.push_back({std::string(tensor_name(t)), trainer.network()[t]});
  }
  for (int k = 0; k < kNumTensors; ++k) {
    const auto t = static_cast<Tensor>(k);
    c.tensors.push_back({accum_name(t), trainer.optimizer().accum[static_cast<std::size_t>(k)]});
  }
  c.tensors.push_back({kAttentionLogits, trainer.attention().logits()});
  c.tensors.push_back({kAttentionH, trainer.attention().h()});
  c.tensors.push_back({kAttentionAccum, trainer.attention().accumulator()});
  return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("checkpoint: cannot write " + path);
  const std::string meta = meta_to_json(ckpt.meta).dump();
  out.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, meta.size());
  out.write(meta.data(), static_cast<std::streamsize>(meta.size()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& t : ckpt.tensors) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.name.size()));
    out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.value.rows()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.value.cols()));
    out.write(reinterpret_cast<const char*>(t.value.data()),
              static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(t.value.size())));
  }
  if (!out) throw ConfigError("checkpoint: write failed for " + path);
}

void save_checkpoint(const Trainer& trainer, const std::string& path) { save_checkpoint(capture(trainer), path); }

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("checkpoint: cannot open " + path);
  char magic[sizeof(kMagic)];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw ConfigError("checkpoint " + path + ": bad magic");
  }
  const auto version = get<std::uint32_t>(in, path);
  if (version != kCheckpointVersion) {
    throw ConfigError("checkpoint " + path + ": unsupported version " + std::to_string(version));
  }
  const auto meta_len = get<std::uint64_t>(in, path);
  if (meta_len > (1u << 26)) throw ConfigError("checkpoint " + path + ": implausible meta length");
  std::string meta(meta_len, '\0');
  if (!in.read(meta.data(), static_cast<std::streamsize>(meta_len))) {
    throw ConfigError("checkpoint " + path + ": truncated");
  }
  Checkpoint c;
  try {
    c.meta = meta_from_json(nlohmann::json::parse(meta));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("checkpoint " + path + ": bad meta block: " + e.what());
  }
  const auto count = get<std::uint32_t>(in, path);
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    const auto len = get<std::uint32_t>(in, path);
    if (len > 4096) throw ConfigError("checkpoint " + path + ": implausible tensor name length");
    t.name.resize(len);
    if (!in.read(t.name.data(), len)) throw ConfigError("checkpoint " + path + ": truncated");
    const auto rows = get<std::uint32_t>(in, path);
    const auto cols = get<std::uint32_t>(in, path);
    if (static_cast<std::uint64_t>(rows) * cols > (1ull << 28)) {
      throw ConfigError("checkpoint " + path + ": implausible tensor size");
    }
    t.value.resize(rows, cols);
    if (!in.read(reinterpret_cast<char*>(t.value.data()),
                 static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(t.value.size())))) {
      throw ConfigError("checkpoint " + path + ": truncated");
    }
    c.tensors.push_back(std::move(t));
  }
  return c;
}

void restore(Trainer& trainer, const Checkpoint& ckpt) {
  const auto& m = ckpt.meta;
  if (!(m.shape == trainer.network().shape())) throw ConfigError("checkpoint: network shape mismatch");
  if (m.layout != trainer.layout().to_text()) throw ConfigError("checkpoint: layout mismatch");
  if (m.mode != mode_name(trainer.config().mode)) {
    throw ConfigError("checkpoint: trained in " + m.mode + " mode, learner is " +
                      std::string(mode_name(trainer.config().mode)));
  }
  if (m.attention_learnable != trainer.attention().learnable()) {
    throw ConfigError("checkpoint: attention kind mismatch (learnable vs fixed)");
  }

  Network& net = trainer.network();
  auto& opt = trainer.optimizer();
  for (int k = 0; k < kNumTensors; ++k) {
    const auto t = static_cast<Tensor>(k);
    const auto& value = ckpt.tensor(std::string(tensor_name(t)));
    const auto& accum = ckpt.tensor(accum_name(t));
    if (value.rows() != net[t].rows() || value.cols() != net[t].cols() || accum.rows() != value.rows() ||
        accum.cols() != value.cols()) {
      throw ConfigError("checkpoint: tensor '" + std::string(tensor_name(t)) + "' has the wrong shape");
    }
  }
  const auto& logits = ckpt.tensor(kAttentionLogits);
  const auto& h = ckpt.tensor(kAttentionH);
  const auto& att_accum = ckpt.tensor(kAttentionAccum);
  const auto& bank = trainer.attention();
  for (const auto* t : {&logits, &h, &att_accum}) {
    if (t->rows() != bank.num_options() || t->cols() != bank.dim()) {
      throw ConfigError("checkpoint: attention has the wrong shape");
    }
  }

  for (int k = 0; k < kNumTensors; ++k) {
    const auto t = static_cast<Tensor>(k);
    net[t] = ckpt.tensor(std::string(tensor_name(t)));
    opt.accum[static_cast<std::size_t>(k)] = ckpt.tensor(accum_name(t));
  }
  net.bump_version();
  opt.rule = RmsProp(m.rmsprop);

  AttentionBank restored = m.attention_learnable ? AttentionBank::from_logits(logits) : AttentionBank::fixed(h);
  restored.accumulator() = att_accum;
  trainer.attention() = std::move(restored);

  trainer.set_task(m.goal, m.blocked_hallway);
  trainer.restore_counters(m.frames, m.episodes, m.updates);
}

bool identical(const Checkpoint& a, const Checkpoint& b) {
  if (meta_to_json(a.meta).dump() != meta_to_json(b.meta).dump()) return false;
  if (a.tensors.size() != b.tensors.size()) return false;
  for (std::size_t i = 0; i < a.tensors.size(); ++i) {
    if (a.tensors[i].name != b.tensors[i].name) return false;
    if (!same_bits(a.tensors[i].value, b.tensors[i].value)) return false;
  }
  return true;
}

}  // namespace aoc
