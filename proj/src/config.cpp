#include "aoc/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <type_traits>

#include "aoc/errors.hpp"

namespace aoc {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

double to_double(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || s.empty()) {
    throw ConfigError("expected a number, got '" + std::string(s) + "'");
  }
  return v;
}

std::int64_t to_int(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  std::int64_t v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec == std::errc() && p == s.data() + s.size() && !s.empty()) return v;
  // Accept integral values written in floating form, e.g. 1e5.
  const double d = to_double(s);
  if (d != static_cast<double>(static_cast<std::int64_t>(d))) {
    throw ConfigError("expected an integer, got '" + std::string(s) + "'");
  }
  return static_cast<std::int64_t>(d);
}

std::uint64_t to_count(std::string_view s) {
  const auto v = to_int(s);
  if (v < 0) throw ConfigError("expected a non-negative integer, got '" + std::string(trim(s)) + "'");
  return static_cast<std::uint64_t>(v);
}

template <class T>
void set_integer(T& member, std::string_view s) {
  if constexpr (std::is_unsigned_v<T>) {
    member = static_cast<T>(to_count(s));
  } else {
    member = static_cast<T>(to_int(s));
  }
}

bool to_bool(std::string_view s) {
  s = trim(s);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ConfigError("expected true or false, got '" + std::string(s) + "'");
}

std::string bool_text(bool b) { return b ? "true" : "false"; }

std::vector<std::uint64_t> to_seeds(std::string_view s) {
  std::vector<std::uint64_t> out;
  for (auto part : split(s, ',')) {
    if (part.empty()) continue;
    const auto dash = part.find('-');
    if (dash != std::string_view::npos && dash > 0) {
      const auto lo = to_count(part.substr(0, dash));
      const auto hi = to_count(part.substr(dash + 1));
      if (hi < lo) throw ConfigError("seed range '" + std::string(part) + "' is empty");
      if (hi - lo > 100000) throw ConfigError("seed range '" + std::string(part) + "' is too large");
      for (auto v = lo; v <= hi; ++v) out.push_back(v);
    } else {
      out.push_back(to_count(part));
    }
  }
  return out;
}

template <class T, class F>
std::string join(const std::vector<T>& v, F fmt) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += fmt(v[i]);
  }
  return out;
}

std::vector<std::vector<int>> to_rooms(std::string_view s) {
  s = trim(s);
  if (s == "auto" || s.empty()) return {};
  std::vector<std::vector<int>> out;
  for (auto group : split(s, ';')) {
    std::vector<int> rooms;
    for (auto r : split(group, ',')) rooms.push_back(static_cast<int>(to_int(r)));
    out.push_back(std::move(rooms));
  }
  return out;
}

std::string rooms_text(const std::vector<std::vector<int>>& rooms) {
  if (rooms.empty()) return "auto";
  std::string out;
  for (std::size_t o = 0; o < rooms.size(); ++o) {
    if (o) out += ';';
    out += join(rooms[o], [](int r) { return std::to_string(r); });
  }
  return out;
}

TransferSettings& transfer(RunConfig& c) {
  if (!c.transfer) c.transfer.emplace();
  return *c.transfer;
}

struct Field {
  ConfigKey key;
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::optional<std::string>(const RunConfig&)> get;  // empty: omitted from to_text
};

#define NUM_FIELD(KEY, DOC, MEMBER)                                                      \
  Field {                                                                                \
    {KEY, DOC}, [](RunConfig& c, std::string_view v) { c.MEMBER = to_double(v); },     \
        [](const RunConfig& c) -> std::optional<std::string> { return format_double(c.MEMBER); } \
  }
#define INT_FIELD(KEY, DOC, MEMBER)                                                                      \
  Field {                                                                                                \
    {KEY, DOC}, [](RunConfig& c, std::string_view v) { set_integer(c.MEMBER, v); },                       \
        [](const RunConfig& c) -> std::optional<std::string> { return std::to_string(c.MEMBER); }       \
  }
#define STR_FIELD(KEY, DOC, MEMBER)                                                          \
  Field {                                                                                    \
    {KEY, DOC}, [](RunConfig& c, std::string_view v) { c.MEMBER = std::string(trim(v)); }, \
        [](const RunConfig& c) -> std::optional<std::string> { return c.MEMBER; }           \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> f = {
      STR_FIELD("name", "experiment name", name),
      Field{{"mode", "aoc or oc"},
            [](RunConfig& c, std::string_view v) { c.agent.mode = parse_mode(trim(v)); },
            [](const RunConfig& c) -> std::optional<std::string> { return std::string(mode_name(c.agent.mode)); }},
      INT_FIELD("num_options", "number of options", agent.num_options),
      NUM_FIELD("gamma", "discount factor", agent.gamma),
      INT_FIELD("hidden1", "first trunk layer width", agent.hidden1),
      INT_FIELD("hidden2", "second trunk layer width", agent.hidden2),
      NUM_FIELD("lr_trunk", "RMSprop learning rate of the shared trunk", agent.lr_trunk),
      NUM_FIELD("lr_value", "learning rate of the option-value head", agent.lr_value),
      NUM_FIELD("lr_policy", "learning rate of the intra-option policy head", agent.lr_policy),
      NUM_FIELD("lr_termination", "learning rate of the termination head", agent.lr_termination),
      NUM_FIELD("lr_attention", "learning rate of the attention logits", agent.lr_attention),
      NUM_FIELD("rmsprop_decay", "RMSprop squared-gradient decay", agent.rmsprop.decay),
      NUM_FIELD("rmsprop_eps", "RMSprop denominator epsilon", agent.rmsprop.eps),
      NUM_FIELD("epsilon_start", "option exploration at frame 0", agent.epsilon.start),
      NUM_FIELD("epsilon_end", "option exploration after the horizon", agent.epsilon.end),
      NUM_FIELD("epsilon_horizon", "frames over which epsilon decays", agent.epsilon.horizon),
      NUM_FIELD("entropy_start", "entropy coefficient at frame 0", agent.entropy.start),
      NUM_FIELD("entropy_end", "entropy coefficient after the horizon", agent.entropy.end),
      NUM_FIELD("entropy_horizon", "frames over which the entropy coefficient decays", agent.entropy.horizon),
      NUM_FIELD("w1", "weight of the cosine diversity loss", agent.w1),
      NUM_FIELD("w2", "weight of the temporal regularization loss", agent.w2),
      NUM_FIELD("attention_loss_sign", "+1 penalizes similarity and irregularity, -1 rewards them",
                agent.attention_loss_sign),
      INT_FIELD("rollout_length", "steps per worker per update", agent.rollout_length),
      INT_FIELD("num_workers", "synchronous environment copies", agent.num_workers),
      NUM_FIELD("value_loss_weight", "scale of the value regression loss", agent.value_loss_weight),
      Field{{"policy_baseline", "subtract Q(o_w, w) from the n-step return in the policy gradient"},
            [](RunConfig& c, std::string_view v) { c.agent.policy_baseline = to_bool(v); },
            [](const RunConfig& c) -> std::optional<std::string> { return bool_text(c.agent.policy_baseline); }},
      Field{{"literal_max", "bootstrap max over the executing option's masked observation"},
            [](RunConfig& c, std::string_view v) { c.agent.literal_max = to_bool(v); },
            [](const RunConfig& c) -> std::optional<std::string> { return bool_text(c.agent.literal_max); }},
      Field{{"attention_init", "random, identity or hardcoded_rooms"},
            [](RunConfig& c, std::string_view v) { c.agent.attention_init = parse_attention_init(trim(v)); },
            [](const RunConfig& c) -> std::optional<std::string> {
              return std::string(attention_init_name(c.agent.attention_init));
            }},
      NUM_FIELD("attention_init_scale", "random logits are drawn from mean + [-scale, scale]", agent.attention_init_scale),
      NUM_FIELD("attention_init_mean", "centre of the random attention logits", agent.attention_init_mean),
      Field{{"hardcoded_rooms", "auto, or rooms per option: 0;1;2;3 (groups split by ';', rooms by ',')"},
            [](RunConfig& c, std::string_view v) { c.agent.hardcoded_rooms = to_rooms(v); },
            [](const RunConfig& c) -> std::optional<std::string> { return rooms_text(c.agent.hardcoded_rooms); }},
      STR_FIELD("layout", "built-in layout name (four_rooms) or a grid file path", layout),
      NUM_FIELD("slip_prob", "probability of replacing the action with a uniform one", env.slip_prob),
      NUM_FIELD("goal_reward", "reward on reaching the goal", env.goal_reward),
      NUM_FIELD("step_reward", "reward on every other step", env.step_reward),
      INT_FIELD("step_cap", "steps before an episode is truncated", env.step_cap),
      STR_FIELD("goal", "random, a hallway name (north, south, west, east) or row,col", goal),
      STR_FIELD("blocked_hallway", "none or a hallway name/id", blocked_hallway),
      Field{{"seeds", "comma list and ranges, e.g. 1-5,9"},
            [](RunConfig& c, std::string_view v) { c.seeds = to_seeds(v); },
            [](const RunConfig& c) -> std::optional<std::string> {
              return join(c.seeds, [](std::uint64_t s) { return std::to_string(s); });
            }},
      INT_FIELD("episodes", "training episodes per seed (all workers together)", episodes),
      INT_FIELD("checkpoint_every", "frames between checkpoints and snapshots", checkpoint_every),
      STR_FIELD("output_dir", "run directory", output_dir),
      INT_FIELD("eval_episodes", "evaluation episodes per snapshot", eval.episodes),
      NUM_FIELD("eval_epsilon", "option exploration during evaluation", eval.epsilon),
      NUM_FIELD("overlap_min_gap", "overlap measure: max minus second max must exceed this", overlap.min_gap),
      NUM_FIELD("overlap_max_second", "overlap measure: second max must stay below this", overlap.max_second),
      NUM_FIELD("consistency_threshold", "attention below this counts as unattended", consistency_threshold),
      INT_FIELD("curve_window", "trailing window of the learning-curve mean", curve_window),
      NUM_FIELD("recovery_length", "trailing mean length that counts as recovered", recovery_length),
      Field{{"transfer_kind", "goal_transfer or blocked_hallway"},
            [](RunConfig& c, std::string_view v) { transfer(c).kind = parse_transfer_kind(trim(v)); },
            [](const RunConfig& c) -> std::optional<std::string> {
              if (!c.transfer) return std::nullopt;
              return std::string(transfer_kind_name(c.transfer->kind));
            }},
      Field{{"transfer_variant", "oc, aoc_i or aoc_ii"},
            [](RunConfig& c, std::string_view v) { transfer(c).variant = parse_transfer_variant(trim(v)); },
            [](const RunConfig& c) -> std::optional<std::string> {
              if (!c.transfer) return std::nullopt;
              return std::string(transfer_variant_name(c.transfer->variant));
            }},
      Field{{"transfer_pre_episodes", "training episodes before the task change (inline pre-training)"},
            [](RunConfig& c, std::string_view v) { transfer(c).pre_episodes = to_count(v); },
            [](const RunConfig& c) -> std::optional<std::string> {
              if (!c.transfer) return std::nullopt;
              return std::to_string(c.transfer->pre_episodes);
            }},
      Field{{"transfer_post_episodes", "training episodes after the task change"},
            [](RunConfig& c, std::string_view v) { transfer(c).post_episodes = to_count(v); },
            [](const RunConfig& c) -> std::optional<std::string> {
              if (!c.transfer) return std::nullopt;
              return std::to_string(c.transfer->post_episodes);
            }},
      Field{{"transfer_goal", "new goal for goal_transfer: random, a hallway name or row,col"},
            [](RunConfig& c, std::string_view v) { transfer(c).goal = std::string(trim(v)); },
            [](const RunConfig& c) -> std::optional<std::string> {
              if (!c.transfer) return std::nullopt;
              return c.transfer->goal;
            }},
      Field{{"transfer_hallway", "hallway for blocked_hallway: random or a hallway name/id"},
            [](RunConfig& c, std::string_view v) { transfer(c).hallway = std::string(trim(v)); },
            [](const RunConfig& c) -> std::optional<std::string> {
              if (!c.transfer) return std::nullopt;
              return c.transfer->hallway;
            }},
      Field{{"sweep_w1", "sweep grid values of w1"},
            [](RunConfig& c, std::string_view v) {
              c.sweep.w1.clear();
              for (auto p : split(v, ','))
                if (!p.empty()) c.sweep.w1.push_back(to_double(p));
            },
            [](const RunConfig& c) -> std::optional<std::string> {
              if (c.sweep.w1.empty()) return std::nullopt;
              return join(c.sweep.w1, format_double);
            }},
      Field{{"sweep_w2", "sweep grid values of w2"},
            [](RunConfig& c, std::string_view v) {
              c.sweep.w2.clear();
              for (auto p : split(v, ','))
                if (!p.empty()) c.sweep.w2.push_back(to_double(p));
            },
            [](const RunConfig& c) -> std::optional<std::string> {
              if (c.sweep.w2.empty()) return std::nullopt;
              return join(c.sweep.w2, format_double);
            }},
      Field{{"sweep_num_options", "sweep grid values of num_options"},
            [](RunConfig& c, std::string_view v) {
              c.sweep.num_options.clear();
              for (auto p : split(v, ','))
                if (!p.empty()) c.sweep.num_options.push_back(static_cast<int>(to_int(p)));
            },
            [](const RunConfig& c) -> std::optional<std::string> {
              if (c.sweep.num_options.empty()) return std::nullopt;
              return join(c.sweep.num_options, [](int n) { return std::to_string(n); });
            }},
  };
  return f;
}

#undef NUM_FIELD
#undef INT_FIELD
#undef STR_FIELD

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) return "nan";
  return std::string(buf, p);
}

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> k;
    for (const auto& f : fields()) k.push_back(f.key);
    return k;
  }();
  return keys;
}

void RunConfig::validate() const {
  agent.validate();
  if (seeds.empty()) throw ConfigError("config: seeds must not be empty");
  if (checkpoint_every == 0) throw ConfigError("config: checkpoint_every must be > 0");
  if (episodes == 0) throw ConfigError("config: episodes must be > 0");
  if (output_dir.empty()) throw ConfigError("config: output_dir must not be empty");
  if (eval.episodes < 1) throw ConfigError("config: eval_episodes must be >= 1");
  if (!(eval.epsilon >= 0.0 && eval.epsilon <= 1.0)) throw ConfigError("config: eval_epsilon must lie in [0, 1]");
  if (curve_window < 1) throw ConfigError("config: curve_window must be >= 1");
  if (!(env.slip_prob >= 0.0 && env.slip_prob <= 1.0)) throw ConfigError("config: slip_prob must lie in [0, 1]");
  if (env.step_cap < 1) throw ConfigError("config: step_cap must be >= 1");
  for (std::size_t i = 0; i < seeds.size(); ++i)
    for (std::size_t j = i + 1; j < seeds.size(); ++j)
      if (seeds[i] == seeds[j]) throw ConfigError("config: seed " + std::to_string(seeds[i]) + " is repeated");
  for (int n : sweep.num_options)
    if (n < 1) throw ConfigError("config: sweep_num_options values must be >= 1");
  for (double w : sweep.w1)
    if (w < 0.0) throw ConfigError("config: sweep_w1 values must be >= 0");
  for (double w : sweep.w2)
    if (w < 0.0) throw ConfigError("config: sweep_w2 values must be >= 0");
  if (transfer && transfer->post_episodes == 0) throw ConfigError("config: transfer_post_episodes must be > 0");
}

RunConfig parse_config(std::string_view text) {
  std::map<std::string_view, const Field*> by_key;
  for (const auto& f : fields()) by_key[f.key.key] = &f;

  RunConfig c;
  std::map<std::string, int> seen;
  int line_no = 0;
  for (auto line : split(text, '\n')) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string_view::npos) line = trim(line.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const auto where = "config line " + std::to_string(line_no) + ": ";
    if (eq == std::string_view::npos) throw ConfigError(where + "expected key = value");
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    const auto it = by_key.find(key);
    if (it == by_key.end()) throw ConfigError(where + "unknown key '" + std::string(key) + "'");
    if (const auto [pos, fresh] = seen.emplace(std::string(key), line_no); !fresh) {
      throw ConfigError(where + "key '" + std::string(key) + "' already set on line " + std::to_string(pos->second));
    }
    try {
      it->second->set(c, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + std::string(key) + ": " + e.what());
    }
  }
  c.validate();
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void set_key(RunConfig& c, std::string_view key, std::string_view value) {
  key = trim(key);
  for (const auto& f : fields()) {
    if (f.key.key != key) continue;
    try {
      f.set(c, value);
    } catch (const ConfigError& e) {
      throw ConfigError(std::string(key) + ": " + e.what());
    }
    return;
  }
  throw ConfigError("unknown key '" + std::string(key) + "'");
}

std::string to_text(const RunConfig& c) {
  std::string out;
  for (const auto& f : fields()) {
    const auto v = f.get(c);
    if (!v) continue;
    out += f.key.key;
    out += " = ";
    out += *v;
    out += '\n';
  }
  return out;
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string config_hash(const RunConfig& c) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a(to_text(c))));
  return buf;
}

GridLayout resolve_layout(const RunConfig& c) {
  if (c.layout == "four_rooms" || c.layout == "fourrooms") return GridLayout::named(c.layout);
  return GridLayout::load(c.layout);
}

std::optional<Cell> resolve_cell(const GridLayout& layout, std::string_view text) {
  text = trim(text);
  if (text == "random") return std::nullopt;
  const auto comma = text.find(',');
  Cell cell;
  if (comma != std::string_view::npos) {
    cell = {static_cast<int>(to_int(text.substr(0, comma))), static_cast<int>(to_int(text.substr(comma + 1)))};
  } else {
    cell = layout.hallways().at(static_cast<std::size_t>(layout.hallway_by_name(text)));
  }
  if (layout.state_index(cell) < 0) {
    throw ConfigError("cell " + std::to_string(cell.row) + "," + std::to_string(cell.col) + " is not walkable");
  }
  return cell;
}

std::optional<int> resolve_hallway(const GridLayout& layout, std::string_view text) {
  text = trim(text);
  if (text == "none" || text == "random") return std::nullopt;
  return layout.hallway_by_name(text);
}

}  // namespace aoc
