#include "poer/exp/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "poer/common/error.hpp"
#include "poer/exp/metrics.hpp"

namespace poer::exp {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(std::string_view key, std::string_view v) {
  double out = 0.0;
  auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size()) {
    throw ConfigError(std::string(key) + ": expected a number, got '" + std::string(v) + "'");
  }
  return out;
}

template <class Int>
Int to_int(std::string_view key, std::string_view v) {
  Int out = 0;
  auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size()) {
    throw ConfigError(std::string(key) + ": expected an integer, got '" + std::string(v) + "'");
  }
  return out;
}

bool to_bool(std::string_view key, std::string_view v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw ConfigError(std::string(key) + ": expected true or false, got '" + std::string(v) + "'");
}

struct Field {
  const char* key;  // "section.name"
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, std::string_view)> set;
};


#define POER_DOUBLE(KEY, EXPR)                                                          \
  Field {                                                                               \
    KEY, [](const RunConfig& c) { return format_double(c.EXPR); },                      \
        [](RunConfig& c, std::string_view v) { c.EXPR = to_double(KEY, v); }           \
  }
#define POER_INT(KEY, EXPR)                                                              \
  Field {                                                                                \
    KEY, [](const RunConfig& c) { return std::to_string(c.EXPR); },                      \
        [](RunConfig& c, std::string_view v) { c.EXPR = to_int<decltype(c.EXPR)>(KEY, v); } \
  }
#define POER_BOOL(KEY, EXPR)                                                     \
  Field {                                                                        \
    KEY, [](const RunConfig& c) { return std::string(c.EXPR ? "true" : "false"); }, \
        [](RunConfig& c, std::string_view v) { c.EXPR = to_bool(KEY, v); }      \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      {"run.name", [](const RunConfig& c) { return c.name; },
       [](RunConfig& c, std::string_view v) { c.name = std::string(v); }},
      {"run.out_dir", [](const RunConfig& c) { return c.out_dir.string(); },
       [](RunConfig& c, std::string_view v) { c.out_dir = std::string(v); }},
      POER_INT("run.seed", trainer.seed),
      POER_INT("run.steps", trainer.total_steps),
      POER_INT("run.workers", trainer.worker_count),
      POER_BOOL("run.synchronous", trainer.synchronous),
      POER_INT("run.checkpoint_every", trainer.checkpoint_every),
      {"run.time_axis", [](const RunConfig& c) { return std::string(to_string(c.trainer.time_axis)); },
       [](RunConfig& c, std::string_view v) { c.trainer.time_axis = parse_time_axis(v); }},

      POER_INT("trainer.batch_size", trainer.batch_size),
      POER_INT("trainer.super_batch", trainer.super_batch_size),
      POER_INT("trainer.epochs", trainer.epochs),

      POER_INT("agent.hidden_units", trainer.hidden_units),
      POER_INT("agent.hidden_layers", trainer.hidden_layers),
      POER_DOUBLE("agent.clip_epsilon", trainer.loss.clip_epsilon),
      POER_DOUBLE("agent.entropy_beta", trainer.loss.entropy_beta),
      POER_DOUBLE("agent.critic_coef", trainer.loss.critic_coef),
      POER_DOUBLE("agent.gamma_ext", trainer.loss.gamma_ext),
      POER_DOUBLE("agent.gamma_int", trainer.loss.gamma_int),
      POER_DOUBLE("agent.adv_weight_ext", trainer.loss.adv_weight_ext),
      POER_DOUBLE("agent.adv_weight_int", trainer.loss.adv_weight_int),
      POER_BOOL("agent.episodic_ext", trainer.loss.episodic_ext),
      POER_BOOL("agent.episodic_int", trainer.loss.episodic_int),

      POER_DOUBLE("optim.learning_rate", trainer.adam.learning_rate),
      POER_DOUBLE("optim.beta1", trainer.adam.beta1),
      POER_DOUBLE("optim.beta2", trainer.adam.beta2),
      POER_DOUBLE("optim.epsilon", trainer.adam.epsilon),

      POER_INT("rnd.hidden_units", trainer.rnd_hidden_units),
      POER_INT("rnd.hidden_layers", trainer.rnd_hidden_layers),
      POER_INT("rnd.feature_length", trainer.rnd_feature_length),
      POER_DOUBLE("rnd.dropout", trainer.rnd_dropout),
      POER_DOUBLE("rnd.obs_clip", trainer.rnd_obs_clip),

      POER_INT("replay.capacity", trainer.replay.capacity),
      POER_DOUBLE("replay.drop_probability", trainer.replay.drop_probability),
      POER_DOUBLE("replay.replay_ratio", trainer.replay.replay_ratio),
      {"replay.priority",
       [](const RunConfig& c) { return std::string(replay::to_string(c.trainer.replay.priority_mode)); },
       [](RunConfig& c, std::string_view v) { c.trainer.replay.priority_mode = replay::parse_priority_mode(v); }},
      POER_DOUBLE("replay.novelty_decay", trainer.replay.novelty_decay),

      {"env.name", [](const RunConfig& c) { return c.trainer.env.name; },
       [](RunConfig& c, std::string_view v) { c.trainer.env.name = std::string(v); }},
      POER_INT("env.chain_length", trainer.env.chain_length),
      POER_INT("env.chain_actions", trainer.env.chain_actions),
      POER_INT("env.grid_width", trainer.env.grid.width),
      POER_INT("env.grid_height", trainer.env.grid.height),
      POER_INT("env.start_x", trainer.env.grid.start.x),
      POER_INT("env.start_y", trainer.env.grid.start.y),
      POER_INT("env.key_x", trainer.env.grid.key.x),
      POER_INT("env.key_y", trainer.env.grid.key.y),
      POER_INT("env.door_x", trainer.env.grid.door.x),
      POER_INT("env.door_y", trainer.env.grid.door.y),
      POER_BOOL("env.key_bonus", trainer.env.grid.key_bonus),
      POER_INT("env.stack_frames", trainer.env.wrapper.stack_frames),
      POER_INT("env.max_episode_steps", trainer.env.wrapper.max_episode_steps),
      POER_DOUBLE("env.reward_clip_lo", trainer.env.wrapper.reward_clip_lo),
      POER_DOUBLE("env.reward_clip_hi", trainer.env.wrapper.reward_clip_hi),
  };
  return table;
}

#undef POER_DOUBLE
#undef POER_INT
#undef POER_BOOL

const Field& find(std::string_view key) {
  for (const auto& f : fields()) {
    if (key == f.key) return f;
  }
  throw ConfigError("unknown configuration key '" + std::string(key) + "'");
}

}  // namespace

bool RunConfig::operator==(const RunConfig& other) const {
  for (const auto& f : fields()) {
    if (f.get(*this) != f.get(other)) return false;
  }
  return trainer.checkpoint_dir == other.trainer.checkpoint_dir;
}

void set_value(RunConfig& config, std::string_view dotted_key, std::string_view value) {
  find(dotted_key).set(config, trim(value));
}

std::string get_value(const RunConfig& config, std::string_view dotted_key) {
  return find(dotted_key).get(config);
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& f : fields()) out.emplace_back(f.key);
  return out;
}

RunConfig parse_config(std::istream& in, const RunConfig& base) {
  RunConfig config = base;
  std::string raw;
  std::string section;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    auto where = [&] { return "line " + std::to_string(line_no) + ": "; };
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where() + "unterminated section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where() + "expected 'key = value'");
    if (section.empty()) throw ConfigError(where() + "key outside of any section");
    const std::string key = section + "." + std::string(trim(line.substr(0, eq)));
    try {
      set_value(config, key, line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(where() + e.what());
    }
  }
  return config;
}

RunConfig load_config(const std::filesystem::path& path, const RunConfig& base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  try {
    return parse_config(in, base);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void write_config(std::ostream& out, const RunConfig& config) {
  std::string section;
  for (const auto& f : fields()) {
    const std::string_view key = f.key;
    const auto dot = key.find('.');
    const auto sec = key.substr(0, dot);
    if (sec != section) {
      if (!section.empty()) out << '\n';
      section = std::string(sec);
      out << '[' << section << "]\n";
    }
    out << key.substr(dot + 1) << " = " << f.get(config) << '\n';
  }
}

void save_config(const std::filesystem::path& path, const RunConfig& config) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  write_config(out, config);
}

std::string to_text(const RunConfig& config) {
  std::ostringstream os;
  write_config(os, config);
  return os.str();
}

}  // namespace poer::exp
