#include "vlbirl/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace vlbirl {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

int parse_int(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const int v = std::stoi(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("");
    return v;
  } catch (...) {
    throw std::invalid_argument("config key '" + key + "': expected integer, got '" + value + "'");
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const unsigned long long v = std::stoull(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("");
    return v;
  } catch (...) {
    throw std::invalid_argument("config key '" + key + "': expected unsigned integer, got '" +
                                value + "'");
  }
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("");
    return v;
  } catch (...) {
    throw std::invalid_argument("config key '" + key + "': expected number, got '" + value + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw std::invalid_argument("config key '" + key + "': expected true/false, got '" + value +
                              "'");
}

std::vector<int> parse_int_list(const std::string& key, const std::string& value) {
  std::vector<int> out;
  std::stringstream ss(value);
  std::string part;
  while (std::getline(ss, part, ',')) out.push_back(parse_int(key, trim(part)));
  if (out.empty())
    throw std::invalid_argument("config key '" + key + "': expected a comma list of integers");
  return out;
}

std::string render_int_list(const std::vector<int>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(xs[i]);
  }
  return out;
}

}  // namespace

ParsedConfig parse_config_text(const std::string& text, const std::string& origin) {
  ParsedConfig out;
  std::stringstream ss(text);
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw std::invalid_argument(origin + ":" + std::to_string(lineno) +
                                    ": unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument(origin + ":" + std::to_string(lineno) +
                                  ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw std::invalid_argument(origin + ":" + std::to_string(lineno) + ": empty key");
    out.values[section.empty() ? key : section + "." + key] = value;
  }
  return out;
}

ParsedConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path);
}

void apply_to_train_config(const ParsedConfig& parsed, TrainConfig& cfg) {
  for (const auto& [key, value] : parsed.values) {
    if (key == "env.name") cfg.env_name = value;
    else if (key == "trainer.n_iterations") cfg.n_iterations = parse_int(key, value);
    else if (key == "trainer.rollout_episodes_per_iter")
      cfg.rollout_episodes_per_iter = parse_int(key, value);
    else if (key == "trainer.batch_size") cfg.batch_size = parse_int(key, value);
    else if (key == "trainer.classifier_steps_per_iter")
      cfg.classifier_steps_per_iter = parse_int(key, value);
    else if (key == "trainer.reward_steps_per_iter")
      cfg.reward_steps_per_iter = parse_int(key, value);
    else if (key == "trainer.policy_steps_per_iter")
      cfg.policy_steps_per_iter = parse_int(key, value);
    else if (key == "trainer.gamma") cfg.gamma = parse_double(key, value);
    else if (key == "trainer.lambda_var") cfg.lambda_var = parse_double(key, value);
    else if (key == "trainer.lr_classifier") cfg.lr_classifier = parse_double(key, value);
    else if (key == "trainer.lr_reward") cfg.lr_reward = parse_double(key, value);
    else if (key == "trainer.lr_actor") cfg.lr_actor = parse_double(key, value);
    else if (key == "trainer.lr_critic") cfg.lr_critic = parse_double(key, value);
    else if (key == "trainer.buffer_capacity") cfg.buffer_capacity = parse_u64(key, value);
    else if (key == "trainer.seed") cfg.seed = parse_u64(key, value);
    else if (key == "trainer.optimality_mode")
      cfg.optimality_mode = optimality_mode_by_name(value);
    else if (key == "trainer.deterministic_reward")
      cfg.deterministic_reward = parse_bool(key, value);
    else if (key == "trainer.eval_every") cfg.eval_every = parse_int(key, value);
    else if (key == "trainer.eval_episodes") cfg.eval_episodes = parse_int(key, value);
    else if (key == "trainer.entropy_coef") cfg.entropy_coef = parse_double(key, value);
    else if (key == "trainer.exp_reward_scale") cfg.exp_reward_scale = parse_double(key, value);
    else if (key == "trainer.reward_hidden") cfg.reward_hidden = parse_int_list(key, value);
    else if (key == "trainer.policy_hidden") cfg.policy_hidden = parse_int_list(key, value);
    else
      throw std::invalid_argument("unknown config key '" + key + "'");
  }
}

std::string canonical_config_string(const TrainConfig& cfg) {
  std::map<std::string, std::string> kv;
  kv["env.name"] = cfg.env_name;
  kv["trainer.n_iterations"] = std::to_string(cfg.n_iterations);
  kv["trainer.rollout_episodes_per_iter"] = std::to_string(cfg.rollout_episodes_per_iter);
  kv["trainer.batch_size"] = std::to_string(cfg.batch_size);
  kv["trainer.classifier_steps_per_iter"] = std::to_string(cfg.classifier_steps_per_iter);
  kv["trainer.reward_steps_per_iter"] = std::to_string(cfg.reward_steps_per_iter);
  kv["trainer.policy_steps_per_iter"] = std::to_string(cfg.policy_steps_per_iter);
  kv["trainer.gamma"] = fmt_double(cfg.gamma);
  kv["trainer.lambda_var"] = fmt_double(cfg.lambda_var);
  kv["trainer.lr_classifier"] = fmt_double(cfg.lr_classifier);
  kv["trainer.lr_reward"] = fmt_double(cfg.lr_reward);
  kv["trainer.lr_actor"] = fmt_double(cfg.lr_actor);
  kv["trainer.lr_critic"] = fmt_double(cfg.lr_critic);
  kv["trainer.buffer_capacity"] = std::to_string(cfg.buffer_capacity);
  kv["trainer.seed"] = std::to_string(cfg.seed);
  kv["trainer.optimality_mode"] = optimality_mode_name(cfg.optimality_mode);
  kv["trainer.deterministic_reward"] = cfg.deterministic_reward ? "true" : "false";
  kv["trainer.eval_every"] = std::to_string(cfg.eval_every);
  kv["trainer.eval_episodes"] = std::to_string(cfg.eval_episodes);
  kv["trainer.entropy_coef"] = fmt_double(cfg.entropy_coef);
  kv["trainer.exp_reward_scale"] = fmt_double(cfg.exp_reward_scale);
  kv["trainer.reward_hidden"] = render_int_list(cfg.reward_hidden);
  kv["trainer.policy_hidden"] = render_int_list(cfg.policy_hidden);
  std::string out;
  for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
  return out;
}

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string config_hash_hex(const TrainConfig& cfg) {
  // The seed is carried in the run-directory name, not the hash.
  std::string canon;
  std::stringstream ss(canonical_config_string(cfg));
  std::string line;
  while (std::getline(ss, line))
    if (line.rfind("trainer.seed", 0) != 0) canon += line + "\n";
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%08llx",
                static_cast<unsigned long long>(fnv1a(canon) & 0xffffffffULL));
  return buf;
}

}  // namespace vlbirl
