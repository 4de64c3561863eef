#include "vlbirl/env.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace vlbirl {

namespace {

constexpr int kGridActions = 4;  // up, down, left, right
constexpr int kRowDelta[kGridActions] = {-1, 1, 0, 0};
constexpr int kColDelta[kGridActions] = {0, 0, -1, 1};

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

bool contains(const std::vector<int>& xs, int x) {
  return std::find(xs.begin(), xs.end(), x) != xs.end();
}

}  // namespace

StrippedTransition strip(const Transition& t) {
  return StrippedTransition{t.state, t.action, t.next_state, t.done};
}

std::vector<StrippedTransition> strip(const std::vector<Transition>& ts) {
  std::vector<StrippedTransition> out;
  out.reserve(ts.size());
  for (const auto& t : ts) out.push_back(strip(t));
  return out;
}

std::vector<StrippedTransition> strip(const std::vector<Trajectory>& trajectories) {
  std::vector<StrippedTransition> out;
  for (const auto& traj : trajectories)
    for (const auto& t : traj.transitions) out.push_back(strip(t));
  return out;
}

StrippedTrajectory strip_trajectory(const Trajectory& trajectory) {
  return strip(trajectory.transitions);
}

MdpSpec MdpSpec::gridworld(GridworldCfg cfg, double discount, int horizon) {
  if (cfg.width < 1 || cfg.height < 1) throw std::invalid_argument("gridworld: empty grid");
  if (discount <= 0.0 || discount >= 1.0)
    throw std::invalid_argument("gridworld: discount must be in (0,1)");
  if (horizon < 1) throw std::invalid_argument("gridworld: horizon must be >= 1");
  const int n = cfg.width * cfg.height;
  for (int c : cfg.goal_cells)
    if (c < 0 || c >= n) throw std::invalid_argument("gridworld: goal cell out of range");
  for (int c : cfg.trap_cells)
    if (c < 0 || c >= n) throw std::invalid_argument("gridworld: trap cell out of range");
  MdpSpec spec;
  spec.kind_ = EnvKind::Gridworld;
  spec.name_ = "gridworld";
  spec.discount_ = discount;
  spec.horizon_ = horizon;
  spec.grid_ = std::move(cfg);
  return spec;
}

MdpSpec MdpSpec::point_mass(PointMassCfg cfg, double discount, int horizon) {
  if (cfg.arena_half_width <= 0.0) throw std::invalid_argument("point_mass: arena must be positive");
  if (discount <= 0.0 || discount >= 1.0)
    throw std::invalid_argument("point_mass: discount must be in (0,1)");
  if (horizon < 1) throw std::invalid_argument("point_mass: horizon must be >= 1");
  MdpSpec spec;
  spec.kind_ = EnvKind::PointMass;
  spec.name_ = "pointmass";
  spec.discount_ = discount;
  spec.horizon_ = horizon;
  spec.point_ = std::move(cfg);
  return spec;
}

MdpSpec MdpSpec::gridworld_default() {
  GridworldCfg cfg;
  cfg.width = 5;
  cfg.height = 5;
  cfg.goal_cells = {24};
  cfg.step_penalty = 0.01;
  return gridworld(std::move(cfg), 0.99, 50);
}

MdpSpec MdpSpec::point_mass_default() { return point_mass(PointMassCfg{}, 0.99, 100); }

MdpSpec MdpSpec::by_name(const std::string& name) {
  if (name == "gridworld") return gridworld_default();
  if (name == "cliffworld") {
    // Default grid plus a row of penalty cells beside the goal; random
    // actions near the cliff are costly, which is what the noisy-expert
    // experiments need.
    GridworldCfg cfg;
    cfg.width = 5;
    cfg.height = 5;
    cfg.goal_cells = {24};
    cfg.trap_cells = {21, 22, 23};
    cfg.step_penalty = 0.01;
    MdpSpec spec = gridworld(std::move(cfg), 0.99, 50);
    spec.name_ = "cliffworld";
    return spec;
  }
  if (name == "pointmass") return point_mass_default();
  throw std::invalid_argument("unknown environment: " + name);
}

int MdpSpec::n_states() const {
  if (!tabular()) throw std::logic_error("n_states: not a tabular spec");
  return grid_.width * grid_.height;
}

int MdpSpec::n_actions() const {
  if (!tabular()) throw std::logic_error("n_actions: not a tabular spec");
  return kGridActions;
}

bool MdpSpec::is_terminal(const State& s) const {
  // Goal cells absorb; trap cells are penalty cells, not terminal.
  if (kind_ == EnvKind::Gridworld) return contains(grid_.goal_cells, s.index);
  return false;  // point mass is a continuing task
}

State MdpSpec::initial_state(Rng& rng) const {
  if (kind_ == EnvKind::Gridworld) {
    std::vector<int> starts;
    for (int i = 0; i < n_states(); ++i)
      if (!contains(grid_.goal_cells, i)) starts.push_back(i);
    if (starts.empty()) throw std::logic_error("gridworld: no non-goal start cells");
    return state_by_index(starts[rng.uniform_index(starts.size())]);
  }
  State s;
  s.vec = {rng.uniform(-point_.arena_half_width, point_.arena_half_width),
           rng.uniform(-point_.arena_half_width, point_.arena_half_width), 0.0, 0.0};
  return s;
}

State MdpSpec::state_by_index(int index) const {
  if (!tabular()) throw std::logic_error("state_by_index: not a tabular spec");
  if (index < 0 || index >= n_states()) throw std::invalid_argument("state index out of range");
  State s;
  s.index = index;
  return s;
}

Action MdpSpec::action_by_index(int index) const {
  if (kind_ == EnvKind::Gridworld) {
    if (index < 0 || index >= kGridActions) throw std::invalid_argument("action index out of range");
    Action a;
    a.index = index;
    return a;
  }
  throw std::logic_error("action_by_index: not a discrete spec");
}

Action MdpSpec::uniform_random_action(Rng& rng) const {
  if (kind_ == EnvKind::Gridworld) return action_by_index(rng.uniform_int(kGridActions));
  Action a;
  a.vec = {rng.uniform(-point_.max_force, point_.max_force),
           rng.uniform(-point_.max_force, point_.max_force)};
  return a;
}

void MdpSpec::validate_state(const State& s) const {
  if (kind_ == EnvKind::Gridworld) {
    if (s.index < 0 || s.index >= n_states())
      throw std::invalid_argument("invalid gridworld state index " + std::to_string(s.index));
    return;
  }
  if (s.vec.size() != 4) throw std::invalid_argument("point mass state must be (pos2, vel2)");
}

void MdpSpec::validate_action(const Action& a) const {
  if (kind_ == EnvKind::Gridworld) {
    if (a.index < 0 || a.index >= kGridActions)
      throw std::invalid_argument("invalid gridworld action index " + std::to_string(a.index));
    return;
  }
  if (a.vec.size() != 2) throw std::invalid_argument("point mass action must be a 2-d force");
}

double MdpSpec::true_reward(const State& s, const Action& a, const State& next) const {
  if (kind_ == EnvKind::Gridworld) {
    (void)a;
    if (is_terminal(s)) return 0.0;  // absorbing
    double r = -grid_.step_penalty;
    if (contains(grid_.goal_cells, next.index)) r += 1.0;
    if (contains(grid_.trap_cells, next.index)) r -= 1.0;
    return r;
  }
  (void)a;
  const double dx = next.vec[0] - point_.goal_center[0];
  const double dy = next.vec[1] - point_.goal_center[1];
  const double dist = std::sqrt(dx * dx + dy * dy);
  if (dist <= point_.goal_radius) return point_.goal_bonus;
  return -point_.dist_cost * dist;
}

StepResult MdpSpec::lookup_transition(int state_index, int action_index) const {
  if (!tabular()) throw std::logic_error("lookup_transition: not a tabular spec");
  const State s = state_by_index(state_index);
  const Action a = action_by_index(action_index);
  if (is_terminal(s)) return StepResult{s, 0.0, true};
  const int row = state_index / grid_.width;
  const int col = state_index % grid_.width;
  const int nrow = row + kRowDelta[action_index];
  const int ncol = col + kColDelta[action_index];
  State next = s;
  if (nrow >= 0 && nrow < grid_.height && ncol >= 0 && ncol < grid_.width)
    next = state_by_index(nrow * grid_.width + ncol);
  const bool done = is_terminal(next);
  return StepResult{next, true_reward(s, a, next), done};
}

StepResult MdpSpec::step(const State& s, const Action& a, Rng& rng) const {
  validate_state(s);
  validate_action(a);
  if (kind_ == EnvKind::Gridworld) return lookup_transition(s.index, a.index);

  const auto& pm = point_;
  const double fx = std::clamp(a.vec[0], -pm.max_force, pm.max_force);
  const double fy = std::clamp(a.vec[1], -pm.max_force, pm.max_force);
  double vx = (1.0 - pm.drag) * s.vec[2] + fx * pm.dt;
  double vy = (1.0 - pm.drag) * s.vec[3] + fy * pm.dt;
  vx = std::clamp(vx, -pm.max_speed, pm.max_speed);
  vy = std::clamp(vy, -pm.max_speed, pm.max_speed);
  double px = s.vec[0] + vx * pm.dt + pm.noise_scale * rng.normal();
  double py = s.vec[1] + vy * pm.dt + pm.noise_scale * rng.normal();
  if (px < -pm.arena_half_width || px > pm.arena_half_width) {
    px = std::clamp(px, -pm.arena_half_width, pm.arena_half_width);
    vx = 0.0;
  }
  if (py < -pm.arena_half_width || py > pm.arena_half_width) {
    py = std::clamp(py, -pm.arena_half_width, pm.arena_half_width);
    vy = 0.0;
  }
  State next;
  next.vec = {px, py, vx, vy};
  return StepResult{next, true_reward(s, a, next), false};
}

int MdpSpec::state_feature_dim() const {
  return kind_ == EnvKind::Gridworld ? n_states() : 4;
}

int MdpSpec::action_feature_dim() const {
  return kind_ == EnvKind::Gridworld ? kGridActions : 2;
}

std::vector<double> MdpSpec::state_features(const State& s) const {
  validate_state(s);
  if (kind_ == EnvKind::Gridworld) {
    std::vector<double> f(n_states(), 0.0);
    f[s.index] = 1.0;
    return f;
  }
  return s.vec;
}

std::vector<double> MdpSpec::sa_features(const State& s, const Action& a) const {
  validate_state(s);
  validate_action(a);
  std::vector<double> f = state_features(s);
  if (kind_ == EnvKind::Gridworld) {
    std::vector<double> onehot(kGridActions, 0.0);
    onehot[a.index] = 1.0;
    f.insert(f.end(), onehot.begin(), onehot.end());
  } else {
    f.insert(f.end(), a.vec.begin(), a.vec.end());
  }
  return f;
}

Action UniformPolicy::act(const MdpSpec& spec, const State&, Rng& rng) const {
  return spec.uniform_random_action(rng);
}

CorruptedPolicy::CorruptedPolicy(const Policy& inner, double epsilon)
    : inner_(&inner), epsilon_(epsilon) {
  if (epsilon < 0.0 || epsilon > 1.0)
    throw std::invalid_argument("corrupt_policy: epsilon must be in [0,1]");
}

Action CorruptedPolicy::act(const MdpSpec& spec, const State& s, Rng& rng) const {
  // epsilon == 0 must not consume randomness: stream-identical to inner.
  if (epsilon_ > 0.0 && rng.uniform() < epsilon_) return spec.uniform_random_action(rng);
  return inner_->act(spec, s, rng);
}

CorruptedPolicy corrupt_policy(const Policy& policy, double epsilon) {
  return CorruptedPolicy(policy, epsilon);
}

std::vector<Trajectory> rollout(const MdpSpec& spec, const Policy& policy, int n_episodes,
                                std::uint64_t base_seed) {
  if (n_episodes < 1) throw std::invalid_argument("rollout: n_episodes must be >= 1");
  std::vector<Trajectory> out;
  out.reserve(n_episodes);
  for (int ep = 0; ep < n_episodes; ++ep) {
    const std::uint64_t ep_seed = mix_seed(base_seed, static_cast<std::uint64_t>(ep));
    Rng rng(ep_seed);
    Trajectory traj;
    traj.seed = ep_seed;
    State s = spec.initial_state(rng);
    for (int t = 0; t < spec.horizon(); ++t) {
      const Action a = policy.act(spec, s, rng);
      StepResult r = spec.step(s, a, rng);
      traj.transitions.push_back(Transition{s, a, r.next_state, r.done, r.true_reward});
      s = r.next_state;
      if (r.done) break;
    }
    out.push_back(std::move(traj));
  }
  return out;
}

namespace {

std::string encode_state(const MdpSpec& spec, const State& s) {
  if (spec.tabular()) return std::to_string(s.index);
  std::string out;
  for (std::size_t i = 0; i < s.vec.size(); ++i) {
    if (i) out += ';';
    out += fmt_double(s.vec[i]);
  }
  return out;
}

std::string encode_action(const MdpSpec& spec, const Action& a) {
  if (spec.tabular()) return std::to_string(a.index);
  std::string out;
  for (std::size_t i = 0; i < a.vec.size(); ++i) {
    if (i) out += ';';
    out += fmt_double(a.vec[i]);
  }
  return out;
}

State decode_state(const MdpSpec& spec, const std::string& field) {
  if (spec.tabular()) return spec.state_by_index(std::stoi(field));
  State s;
  std::stringstream ss(field);
  std::string part;
  while (std::getline(ss, part, ';')) s.vec.push_back(std::stod(part));
  return s;
}

Action decode_action(const MdpSpec& spec, const std::string& field) {
  if (spec.tabular()) return spec.action_by_index(std::stoi(field));
  Action a;
  std::stringstream ss(field);
  std::string part;
  while (std::getline(ss, part, ';')) a.vec.push_back(std::stod(part));
  return a;
}

}  // namespace

void write_trajectories(const std::string& path, const MdpSpec& spec,
                        const std::vector<Trajectory>& trajectories,
                        const TrajectoryFileMeta& meta) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open trajectory file for writing: " + path);
  nlohmann::json j{{"env", meta.env},
                   {"seed", meta.seed},
                   {"n_trajectories", meta.n_trajectories},
                   {"noise_eps", meta.noise_eps},
                   {"includes_reward", meta.includes_reward},
                   {"policy", meta.policy_tag}};
  out << "# " << j.dump() << "\n";
  for (std::size_t ep = 0; ep < trajectories.size(); ++ep) {
    int t = 0;
    for (const auto& tr : trajectories[ep].transitions) {
      out << ep << ',' << t << ',' << encode_state(spec, tr.state) << ','
          << encode_action(spec, tr.action) << ',' << encode_state(spec, tr.next_state) << ','
          << (tr.done ? 1 : 0);
      if (meta.includes_reward) out << ',' << fmt_double(tr.true_reward);
      out << '\n';
      ++t;
    }
  }
  if (!out) throw std::runtime_error("failed writing trajectory file: " + path);
}

TrajectoryFile read_trajectories(const std::string& path, const MdpSpec& spec) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trajectory file: " + path);
  std::string line;
  if (!std::getline(in, line) || line.size() < 2 || line[0] != '#')
    throw std::runtime_error("trajectory file missing metadata record: " + path);
  const nlohmann::json j = nlohmann::json::parse(line.substr(1));
  TrajectoryFile file;
  file.meta.env = j.at("env").get<std::string>();
  file.meta.seed = j.at("seed").get<std::uint64_t>();
  file.meta.n_trajectories = j.at("n_trajectories").get<int>();
  file.meta.noise_eps = j.at("noise_eps").get<double>();
  file.meta.includes_reward = j.at("includes_reward").get<bool>();
  file.meta.policy_tag = j.value("policy", "");
  if (file.meta.env != spec.name())
    throw std::runtime_error("trajectory file env '" + file.meta.env + "' does not match spec '" +
                             spec.name() + "'");

  long last_ep = -1;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    const std::size_t expected = file.meta.includes_reward ? 7u : 6u;
    if (fields.size() != expected)
      throw std::runtime_error("malformed trajectory line: " + line);
    const long ep = std::stol(fields[0]);
    if (ep != last_ep) {
      file.trajectories.emplace_back();
      last_ep = ep;
    }
    Transition tr;
    tr.state = decode_state(spec, fields[2]);
    tr.action = decode_action(spec, fields[3]);
    tr.next_state = decode_state(spec, fields[4]);
    tr.done = fields[5] == "1";
    if (file.meta.includes_reward) tr.true_reward = std::stod(fields[6]);
    file.trajectories.back().transitions.push_back(std::move(tr));
  }
  return file;
}

}  // namespace vlbirl
