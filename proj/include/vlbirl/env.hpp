#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "vlbirl/rng.hpp"

namespace vlbirl {

/// Discrete specs address states/actions by index; continuous specs carry the
/// raw vector. Exactly one representation is active per spec kind.
struct State {
  int index = -1;
  std::vector<double> vec;
};

struct Action {
  int index = -1;
  std::vector<double> vec;
};

/// Full transition record. true_reward exists for evaluation and oracles
/// only; everything the learner touches goes through StrippedTransition.
struct Transition {
  State state;
  Action action;
  State next_state;
  bool done = false;
  double true_reward = 0.0;
};

/// Learner-facing view of a transition. Deliberately has no reward channel.
struct StrippedTransition {
  State state;
  Action action;
  State next_state;
  bool done = false;
};

StrippedTransition strip(const Transition& t);
std::vector<StrippedTransition> strip(const std::vector<Transition>& ts);

struct Trajectory {
  std::vector<Transition> transitions;
  std::uint64_t seed = 0;
};

std::vector<StrippedTransition> strip(const std::vector<Trajectory>& trajectories);

using StrippedTrajectory = std::vector<StrippedTransition>;
StrippedTrajectory strip_trajectory(const Trajectory& trajectory);

enum class EnvKind { Gridworld, PointMass };

/// Deterministic grid with absorbing goal/trap cells. Actions are
/// up/down/left/right; moving into a wall keeps the agent in place.
struct GridworldCfg {
  int width = 5;
  int height = 5;
  std::vector<int> goal_cells;
  std::vector<int> trap_cells;
  double step_penalty = 0.01;
};

/// 2-D point mass pushed by a clipped force under Euler integration with
/// additive Gaussian position noise. Continuing task: episodes end at the
/// horizon, reward is a goal bonus inside goal_radius minus a distance cost.
struct PointMassCfg {
  double arena_half_width = 1.0;
  std::array<double, 2> goal_center{0.6, 0.6};
  double goal_radius = 0.1;
  double max_force = 1.0;
  double max_speed = 2.0;
  double noise_scale = 0.01;
  double dt = 0.1;
  double drag = 0.1;
  double dist_cost = 0.05;
  double goal_bonus = 1.0;
};

struct StepResult {
  State next_state;
  double true_reward = 0.0;
  bool done = false;
};

class MdpSpec {
 public:
  static MdpSpec gridworld(GridworldCfg cfg, double discount, int horizon);
  static MdpSpec point_mass(PointMassCfg cfg, double discount, int horizon);
  /// 5x5 grid, one +1 goal in the corner, step penalty 0.01, gamma 0.99,
  /// horizon 50.
  static MdpSpec gridworld_default();
  /// half-width 1.0 arena, goal radius 0.1, gamma 0.99, horizon 100.
  static MdpSpec point_mass_default();
  /// Registry lookup: "gridworld" | "pointmass".
  static MdpSpec by_name(const std::string& name);

  EnvKind kind() const { return kind_; }
  const std::string& name() const { return name_; }
  double discount() const { return discount_; }
  int horizon() const { return horizon_; }
  bool tabular() const { return kind_ == EnvKind::Gridworld; }
  const GridworldCfg& grid() const { return grid_; }
  const PointMassCfg& point() const { return point_; }

  int n_states() const;   // tabular only
  int n_actions() const;  // tabular only

  bool is_terminal(const State& s) const;
  State initial_state(Rng& rng) const;
  State state_by_index(int index) const;  // tabular only
  Action action_by_index(int index) const;
  Action uniform_random_action(Rng& rng) const;

  /// Advance one step. Gridworld is deterministic; PointMass consumes two
  /// normal draws for position noise. Terminal states self-loop with zero
  /// reward. Invalid state/action indices are rejected.
  StepResult step(const State& s, const Action& a, Rng& rng) const;

  /// Deterministic transition lookup for DP solvers (tabular only).
  StepResult lookup_transition(int state_index, int action_index) const;

  /// Hidden ground-truth reward. Evaluation and expert oracles only; the
  /// learner path never sees it (StrippedTransition carries no reward).
  double true_reward(const State& s, const Action& a, const State& next) const;

  // Feature encoding used by reward head / classifier / function critics.
  // Gridworld: one-hot state and one-hot action. PointMass: raw vectors.
  int state_feature_dim() const;
  int action_feature_dim() const;
  std::vector<double> state_features(const State& s) const;
  std::vector<double> sa_features(const State& s, const Action& a) const;

  void validate_state(const State& s) const;
  void validate_action(const Action& a) const;

 private:
  MdpSpec() = default;

  EnvKind kind_ = EnvKind::Gridworld;
  std::string name_;
  double discount_ = 0.99;
  int horizon_ = 50;
  GridworldCfg grid_;
  PointMassCfg point_;
};

/// Action-selection interface shared by tabular policies, network policies,
/// and the corruption/uniform wrappers. Implementations must be pure given
/// the rng stream so rollouts stay reproducible.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual Action act(const MdpSpec& spec, const State& s, Rng& rng) const = 0;
};

class UniformPolicy final : public Policy {
 public:
  Action act(const MdpSpec& spec, const State& s, Rng& rng) const override;
};

/// epsilon-random mixture around a wrapped policy: with probability epsilon
/// take a uniformly random action, otherwise defer. epsilon = 0 consumes no
/// extra randomness, so it is stream-identical to the wrapped policy.
class CorruptedPolicy final : public Policy {
 public:
  CorruptedPolicy(const Policy& inner, double epsilon);
  Action act(const MdpSpec& spec, const State& s, Rng& rng) const override;
  double epsilon() const { return epsilon_; }

 private:
  const Policy* inner_;
  double epsilon_;
};

CorruptedPolicy corrupt_policy(const Policy& policy, double epsilon);

/// Roll n_episodes episodes from the initial-state distribution. Episode i
/// owns the stream mix_seed(base_seed, i): identical seeds give identical
/// trajectories, and episodes may run in parallel without coupling.
std::vector<Trajectory> rollout(const MdpSpec& spec, const Policy& policy, int n_episodes,
                                std::uint64_t base_seed);

/// Line-delimited trajectory file: a '#'-prefixed JSON metadata record, then
/// one transition per line (episode_id,t,state,action,next_state,done[,reward]).
struct TrajectoryFileMeta {
  std::string env;
  std::uint64_t seed = 0;
  int n_trajectories = 0;
  double noise_eps = 0.0;
  bool includes_reward = false;
  std::string policy_tag;
};

void write_trajectories(const std::string& path, const MdpSpec& spec,
                        const std::vector<Trajectory>& trajectories,
                        const TrajectoryFileMeta& meta);

struct TrajectoryFile {
  TrajectoryFileMeta meta;
  std::vector<Trajectory> trajectories;
};

TrajectoryFile read_trajectories(const std::string& path, const MdpSpec& spec);

}  // namespace vlbirl
