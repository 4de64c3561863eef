#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "vlbirl/env.hpp"
#include "vlbirl/net.hpp"
#include "vlbirl/optimality.hpp"
#include "vlbirl/rng.hpp"

namespace vlbirl {

/// State-value estimator: exact table for tabular specs, a small network for
/// continuous ones.
struct ValueFn {
  bool tabular = true;
  std::vector<double> table;
  Network net;

  static ValueFn zeros(const MdpSpec& spec, Rng& rng,
                       const std::vector<int>& hidden = {32, 32});
  double value(const MdpSpec& spec, const State& s) const;
  StateValueFn as_fn(const MdpSpec& spec) const;
  void dump_csv(const std::string& path) const;  // tabular only
};

/// Softmax policy. Tabular form keeps logits per state with temperature
/// beta; network form emits action logits (discrete) or a Gaussian
/// mean/log-std pair per action dimension (continuous). log-std is bounded
/// to [-5, 2]. The deterministic flag switches act() to the mode action with
/// lexicographic tie-breaking.
struct PolicyModel final : public Policy {
  bool tabular = true;
  bool continuous_actions = false;
  bool deterministic = false;
  double beta = 1.0;
  std::vector<std::vector<double>> logits;  // tabular: [state][action]
  Network actor;
  double max_force = 1.0;  // continuous action box, copied from the spec

  static PolicyModel tabular_uniform(const MdpSpec& spec);
  static PolicyModel for_spec(const MdpSpec& spec, Rng& rng,
                              const std::vector<int>& hidden = {32, 32});

  /// Discrete action distribution at s (softmax of beta * logits).
  std::vector<double> action_probs(const MdpSpec& spec, const State& s) const;
  Action act(const MdpSpec& spec, const State& s, Rng& rng) const override;
  Action greedy_action(const MdpSpec& spec, const State& s) const;
  /// Continuous heads: clamped mean/log-std split of the actor output.
  void gaussian_params(const MdpSpec& spec, const State& s, Vec& mean, Vec& log_std) const;
};

void save_policy(const PolicyModel& policy, const std::string& path);
PolicyModel load_policy(const std::string& path);
void save_value_fn(const ValueFn& v, const std::string& path);
ValueFn load_value_fn(const std::string& path);

struct ValueIterationResult {
  ValueFn values;
  std::vector<std::vector<double>> q;  // [state][action]
  PolicyModel greedy;                  // deterministic, lexicographic ties
  int sweeps = 0;
  std::vector<double> residuals;       // sup-norm residual per sweep
};

/// Exact value iteration on the true reward (tabular specs only).
/// Terminates when the sup-norm Bellman residual drops below tol.
ValueIterationResult value_iteration(const MdpSpec& spec, double tol = 1e-10);

/// Near-greedy expert: softmax over optimal Q with temperature beta.
PolicyModel softmax_expert(const ValueIterationResult& vi, double beta);

/// Exact V^pi under the true reward (tabular specs only).
ValueFn policy_evaluation(const MdpSpec& spec, const PolicyModel& policy, double tol = 1e-10);

struct McEstimate {
  double mean = 0.0;
  double se = 0.0;
  int n = 0;
};

/// Sampled discounted true-reward return from the initial-state
/// distribution; Monte Carlo stand-in for policy_evaluation on continuous
/// specs. Needs n_episodes >= 2 for a standard error.
McEstimate mc_value_estimate(const MdpSpec& spec, const Policy& policy, int n_episodes,
                             std::uint64_t seed);

/// Reward signal for policy updates: the IRL trainer plugs in the reward
/// head's mean, the expert oracle plugs in the true reward.
using RewardProvider =
    std::function<double(const State& s, const Action& a, const State& next, bool done)>;

RewardProvider reward_from_head(const RewardHead& head, const MdpSpec& spec);

/// Compact advantage actor-critic. Tabular specs use plain SGD on logits and
/// value table; continuous/network specs use Adam. The critic moves toward
/// TD(0) targets; the actor ascends advantage-weighted log-likelihood with
/// an entropy bonus.
class ActorCriticLearner {
 public:
  ActorCriticLearner(const MdpSpec& spec, double gamma, double lr_actor, double lr_critic,
                     double entropy_coef, std::uint64_t seed,
                     const std::vector<int>& hidden = {32, 32});

  /// One batch update. Rewards come exclusively from the provider; the
  /// batch is the stripped view and carries no environment reward.
  void update(std::span<const StrippedTransition> batch, const RewardProvider& reward);

  /// TD targets normally mask the bootstrap on done transitions. Surrogate
  /// rewards that are positive-biased (the JS imitator's -ln(1-D)) instead
  /// bootstrap through termination into the absorbing state's value.
  void set_bootstrap_on_done(bool v) { bootstrap_on_done_ = v; }

  const PolicyModel& policy() const { return policy_; }
  PolicyModel& policy() { return policy_; }
  const ValueFn& critic() const { return critic_; }
  ValueFn& critic() { return critic_; }

 private:
  const MdpSpec* spec_;
  double gamma_;
  double lr_actor_;
  double lr_critic_;
  double entropy_coef_;
  bool bootstrap_on_done_ = false;
  PolicyModel policy_;
  ValueFn critic_;
  AdamState actor_opt_;
  AdamState critic_opt_;
};

/// Free-function form of the update for callers holding the pieces.
void actor_critic_update(ActorCriticLearner& learner, std::span<const StrippedTransition> batch,
                         const RewardProvider& reward);

struct ExpertTrainOptions {
  int max_iterations = 2000;
  int episodes_per_iter = 4;
  int batch_size = 64;
  int eval_every = 20;
  int eval_episodes = 20;
  int patience = 20;  // evaluations without improvement before stopping
  double lr_actor = 1e-3;
  double lr_critic = 1e-3;
  double entropy_coef = 0.01;
};

/// Forward-RL oracle: trains the built-in actor-critic on the true reward
/// until the mean return plateaus, then freezes. Supplies experts for specs
/// without an exact DP solution.
PolicyModel train_true_reward_expert(const MdpSpec& spec, std::uint64_t seed,
                                     const ExpertTrainOptions& opts = {});

}  // namespace vlbirl
