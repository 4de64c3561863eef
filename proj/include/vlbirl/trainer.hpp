#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vlbirl/buffer.hpp"
#include "vlbirl/env.hpp"
#include "vlbirl/optimality.hpp"
#include "vlbirl/policy.hpp"

namespace vlbirl {

/// What drives the policy's reward signal: the learned reward head (the
/// full IRL objective) or -ln(1-D) from the discriminator (JS imitation
/// baseline; no reward head, no KL objective).
enum class Objective { VlbIrl, JsImitator };

struct TrainConfig {
  std::string env_name = "gridworld";
  int n_iterations = 300;
  int rollout_episodes_per_iter = 4;
  int batch_size = 64;
  int classifier_steps_per_iter = 1;
  int reward_steps_per_iter = 1;
  int policy_steps_per_iter = 1;
  double gamma = 0.99;
  double lambda_var = 0.1;
  double lr_classifier = 1e-3;
  double lr_reward = 1e-3;
  // 0 = auto: 0.5 tabular SGD, 1e-3 network Adam.
  double lr_actor = 0.0;
  double lr_critic = 0.0;
  std::uint64_t buffer_capacity = 200000;
  std::uint64_t seed = 0;
  OptimalityMode optimality_mode = OptimalityMode::Advantage;
  bool deterministic_reward = false;
  int eval_every = 10;  // 0 = baseline and final evaluation only
  int eval_episodes = 50;
  double entropy_coef = 0.01;
  double exp_reward_scale = 1.0;
  std::vector<int> reward_hidden{16, 16};
  std::vector<int> policy_hidden{32, 32};

  void validate() const;  // throws invalid_argument naming the field
  double resolved_lr_actor(const MdpSpec& spec) const;
  double resolved_lr_critic(const MdpSpec& spec) const;
};

struct TrainReportRow {
  int iteration = 0;
  double classifier_loss = 0.0;
  double classifier_accuracy = 0.0;
  double reward_kl_loss = 0.0;
  double variance_term = 0.0;
  double learner_mean_return = 0.0;
  double ile = 0.0;
  double wall_time_ms = 0.0;
};

struct TrainReport {
  std::vector<TrainReportRow> rows;
};

/// Deterministic metric columns only; wall time goes to the timing sidecar
/// so reruns with the same seed produce byte-identical reports.
void write_report_csv(const TrainReport& report, const std::string& path);
void write_timing_csv(const TrainReport& report, const std::string& path);
TrainReport read_report_csv(const std::string& path);

struct ClassifierUpdateResult {
  double loss = 0.0;
  double accuracy = 0.0;
};

/// Binary logistic regression step(s): expert labeled 1, learner labeled 0,
/// batches balanced by truncating the larger. Returns the last step's loss
/// and threshold-0.5 accuracy.
ClassifierUpdateResult classifier_update(Classifier& clf, AdamState& opt, const MdpSpec& spec,
                                         std::span<const StrippedTransition> expert_batch,
                                         std::span<const StrippedTransition> learner_batch,
                                         double lr, int steps);

struct TrainResult {
  RewardHead reward_head;
  PolicyModel policy;
  Classifier classifier;
  TrainReport report;
  ValueFn critic;
};

/// The interleaved classifier / reward / policy loop. Phases are public so
/// tests can drive them individually; run() executes the whole schedule.
class Trainer {
 public:
  Trainer(const MdpSpec& spec, std::vector<StrippedTrajectory> expert, TrainConfig cfg,
          Objective objective = Objective::VlbIrl);

  void collect_rollouts(int iteration);
  ClassifierUpdateResult update_classifier();
  std::optional<RewardLossResult> update_reward();  // empty for the JS objective
  void update_policy();
  TrainReportRow evaluate(int iteration);
  TrainResult run();

  const MdpSpec& spec() const { return *spec_; }
  const TrainConfig& config() const { return cfg_; }
  const Classifier& classifier() const { return clf_; }
  const RewardHead& reward_head() const { return head_; }
  const ActorCriticLearner& learner() const { return learner_; }
  const RolloutBuffer& buffer() const { return buffer_; }
  std::size_t expert_transition_count() const { return expert_flat_.size(); }

 private:
  std::vector<StrippedTransition> sample_expert_batch();
  RewardProvider policy_reward_provider() const;

  const MdpSpec* spec_;
  TrainConfig cfg_;
  Objective objective_;
  std::vector<StrippedTransition> expert_flat_;
  RewardHead head_;
  Classifier clf_;
  AdamState head_opt_;
  AdamState clf_opt_;
  ActorCriticLearner learner_;
  RolloutBuffer buffer_;
  Rng loop_rng_;
  std::vector<double> ile_reference_;  // optimal values (tabular), empty otherwise
  std::vector<StrippedTransition> learner_batch_;
  std::vector<StrippedTransition> expert_batch_;
  ClassifierUpdateResult last_classifier_;
  RewardLossResult last_reward_;
  bool has_update_metrics_ = false;
};

/// Algorithm entry point used by the CLI and tests.
TrainResult train(const MdpSpec& spec, const std::vector<StrippedTrajectory>& expert,
                  const TrainConfig& cfg, Objective objective = Objective::VlbIrl);

std::vector<StrippedTrajectory> strip_trajectories(const std::vector<Trajectory>& trajectories);

}  // namespace vlbirl
