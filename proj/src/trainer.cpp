#include "vlbirl/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace vlbirl {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void require(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw std::invalid_argument("TrainConfig." + field + ": " + what);
}

/// Appends an absorbing self-loop after episodes that terminated, so the
/// discriminator sees termination as data. Standard practice for the
/// positive-biased JS reward in episodic tasks; the IRL objective does not
/// need it.
StrippedTransition absorbing_pad(const MdpSpec& spec, const State& terminal) {
  StrippedTransition t;
  t.state = terminal;
  t.action = spec.tabular() ? spec.action_by_index(0) : [&] {
    Action a;
    a.vec.assign(static_cast<std::size_t>(spec.action_feature_dim()), 0.0);
    return a;
  }();
  t.next_state = terminal;
  t.done = true;
  return t;
}

}  // namespace

void TrainConfig::validate() const {
  require(n_iterations >= 1, "n_iterations", "must be >= 1");
  require(rollout_episodes_per_iter >= 1, "rollout_episodes_per_iter", "must be >= 1");
  require(batch_size >= 1, "batch_size", "must be >= 1");
  require(classifier_steps_per_iter >= 1, "classifier_steps_per_iter", "must be >= 1");
  require(reward_steps_per_iter >= 1, "reward_steps_per_iter", "must be >= 1");
  require(policy_steps_per_iter >= 1, "policy_steps_per_iter", "must be >= 1");
  require(gamma > 0.0 && gamma < 1.0, "gamma", "must be in (0,1)");
  require(lambda_var >= 0.0, "lambda_var", "must be >= 0");
  require(lr_classifier > 0.0, "lr_classifier", "must be > 0");
  require(lr_reward > 0.0, "lr_reward", "must be > 0");
  require(lr_actor >= 0.0, "lr_actor", "must be >= 0 (0 = auto)");
  require(lr_critic >= 0.0, "lr_critic", "must be >= 0 (0 = auto)");
  require(buffer_capacity >= 1, "buffer_capacity", "must be >= 1");
  require(eval_every >= 0, "eval_every", "must be >= 0");
  require(eval_episodes >= 2, "eval_episodes", "must be >= 2");
  require(entropy_coef >= 0.0, "entropy_coef", "must be >= 0");
  require(exp_reward_scale > 0.0, "exp_reward_scale", "must be > 0");
  require(!reward_hidden.empty(), "reward_hidden", "must name at least one layer");
  require(!policy_hidden.empty(), "policy_hidden", "must name at least one layer");
}

double TrainConfig::resolved_lr_actor(const MdpSpec& spec) const {
  if (lr_actor > 0.0) return lr_actor;
  return spec.tabular() ? 0.5 : 1e-3;
}

double TrainConfig::resolved_lr_critic(const MdpSpec& spec) const {
  if (lr_critic > 0.0) return lr_critic;
  return spec.tabular() ? 0.5 : 1e-3;
}

void write_report_csv(const TrainReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open report for writing: " + path);
  out << "iteration,classifier_loss,classifier_accuracy,reward_kl_loss,variance_term,"
         "learner_mean_return,ile\n";
  for (const auto& r : report.rows)
    out << r.iteration << ',' << fmt_double(r.classifier_loss) << ','
        << fmt_double(r.classifier_accuracy) << ',' << fmt_double(r.reward_kl_loss) << ','
        << fmt_double(r.variance_term) << ',' << fmt_double(r.learner_mean_return) << ','
        << fmt_double(r.ile) << "\n";
  if (!out) throw std::runtime_error("failed writing report: " + path);
}

void write_timing_csv(const TrainReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open timing file for writing: " + path);
  out << "iteration,wall_time_ms\n";
  for (const auto& r : report.rows)
    out << r.iteration << ',' << fmt_double(r.wall_time_ms) << "\n";
}

TrainReport read_report_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open report: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty report: " + path);
  TrainReport report;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 7) throw std::runtime_error("malformed report row: " + line);
    TrainReportRow r;
    r.iteration = std::stoi(fields[0]);
    r.classifier_loss = std::stod(fields[1]);
    r.classifier_accuracy = std::stod(fields[2]);
    r.reward_kl_loss = std::stod(fields[3]);
    r.variance_term = std::stod(fields[4]);
    r.learner_mean_return = std::stod(fields[5]);
    r.ile = std::stod(fields[6]);
    report.rows.push_back(r);
  }
  return report;
}

ClassifierUpdateResult classifier_update(Classifier& clf, AdamState& opt, const MdpSpec& spec,
                                         std::span<const StrippedTransition> expert_batch,
                                         std::span<const StrippedTransition> learner_batch,
                                         double lr, int steps) {
  if (expert_batch.empty() || learner_batch.empty())
    throw std::invalid_argument("classifier_update: empty batch");
  if (steps < 1) throw std::invalid_argument("classifier_update: steps must be >= 1");
  if (lr <= 0.0) throw std::invalid_argument("classifier_update: lr must be > 0");
  opt.lr = lr;

  // Balanced batches: truncate the larger side.
  const std::size_t m = std::min(expert_batch.size(), learner_batch.size());
  std::vector<Vec> feats;
  std::vector<double> labels;
  feats.reserve(2 * m);
  for (std::size_t i = 0; i < m; ++i) {
    feats.push_back(spec.sa_features(expert_batch[i].state, expert_batch[i].action));
    labels.push_back(1.0);
  }
  for (std::size_t i = 0; i < m; ++i) {
    feats.push_back(spec.sa_features(learner_batch[i].state, learner_batch[i].action));
    labels.push_back(0.0);
  }

  ClassifierUpdateResult result;
  const double inv_n = 1.0 / static_cast<double>(feats.size());
  for (int step = 0; step < steps; ++step) {
    GradientBundle grad = GradientBundle::zeros_like(clf.net);
    double loss = 0.0;
    int correct = 0;
    for (std::size_t i = 0; i < feats.size(); ++i) {
      const ForwardTrace trace = forward_traced(clf.net, feats[i]);
      const double z = trace.output[0];
      const double p = sigmoid(z);
      // Stable BCE: log(1+e^-|z|) + max(z,0) - z*y
      loss += (std::log1p(std::exp(-std::abs(z))) + std::max(z, 0.0) - z * labels[i]) * inv_n;
      correct += ((p > 0.5) == (labels[i] > 0.5)) ? 1 : 0;
      Vec upstream(1, (p - labels[i]) * inv_n);
      backward(clf.net, trace, upstream, grad);
    }
    adam_step(clf.net, grad, opt);
    result.loss = loss;
    result.accuracy = static_cast<double>(correct) / static_cast<double>(feats.size());
  }
  return result;
}

Trainer::Trainer(const MdpSpec& spec, std::vector<StrippedTrajectory> expert, TrainConfig cfg,
                 Objective objective)
    : spec_(&spec),
      cfg_(std::move(cfg)),
      objective_(objective),
      head_{},
      clf_{},
      learner_(spec, cfg_.gamma, cfg_.resolved_lr_actor(spec), cfg_.resolved_lr_critic(spec),
               cfg_.entropy_coef, mix_seed(cfg_.seed, 0x202), cfg_.policy_hidden),
      buffer_(cfg_.buffer_capacity),
      loop_rng_(mix_seed(cfg_.seed, 0x100)) {
  cfg_.validate();
  if (expert.empty()) throw std::invalid_argument("train: expert trajectories must be nonempty");

  const bool pad = objective_ == Objective::JsImitator;
  for (const auto& traj : expert) {
    for (const auto& t : traj) expert_flat_.push_back(t);
    if (pad && !traj.empty() && traj.back().done)
      expert_flat_.push_back(absorbing_pad(*spec_, traj.back().next_state));
  }
  if (expert_flat_.empty()) throw std::invalid_argument("train: expert trajectories are empty");

  Rng head_rng(mix_seed(cfg_.seed, 0x200));
  const int feat_dim = spec.state_feature_dim() + spec.action_feature_dim();
  head_ = make_reward_head(feat_dim, cfg_.reward_hidden, cfg_.deterministic_reward, head_rng);
  Rng clf_rng(mix_seed(cfg_.seed, 0x201));
  clf_ = make_classifier(feat_dim, cfg_.reward_hidden, clf_rng);
  head_opt_ = AdamState::init(head_.net, cfg_.lr_reward);
  clf_opt_ = AdamState::init(clf_.net, cfg_.lr_classifier);

  if (objective_ == Objective::JsImitator) learner_.set_bootstrap_on_done(true);

  if (spec.tabular()) ile_reference_ = value_iteration(spec).values.table;
}

std::vector<StrippedTransition> Trainer::sample_expert_batch() {
  std::vector<StrippedTransition> batch;
  batch.reserve(static_cast<std::size_t>(cfg_.batch_size));
  for (int i = 0; i < cfg_.batch_size; ++i)
    batch.push_back(expert_flat_[loop_rng_.uniform_index(expert_flat_.size())]);
  return batch;
}

void Trainer::collect_rollouts(int iteration) {
  const auto trajectories =
      rollout(*spec_, learner_.policy(), cfg_.rollout_episodes_per_iter,
              mix_seed(cfg_.seed, 0x300 + static_cast<std::uint64_t>(iteration)));
  const bool pad = objective_ == Objective::JsImitator;
  for (const auto& traj : trajectories) {
    buffer_.push(traj);
    if (pad && !traj.transitions.empty() && traj.transitions.back().done)
      buffer_.push(absorbing_pad(*spec_, traj.transitions.back().next_state));
  }
  learner_batch_ = buffer_.sample(cfg_.batch_size, loop_rng_);
  expert_batch_ = sample_expert_batch();
}

ClassifierUpdateResult Trainer::update_classifier() {
  last_classifier_ = classifier_update(clf_, clf_opt_, *spec_, expert_batch_, learner_batch_,
                                       cfg_.lr_classifier, cfg_.classifier_steps_per_iter);
  has_update_metrics_ = true;
  return last_classifier_;
}

std::optional<RewardLossResult> Trainer::update_reward() {
  if (objective_ == Objective::JsImitator) return std::nullopt;
  // Union minibatch: learner pairs push q down where p is low, expert pairs
  // push q up where p is high.
  std::vector<StrippedTransition> batch = learner_batch_;
  batch.insert(batch.end(), expert_batch_.begin(), expert_batch_.end());
  const StateValueFn critic = learner_.critic().as_fn(*spec_);
  for (int step = 0; step < cfg_.reward_steps_per_iter; ++step) {
    last_reward_ = reward_loss(head_, clf_, critic, *spec_, batch, loop_rng_, cfg_.gamma,
                               cfg_.lambda_var, cfg_.optimality_mode, cfg_.exp_reward_scale);
    adam_step(head_.net, last_reward_.head_grad, head_opt_);
  }
  return last_reward_;
}

RewardProvider Trainer::policy_reward_provider() const {
  if (objective_ == Objective::VlbIrl) return reward_from_head(head_, *spec_);
  return [this](const State& s, const Action& a, const State&, bool) {
    const double d = p_optimality(clf_, spec_->sa_features(s, a));
    return -std::log(1.0 - d);
  };
}

void Trainer::update_policy() {
  const RewardProvider provider = policy_reward_provider();
  for (int step = 0; step < cfg_.policy_steps_per_iter; ++step) {
    const auto batch = buffer_.sample(cfg_.batch_size, loop_rng_);
    learner_.update(batch, provider);
  }
}

TrainReportRow Trainer::evaluate(int iteration) {
  TrainReportRow row;
  row.iteration = iteration;
  if (has_update_metrics_) {
    row.classifier_loss = last_classifier_.loss;
    row.classifier_accuracy = last_classifier_.accuracy;
    if (objective_ == Objective::VlbIrl) {
      row.reward_kl_loss = last_reward_.kl_term;
      row.variance_term = last_reward_.var_term;
    } else {
      row.reward_kl_loss = kNan;
      row.variance_term = kNan;
    }
  } else {
    row.classifier_loss = kNan;
    row.classifier_accuracy = kNan;
    row.reward_kl_loss = kNan;
    row.variance_term = kNan;
  }

  const auto trajectories =
      rollout(*spec_, learner_.policy(), cfg_.eval_episodes,
              mix_seed(cfg_.seed, 0x400 + static_cast<std::uint64_t>(iteration)));
  double acc = 0.0;
  for (const auto& traj : trajectories) {
    double g = 0.0;
    for (const auto& t : traj.transitions) g += t.true_reward;
    acc += g;
  }
  row.learner_mean_return = acc / static_cast<double>(trajectories.size());

  if (spec_->tabular()) {
    const ValueFn v_learner = policy_evaluation(*spec_, learner_.policy(), 1e-10);
    double ss = 0.0;
    for (std::size_t s = 0; s < ile_reference_.size(); ++s) {
      const double d = ile_reference_[s] - v_learner.table[s];
      ss += d * d;
    }
    row.ile = std::sqrt(ss);
  } else {
    row.ile = kNan;  // continuous ILE needs a reference policy; see evaluation module
  }
  return row;
}

TrainResult Trainer::run() {
  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed_ms = [&t0] {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
        .count();
  };

  TrainResult result;
  TrainReportRow baseline = evaluate(0);
  baseline.wall_time_ms = elapsed_ms();
  result.report.rows.push_back(baseline);

  for (int it = 1; it <= cfg_.n_iterations; ++it) {
    try {
      collect_rollouts(it);
      update_classifier();
      update_reward();
      update_policy();
    } catch (const std::runtime_error& e) {
      throw std::runtime_error("train: aborted at iteration " + std::to_string(it) + ": " +
                               e.what());
    }
    const bool due = (cfg_.eval_every > 0 && it % cfg_.eval_every == 0) || it == cfg_.n_iterations;
    if (due) {
      TrainReportRow row = evaluate(it);
      row.wall_time_ms = elapsed_ms();
      result.report.rows.push_back(row);
    }
  }

  result.reward_head = head_;
  result.policy = learner_.policy();
  result.classifier = clf_;
  result.critic = learner_.critic();
  return result;
}

TrainResult train(const MdpSpec& spec, const std::vector<StrippedTrajectory>& expert,
                  const TrainConfig& cfg, Objective objective) {
  Trainer trainer(spec, expert, cfg, objective);
  return trainer.run();
}

std::vector<StrippedTrajectory> strip_trajectories(const std::vector<Trajectory>& trajectories) {
  std::vector<StrippedTrajectory> out;
  out.reserve(trajectories.size());
  for (const auto& t : trajectories) out.push_back(strip_trajectory(t));
  return out;
}

}  // namespace vlbirl
