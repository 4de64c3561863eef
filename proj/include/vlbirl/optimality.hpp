#pragma once

#include <functional>
#include <span>
#include <vector>

#include "vlbirl/env.hpp"
#include "vlbirl/net.hpp"
#include "vlbirl/rng.hpp"

namespace vlbirl {

/// Probabilities entering the Bernoulli KL are clamped to
/// [kProbClamp, 1 - kProbClamp] so the divergence stays finite.
inline constexpr double kProbClamp = 1e-6;

double sigmoid(double x);
double clamp_prob(double p);

/// D(Bernoulli(q) || Bernoulli(p)) = q ln(q/p) + (1-q) ln((1-q)/(1-p)).
/// Inputs must lie in [0,1]; both are clamped before evaluation. The result
/// is >= 0 and zero exactly when the clamped probabilities coincide.
double bernoulli_reverse_kl(double q, double p);

/// Which optimality estimate drives the reward objective: the sigmoid of the
/// one-step advantage (default), or the bounded exp-reward surrogate.
enum class OptimalityMode { Advantage, ExpReward };

std::string optimality_mode_name(OptimalityMode mode);
OptimalityMode optimality_mode_by_name(const std::string& name);

/// Gaussian reward model: net maps (state + action) features to
/// (mu_r, log sigma_r). Rewards are drawn as mu + sigma * eps with injected
/// standard-normal noise so gradients flow through both outputs. In
/// deterministic mode sigma is treated as zero and the draw returns mu.
struct RewardHead {
  Network net;
  bool deterministic_mode = false;
};

RewardHead make_reward_head(int feature_dim, const std::vector<int>& hidden, bool deterministic,
                            Rng& rng);

/// Binary logistic classifier over (state + action) features; its sigmoid
/// output plays the true optimality distribution p(O|s,a).
struct Classifier {
  Network net;
};

Classifier make_classifier(int feature_dim, const std::vector<int>& hidden, Rng& rng);

struct OptimalityPair {
  double q = 0.5;
  double p = 0.5;
};

struct RewardSample {
  double r = 0.0;
  double mu = 0.0;
  double sigma = 0.0;
};

/// Reparameterized draw r = mu + sigma * noise_eps. noise_eps is injected by
/// the caller (a standard-normal draw in training, anything in tests).
RewardSample sample_reward(const RewardHead& head, const Vec& sa_features, double noise_eps);

/// Mean reward mu_r(s,a); the reward signal handed to the policy learner.
double reward_mean(const RewardHead& head, const Vec& sa_features);

/// q(O=1|r) = sigmoid(r + gamma * v_next * (1-done) - v_s), clamped. The
/// bootstrap term is masked on terminal transitions.
double q_advantage(double r, double v_s, double v_next, double gamma, bool done);

/// Bounded monotone surrogate for the unnormalized exp(r) optimality:
/// sigmoid(r / scale), clamped. Off by default (see OptimalityMode).
double q_exp_reward(double r, double scale);

/// p(O=1|s,a) = clamped sigmoid of the classifier logit. Treated as a fixed
/// target during reward updates: no gradient flows into the classifier.
double p_optimality(const Classifier& clf, const Vec& sa_features);

/// Critic lookup used by the advantage form. Values are constants for the
/// reward objective: no gradient reaches the critic.
using StateValueFn = std::function<double(const State&)>;

struct RewardLossResult {
  double loss = 0.0;
  double kl_term = 0.0;
  double var_term = 0.0;
  GradientBundle head_grad;
};

/// Reverse-KL reward objective with variance penalty:
///   loss = mean_i KL(q_i || p_i) + lambda_var * mean_i sigma_i^2
/// where q_i comes from the reward head via the selected optimality mode and
/// p_i from the (frozen) classifier. Gradients are produced for the reward
/// head only. noise must hold one standard-normal draw per batch element;
/// it is ignored in deterministic mode.
RewardLossResult reward_loss(const RewardHead& head, const Classifier& clf,
                             const StateValueFn& critic, const MdpSpec& spec,
                             std::span<const StrippedTransition> batch,
                             std::span<const double> noise, double gamma, double lambda_var,
                             OptimalityMode mode, double exp_scale);

/// Convenience overload drawing the noise from rng.
RewardLossResult reward_loss(const RewardHead& head, const Classifier& clf,
                             const StateValueFn& critic, const MdpSpec& spec,
                             std::span<const StrippedTransition> batch, Rng& rng, double gamma,
                             double lambda_var, OptimalityMode mode, double exp_scale);

}  // namespace vlbirl
