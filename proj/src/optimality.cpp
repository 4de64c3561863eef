#include "vlbirl/optimality.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vlbirl {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double clamp_prob(double p) { return std::clamp(p, kProbClamp, 1.0 - kProbClamp); }

double bernoulli_reverse_kl(double q, double p) {
  if (!(q >= 0.0 && q <= 1.0) || !(p >= 0.0 && p <= 1.0))
    throw std::invalid_argument("bernoulli_reverse_kl: probabilities must lie in [0,1]");
  q = clamp_prob(q);
  p = clamp_prob(p);
  return q * std::log(q / p) + (1.0 - q) * std::log((1.0 - q) / (1.0 - p));
}

std::string optimality_mode_name(OptimalityMode mode) {
  return mode == OptimalityMode::Advantage ? "advantage" : "exp_reward";
}

OptimalityMode optimality_mode_by_name(const std::string& name) {
  if (name == "advantage") return OptimalityMode::Advantage;
  if (name == "exp_reward") return OptimalityMode::ExpReward;
  throw std::invalid_argument("unknown optimality mode: " + name);
}

RewardHead make_reward_head(int feature_dim, const std::vector<int>& hidden, bool deterministic,
                            Rng& rng) {
  RewardHead head;
  head.net = make_mlp(feature_dim, hidden, 2, Activation::LeakyRelu, Activation::Identity, rng);
  head.deterministic_mode = deterministic;
  return head;
}

Classifier make_classifier(int feature_dim, const std::vector<int>& hidden, Rng& rng) {
  Classifier clf;
  clf.net = make_mlp(feature_dim, hidden, 1, Activation::LeakyRelu, Activation::Identity, rng);
  return clf;
}

RewardSample sample_reward(const RewardHead& head, const Vec& sa_features, double noise_eps) {
  const Vec out = forward(head.net, sa_features);
  RewardSample s;
  s.mu = out[0];
  s.sigma = head.deterministic_mode ? 0.0 : std::exp(out[1]);
  s.r = s.mu + s.sigma * noise_eps;
  return s;
}

double reward_mean(const RewardHead& head, const Vec& sa_features) {
  return forward(head.net, sa_features)[0];
}

double q_advantage(double r, double v_s, double v_next, double gamma, bool done) {
  if (gamma <= 0.0 || gamma >= 1.0) throw std::invalid_argument("q_advantage: gamma not in (0,1)");
  const double advantage = r + gamma * v_next * (done ? 0.0 : 1.0) - v_s;
  return clamp_prob(sigmoid(advantage));
}

double q_exp_reward(double r, double scale) {
  if (scale <= 0.0) throw std::invalid_argument("q_exp_reward: scale must be positive");
  return clamp_prob(sigmoid(r / scale));
}

double p_optimality(const Classifier& clf, const Vec& sa_features) {
  return clamp_prob(sigmoid(forward(clf.net, sa_features)[0]));
}

RewardLossResult reward_loss(const RewardHead& head, const Classifier& clf,
                             const StateValueFn& critic, const MdpSpec& spec,
                             std::span<const StrippedTransition> batch,
                             std::span<const double> noise, double gamma, double lambda_var,
                             OptimalityMode mode, double exp_scale) {
  if (batch.empty()) throw std::invalid_argument("reward_loss: empty batch");
  if (!head.deterministic_mode && noise.size() != batch.size())
    throw std::invalid_argument("reward_loss: need one noise draw per batch element");
  if (lambda_var < 0.0) throw std::invalid_argument("reward_loss: lambda_var must be >= 0");

  RewardLossResult result;
  result.head_grad = GradientBundle::zeros_like(head.net);
  const double inv_n = 1.0 / static_cast<double>(batch.size());

  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& tr = batch[i];
    const Vec feat = spec.sa_features(tr.state, tr.action);
    const ForwardTrace trace = forward_traced(head.net, feat);
    const double mu = trace.output[0];
    const double eps = head.deterministic_mode ? 0.0 : noise[i];
    const double sigma = head.deterministic_mode ? 0.0 : std::exp(trace.output[1]);
    const double r = mu + sigma * eps;

    double q_raw = 0.0;
    double dq_dr = 0.0;
    if (mode == OptimalityMode::Advantage) {
      const double v_s = critic(tr.state);
      const double v_next = tr.done ? 0.0 : critic(tr.next_state);
      if (!std::isfinite(v_s) || !std::isfinite(v_next))
        throw std::runtime_error("reward_loss: non-finite critic value");
      q_raw = sigmoid(r + gamma * v_next - v_s);
      dq_dr = q_raw * (1.0 - q_raw);
    } else {
      q_raw = sigmoid(r / exp_scale);
      dq_dr = q_raw * (1.0 - q_raw) / exp_scale;
    }
    const double q = clamp_prob(q_raw);
    if (q_raw < kProbClamp || q_raw > 1.0 - kProbClamp) dq_dr = 0.0;  // clamped: flat

    const double p = p_optimality(clf, feat);
    const double kl = q * std::log(q / p) + (1.0 - q) * std::log((1.0 - q) / (1.0 - p));
    result.kl_term += kl * inv_n;
    result.var_term += lambda_var * sigma * sigma * inv_n;

    const double dkl_dq = std::log(q / p) - std::log((1.0 - q) / (1.0 - p));
    const double dl_dr = dkl_dq * dq_dr;

    Vec upstream(2, 0.0);
    upstream[0] = dl_dr * inv_n;
    if (!head.deterministic_mode)
      upstream[1] = (dl_dr * eps * sigma + lambda_var * 2.0 * sigma * sigma) * inv_n;
    backward(head.net, trace, upstream, result.head_grad);
  }
  result.loss = result.kl_term + result.var_term;
  if (!std::isfinite(result.loss)) throw std::runtime_error("reward_loss: non-finite loss");
  return result;
}

RewardLossResult reward_loss(const RewardHead& head, const Classifier& clf,
                             const StateValueFn& critic, const MdpSpec& spec,
                             std::span<const StrippedTransition> batch, Rng& rng, double gamma,
                             double lambda_var, OptimalityMode mode, double exp_scale) {
  std::vector<double> noise(batch.size(), 0.0);
  if (!head.deterministic_mode)
    for (double& n : noise) n = rng.normal();
  return reward_loss(head, clf, critic, spec, batch, noise, gamma, lambda_var, mode, exp_scale);
}

}  // namespace vlbirl
