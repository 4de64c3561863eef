#include "vlbirl/policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <json.hpp>

#include "vlbirl/buffer.hpp"

namespace vlbirl {

namespace {

constexpr double kLogStdMin = -5.0;
constexpr double kLogStdMax = 2.0;
constexpr int kMaxSweeps = 10000000;

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

int argmax_lex(const std::vector<double>& xs) {
  int best = 0;
  for (std::size_t i = 1; i < xs.size(); ++i)
    if (xs[i] > xs[best]) best = static_cast<int>(i);
  return best;
}

}  // namespace

ValueFn ValueFn::zeros(const MdpSpec& spec, Rng& rng, const std::vector<int>& hidden) {
  ValueFn v;
  if (spec.tabular()) {
    v.tabular = true;
    v.table.assign(spec.n_states(), 0.0);
  } else {
    v.tabular = false;
    v.net = make_mlp(spec.state_feature_dim(), hidden, 1, Activation::Tanh,
                     Activation::Identity, rng);
  }
  return v;
}

double ValueFn::value(const MdpSpec& spec, const State& s) const {
  if (tabular) {
    spec.validate_state(s);
    return table[static_cast<std::size_t>(s.index)];
  }
  return forward(net, spec.state_features(s))[0];
}

StateValueFn ValueFn::as_fn(const MdpSpec& spec) const {
  return [this, &spec](const State& s) { return value(spec, s); };
}

void ValueFn::dump_csv(const std::string& path) const {
  if (!tabular) throw std::logic_error("dump_csv: value table is not tabular");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open value table file: " + path);
  out << "state,value\n";
  for (std::size_t s = 0; s < table.size(); ++s) out << s << ',' << fmt_double(table[s]) << "\n";
}

PolicyModel PolicyModel::tabular_uniform(const MdpSpec& spec) {
  PolicyModel p;
  p.tabular = true;
  p.logits.assign(spec.n_states(), std::vector<double>(spec.n_actions(), 0.0));
  return p;
}

PolicyModel PolicyModel::for_spec(const MdpSpec& spec, Rng& rng, const std::vector<int>& hidden) {
  if (spec.tabular()) return tabular_uniform(spec);
  PolicyModel p;
  p.tabular = false;
  p.continuous_actions = true;
  p.max_force = spec.point().max_force;
  p.actor = make_mlp(spec.state_feature_dim(), hidden, 2 * spec.action_feature_dim(),
                     Activation::Tanh, Activation::Identity, rng);
  return p;
}

std::vector<double> PolicyModel::action_probs(const MdpSpec& spec, const State& s) const {
  if (!tabular) throw std::logic_error("action_probs: not a discrete policy");
  spec.validate_state(s);
  const auto& z = logits[static_cast<std::size_t>(s.index)];
  if (deterministic) {
    std::vector<double> probs(z.size(), 0.0);
    probs[static_cast<std::size_t>(argmax_lex(z))] = 1.0;
    return probs;
  }
  double zmax = -std::numeric_limits<double>::infinity();
  for (double v : z) zmax = std::max(zmax, beta * v);
  std::vector<double> probs(z.size());
  double sum = 0.0;
  for (std::size_t a = 0; a < z.size(); ++a) {
    probs[a] = std::exp(beta * z[a] - zmax);
    sum += probs[a];
  }
  for (double& p : probs) p /= sum;
  return probs;
}

void PolicyModel::gaussian_params(const MdpSpec& spec, const State& s, Vec& mean,
                                  Vec& log_std) const {
  if (tabular || !continuous_actions)
    throw std::logic_error("gaussian_params: not a continuous policy");
  const Vec out = forward(actor, spec.state_features(s));
  const std::size_t d = out.size() / 2;
  mean.assign(out.begin(), out.begin() + static_cast<long>(d));
  log_std.resize(d);
  for (std::size_t i = 0; i < d; ++i)
    log_std[i] = std::clamp(out[d + i], kLogStdMin, kLogStdMax);
}

Action PolicyModel::act(const MdpSpec& spec, const State& s, Rng& rng) const {
  if (tabular) {
    const auto probs = action_probs(spec, s);
    if (deterministic) return spec.action_by_index(argmax_lex(probs));
    double u = rng.uniform();
    double acc = 0.0;
    for (std::size_t a = 0; a < probs.size(); ++a) {
      acc += probs[a];
      if (u < acc) return spec.action_by_index(static_cast<int>(a));
    }
    return spec.action_by_index(static_cast<int>(probs.size()) - 1);
  }
  Vec mean, log_std;
  gaussian_params(spec, s, mean, log_std);
  Action a;
  a.vec.resize(mean.size());
  for (std::size_t i = 0; i < mean.size(); ++i)
    a.vec[i] = deterministic ? mean[i] : mean[i] + std::exp(log_std[i]) * rng.normal();
  return a;
}

Action PolicyModel::greedy_action(const MdpSpec& spec, const State& s) const {
  if (tabular) return spec.action_by_index(argmax_lex(action_probs(spec, s)));
  Vec mean, log_std;
  gaussian_params(spec, s, mean, log_std);
  Action a;
  a.vec = mean;
  return a;
}

void save_policy(const PolicyModel& policy, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open policy checkpoint for writing: " + path);
  nlohmann::json header{{"type", policy.tabular ? "tabular" : "gaussian"},
                        {"beta", policy.beta},
                        {"deterministic", policy.deterministic},
                        {"max_force", policy.max_force}};
  if (policy.tabular) {
    header["n_states"] = policy.logits.size();
    header["n_actions"] = policy.logits.empty() ? 0 : policy.logits[0].size();
  }
  out << header.dump() << "\n";
  if (policy.tabular) {
    for (const auto& row : policy.logits) {
      for (std::size_t a = 0; a < row.size(); ++a) out << (a ? " " : "") << fmt_double(row[a]);
      out << "\n";
    }
  } else {
    save_network(policy.actor, out);
  }
  if (!out) throw std::runtime_error("failed writing policy checkpoint: " + path);
}

PolicyModel load_policy(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open policy checkpoint: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty policy checkpoint: " + path);
  const nlohmann::json header = nlohmann::json::parse(line);
  PolicyModel p;
  p.beta = header.at("beta").get<double>();
  p.deterministic = header.at("deterministic").get<bool>();
  p.max_force = header.at("max_force").get<double>();
  if (header.at("type").get<std::string>() == "tabular") {
    p.tabular = true;
    const std::size_t ns = header.at("n_states").get<std::size_t>();
    const std::size_t na = header.at("n_actions").get<std::size_t>();
    p.logits.assign(ns, std::vector<double>(na, 0.0));
    for (std::size_t s = 0; s < ns; ++s) {
      if (!std::getline(in, line)) throw std::runtime_error("truncated policy checkpoint: " + path);
      std::stringstream ss(line);
      for (std::size_t a = 0; a < na; ++a)
        if (!(ss >> p.logits[s][a]))
          throw std::runtime_error("policy checkpoint shape mismatch: " + path);
    }
  } else {
    p.tabular = false;
    p.continuous_actions = true;
    p.actor = load_network(in);
  }
  return p;
}

void save_value_fn(const ValueFn& v, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open value checkpoint for writing: " + path);
  nlohmann::json header{{"type", v.tabular ? "tabular" : "net"}};
  if (v.tabular) header["n_states"] = v.table.size();
  out << header.dump() << "\n";
  if (v.tabular) {
    for (std::size_t s = 0; s < v.table.size(); ++s)
      out << (s ? " " : "") << fmt_double(v.table[s]);
    out << "\n";
  } else {
    save_network(v.net, out);
  }
}

ValueFn load_value_fn(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open value checkpoint: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty value checkpoint: " + path);
  const nlohmann::json header = nlohmann::json::parse(line);
  ValueFn v;
  if (header.at("type").get<std::string>() == "tabular") {
    v.tabular = true;
    const std::size_t ns = header.at("n_states").get<std::size_t>();
    v.table.assign(ns, 0.0);
    if (!std::getline(in, line)) throw std::runtime_error("truncated value checkpoint: " + path);
    std::stringstream ss(line);
    for (std::size_t s = 0; s < ns; ++s)
      if (!(ss >> v.table[s])) throw std::runtime_error("value checkpoint shape mismatch: " + path);
  } else {
    v.tabular = false;
    v.net = load_network(in);
  }
  return v;
}

ValueIterationResult value_iteration(const MdpSpec& spec, double tol) {
  if (!spec.tabular()) throw std::invalid_argument("value_iteration: spec is not tabular");
  if (tol <= 0.0) throw std::invalid_argument("value_iteration: tol must be positive");
  const int ns = spec.n_states();
  const int na = spec.n_actions();

  // Transition table is deterministic; fetch it once.
  std::vector<std::vector<StepResult>> trans(ns, std::vector<StepResult>(na));
  for (int s = 0; s < ns; ++s)
    for (int a = 0; a < na; ++a) trans[s][a] = spec.lookup_transition(s, a);

  ValueIterationResult result;
  result.values.tabular = true;
  result.values.table.assign(ns, 0.0);
  result.q.assign(ns, std::vector<double>(na, 0.0));
  auto& v = result.values.table;

  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    double residual = 0.0;
    std::vector<double> vnew(ns, 0.0);
    for (int s = 0; s < ns; ++s) {
      if (spec.is_terminal(spec.state_by_index(s))) continue;
      double best = -std::numeric_limits<double>::infinity();
      for (int a = 0; a < na; ++a) {
        const auto& t = trans[s][a];
        const double q = t.true_reward +
                         spec.discount() * (t.done ? 0.0 : v[static_cast<std::size_t>(t.next_state.index)]);
        result.q[s][a] = q;
        best = std::max(best, q);
      }
      vnew[s] = best;
      residual = std::max(residual, std::abs(vnew[s] - v[s]));
    }
    v = std::move(vnew);
    result.residuals.push_back(residual);
    result.sweeps = sweep + 1;
    if (residual < tol) break;
  }
  if (result.residuals.empty() || result.residuals.back() >= tol)
    throw std::runtime_error("value_iteration: failed to converge");

  // Final Q refresh against the converged values.
  for (int s = 0; s < ns; ++s)
    for (int a = 0; a < na; ++a) {
      const auto& t = trans[s][a];
      result.q[s][a] = t.true_reward +
                       spec.discount() * (t.done ? 0.0 : v[static_cast<std::size_t>(t.next_state.index)]);
    }

  result.greedy.tabular = true;
  result.greedy.deterministic = true;
  result.greedy.logits = result.q;
  return result;
}

PolicyModel softmax_expert(const ValueIterationResult& vi, double beta) {
  if (beta <= 0.0) throw std::invalid_argument("softmax_expert: beta must be positive");
  PolicyModel p;
  p.tabular = true;
  p.beta = beta;
  p.logits = vi.q;
  return p;
}

ValueFn policy_evaluation(const MdpSpec& spec, const PolicyModel& policy, double tol) {
  if (!spec.tabular()) throw std::invalid_argument("policy_evaluation: spec is not tabular");
  if (tol <= 0.0) throw std::invalid_argument("policy_evaluation: tol must be positive");
  const int ns = spec.n_states();
  const int na = spec.n_actions();

  std::vector<std::vector<StepResult>> trans(ns, std::vector<StepResult>(na));
  std::vector<std::vector<double>> probs(ns);
  for (int s = 0; s < ns; ++s) {
    for (int a = 0; a < na; ++a) trans[s][a] = spec.lookup_transition(s, a);
    probs[s] = policy.action_probs(spec, spec.state_by_index(s));
  }

  ValueFn result;
  result.tabular = true;
  result.table.assign(ns, 0.0);
  auto& v = result.table;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    double residual = 0.0;
    for (int s = 0; s < ns; ++s) {
      if (spec.is_terminal(spec.state_by_index(s))) continue;
      double acc = 0.0;
      for (int a = 0; a < na; ++a) {
        const auto& t = trans[s][a];
        acc += probs[s][a] * (t.true_reward +
                              spec.discount() *
                                  (t.done ? 0.0 : v[static_cast<std::size_t>(t.next_state.index)]));
      }
      residual = std::max(residual, std::abs(acc - v[s]));
      v[s] = acc;  // Gauss-Seidel sweep
    }
    if (residual < tol) return result;
  }
  throw std::runtime_error("policy_evaluation: failed to converge");
}

McEstimate mc_value_estimate(const MdpSpec& spec, const Policy& policy, int n_episodes,
                             std::uint64_t seed) {
  if (n_episodes < 2) throw std::invalid_argument("mc_value_estimate: need n_episodes >= 2");
  const auto trajectories = rollout(spec, policy, n_episodes, seed);
  std::vector<double> returns;
  returns.reserve(trajectories.size());
  for (const auto& traj : trajectories) {
    double g = 0.0;
    double disc = 1.0;
    for (const auto& t : traj.transitions) {
      g += disc * t.true_reward;
      disc *= spec.discount();
    }
    returns.push_back(g);
  }
  McEstimate est;
  est.n = n_episodes;
  for (double g : returns) est.mean += g;
  est.mean /= static_cast<double>(returns.size());
  double ss = 0.0;
  for (double g : returns) ss += (g - est.mean) * (g - est.mean);
  const double var = ss / static_cast<double>(returns.size() - 1);
  est.se = std::sqrt(var / static_cast<double>(returns.size()));
  return est;
}

RewardProvider reward_from_head(const RewardHead& head, const MdpSpec& spec) {
  // Views live objects; callers keep head/spec alive for the provider's life.
  return [&head, &spec](const State& s, const Action& a, const State&, bool) {
    return reward_mean(head, spec.sa_features(s, a));
  };
}

ActorCriticLearner::ActorCriticLearner(const MdpSpec& spec, double gamma, double lr_actor,
                                       double lr_critic, double entropy_coef, std::uint64_t seed,
                                       const std::vector<int>& hidden)
    : spec_(&spec),
      gamma_(gamma),
      lr_actor_(lr_actor),
      lr_critic_(lr_critic),
      entropy_coef_(entropy_coef) {
  Rng rng(mix_seed(seed, 0xAC));
  policy_ = PolicyModel::for_spec(spec, rng, hidden);
  critic_ = ValueFn::zeros(spec, rng, hidden);
  if (!policy_.tabular) {
    actor_opt_ = AdamState::init(policy_.actor, lr_actor);
    critic_opt_ = AdamState::init(critic_.net, lr_critic);
  }
}

void ActorCriticLearner::update(std::span<const StrippedTransition> batch,
                                const RewardProvider& reward) {
  if (batch.empty()) throw std::invalid_argument("actor_critic_update: empty batch");
  const double n = static_cast<double>(batch.size());

  // TD targets against the pre-update critic.
  std::vector<double> rewards(batch.size());
  std::vector<double> targets(batch.size());
  std::vector<double> advantages(batch.size());
  for (std::size_t k = 0; k < batch.size(); ++k) {
    const auto& t = batch[k];
    rewards[k] = reward(t.state, t.action, t.next_state, t.done);
    if (!std::isfinite(rewards[k]))
      throw std::runtime_error("actor_critic_update: non-finite reward from provider");
    const bool boot = bootstrap_on_done_ || !t.done;
    const double v_next = boot ? critic_.value(*spec_, t.next_state) : 0.0;
    targets[k] = rewards[k] + gamma_ * v_next;
    advantages[k] = targets[k] - critic_.value(*spec_, t.state);
  }

  if (policy_.tabular) {
    std::vector<double> dv(critic_.table.size(), 0.0);
    std::vector<std::vector<double>> dlogits(policy_.logits.size(),
                                             std::vector<double>(policy_.logits[0].size(), 0.0));
    for (std::size_t k = 0; k < batch.size(); ++k) {
      const auto& t = batch[k];
      const auto s = static_cast<std::size_t>(t.state.index);
      dv[s] += advantages[k];
      const auto probs = policy_.action_probs(*spec_, t.state);
      double entropy = 0.0;
      for (double p : probs) entropy -= p * std::log(p + 1e-12);
      for (std::size_t a = 0; a < probs.size(); ++a) {
        double g = -probs[a] * advantages[k];
        if (static_cast<int>(a) == t.action.index) g += advantages[k];
        g += entropy_coef_ * (-probs[a] * (std::log(probs[a] + 1e-12) + entropy));
        dlogits[s][a] += g;
      }
    }
    for (std::size_t s = 0; s < dv.size(); ++s) critic_.table[s] += lr_critic_ * dv[s] / n;
    for (std::size_t s = 0; s < dlogits.size(); ++s)
      for (std::size_t a = 0; a < dlogits[s].size(); ++a)
        policy_.logits[s][a] += lr_actor_ * dlogits[s][a] / n;
    return;
  }

  // Network case: Gaussian actor, value-net critic, Adam on both.
  GradientBundle critic_grad = GradientBundle::zeros_like(critic_.net);
  GradientBundle actor_grad = GradientBundle::zeros_like(policy_.actor);
  for (std::size_t k = 0; k < batch.size(); ++k) {
    const auto& t = batch[k];
    const Vec sfeat = spec_->state_features(t.state);

    const ForwardTrace ctrace = forward_traced(critic_.net, sfeat);
    Vec cup(1, (ctrace.output[0] - targets[k]) / n);  // d/dv of 0.5 * (v - target)^2
    backward(critic_.net, ctrace, cup, critic_grad);

    const ForwardTrace atrace = forward_traced(policy_.actor, sfeat);
    const std::size_t d = atrace.output.size() / 2;
    Vec up(atrace.output.size(), 0.0);
    for (std::size_t i = 0; i < d; ++i) {
      const double raw_ls = atrace.output[d + i];
      const double ls = std::clamp(raw_ls, kLogStdMin, kLogStdMax);
      const double sd = std::exp(ls);
      const double z = (t.action.vec[i] - atrace.output[i]) / sd;
      // Descend the negative of advantage-weighted log-likelihood + entropy.
      up[i] = -(advantages[k] * z / sd) / n;
      double dls = advantages[k] * (z * z - 1.0) + entropy_coef_;
      if (raw_ls < kLogStdMin || raw_ls > kLogStdMax) dls = 0.0;  // clamped: flat
      up[d + i] = -dls / n;
    }
    backward(policy_.actor, atrace, up, actor_grad);
  }
  adam_step(critic_.net, critic_grad, critic_opt_);
  adam_step(policy_.actor, actor_grad, actor_opt_);
}

void actor_critic_update(ActorCriticLearner& learner, std::span<const StrippedTransition> batch,
                         const RewardProvider& reward) {
  learner.update(batch, reward);
}

namespace {

double mean_undiscounted_return(const MdpSpec& spec, const Policy& policy, int n_episodes,
                                std::uint64_t seed) {
  const auto trajectories = rollout(spec, policy, n_episodes, seed);
  double acc = 0.0;
  for (const auto& traj : trajectories) {
    double g = 0.0;
    for (const auto& t : traj.transitions) g += t.true_reward;
    acc += g;
  }
  return acc / static_cast<double>(trajectories.size());
}

}  // namespace

PolicyModel train_true_reward_expert(const MdpSpec& spec, std::uint64_t seed,
                                     const ExpertTrainOptions& opts) {
  ActorCriticLearner learner(spec, spec.discount(), opts.lr_actor, opts.lr_critic,
                             opts.entropy_coef, seed);
  RolloutBuffer buffer(100000);
  Rng rng(mix_seed(seed, 0xEF));
  const RewardProvider true_reward = [&spec](const State& s, const Action& a, const State& next,
                                             bool) { return spec.true_reward(s, a, next); };

  PolicyModel best = learner.policy();
  double best_return = -std::numeric_limits<double>::infinity();
  int evals_since_best = 0;

  for (int it = 1; it <= opts.max_iterations; ++it) {
    const auto trajectories =
        rollout(spec, learner.policy(), opts.episodes_per_iter, mix_seed(seed, 7000 + it));
    for (const auto& traj : trajectories) buffer.push(traj);
    const auto batch = buffer.sample(opts.batch_size, rng);
    learner.update(batch, true_reward);

    if (it % opts.eval_every == 0) {
      const double ret = mean_undiscounted_return(spec, learner.policy(), opts.eval_episodes,
                                                  mix_seed(seed, 9000 + it));
      if (ret > best_return + 1e-6) {
        best_return = ret;
        best = learner.policy();
        evals_since_best = 0;
      } else if (++evals_since_best >= opts.patience) {
        break;
      }
    }
  }
  return best;
}

}  // namespace vlbirl
