#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vlbirl/env.hpp"
#include "vlbirl/policy.hpp"
#include "vlbirl/trainer.hpp"

namespace vlbirl {

enum class BaselineKind { BehaviorCloning, JsImitator };

std::string baseline_name(BaselineKind kind);
BaselineKind baseline_by_name(const std::string& name);

/// Supervised imitation: maximize expert action log-likelihood with a 90/10
/// holdout split and early stopping (patience 10 epochs on holdout loss).
/// Returns the parameters that scored best on the holdout.
PolicyModel behavior_cloning(const MdpSpec& spec, const std::vector<StrippedTrajectory>& expert,
                             const std::vector<int>& policy_hidden, int epochs, double lr,
                             std::uint64_t seed);

struct JsImitatorResult {
  PolicyModel policy;
  TrainReport report;
  Classifier discriminator;
};

/// GAIL-style imitation: same loop shape as the IRL trainer, but the policy
/// reward is -ln(1 - D(s,a)) from a discriminator trained exactly like the
/// classifier. No reward head, no KL objective.
JsImitatorResult js_imitator_train(const MdpSpec& spec,
                                   const std::vector<StrippedTrajectory>& expert,
                                   const TrainConfig& cfg);

}  // namespace vlbirl
