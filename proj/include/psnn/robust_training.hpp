#pragma once

#include <span>

#include "psnn/adversary.hpp"
#include "psnn/training.hpp"

namespace psnn {

struct RobustConfig {
  TrainConfig train;
  AttackSpec attack{AttackKind::flip, 0.0, 0, 0};
};

// Adversarial training: every training example is replaced by the greedy
// adversarial example built against the current parameters, and the update
// ascends the likelihood of the true label at that example. Epochs, holdout
// and early stopping are shared with train_ml.
inline TrainResult adversarial_train(std::span<const LabeledExample> dataset, const RobustConfig& cfg) {
  require(!is_random(cfg.attack.kind), "adversarial_train: inner attack must be add, remove or flip");
  require(cfg.attack.epsilon >= 0.0, "adversarial_train: epsilon must be nonnegative");
  resolved_time_support(cfg.attack, cfg.train.dims.horizon);
  const Rule rule = cfg.train.rule;
  const AttackSpec spec = cfg.attack;
  InputTransform transform = [rule, spec](const ModelParams& params, const SpikeTrain& x, int label) {
    return greedy_attack(params, x, label, spec, rule).adversarial;
  };
  return detail::run_sgd(dataset, cfg.train, transform);
}

}  // namespace psnn
