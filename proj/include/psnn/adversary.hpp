#pragma once

#include <cmath>
#include <cstdint>
#include <iomanip>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "psnn/model.hpp"
#include "psnn/random.hpp"
#include "psnn/training.hpp"

namespace psnn {

enum class AttackKind { add, remove, flip, random_add, random_remove, random_flip };

inline std::string_view to_string(AttackKind k) {
  switch (k) {
    case AttackKind::add: return "add";
    case AttackKind::remove: return "remove";
    case AttackKind::flip: return "flip";
    case AttackKind::random_add: return "random_add";
    case AttackKind::random_remove: return "random_remove";
    case AttackKind::random_flip: return "random_flip";
  }
  return "?";
}

inline AttackKind parse_attack_kind(std::string_view s) {
  for (auto k : {AttackKind::add, AttackKind::remove, AttackKind::flip, AttackKind::random_add,
                 AttackKind::random_remove, AttackKind::random_flip})
    if (to_string(k) == s) return k;
  throw ConfigError("unknown attack kind '" + std::string(s) + "'");
}

inline bool is_random(AttackKind k) {
  return k == AttackKind::random_add || k == AttackKind::random_remove || k == AttackKind::random_flip;
}

struct AttackSpec {
  AttackKind kind = AttackKind::flip;
  double epsilon = 0.0;   // fraction of the N_X * T input samples
  int time_support = 0;   // T_A; 0 selects the full horizon
  std::uint64_t seed = 0; // random baselines only
};

inline int resolved_time_support(const AttackSpec& spec, int horizon) {
  const int ta = spec.time_support == 0 ? horizon : spec.time_support;
  require(ta >= 1 && ta <= horizon, "attack: time support must lie in [1, T]");
  return ta;
}

// floor(eps * N_X * T). The small slack keeps k / (N_X T) grids exact.
inline int attack_budget(const AttackSpec& spec, int num_inputs, int horizon) {
  require(spec.epsilon >= 0.0 && spec.epsilon <= 1.0, "attack: epsilon must lie in [0, 1]");
  return static_cast<int>(std::floor(spec.epsilon * num_inputs * horizon + 1e-9));
}

// Legal single-entry change for a kind: add only turns 0 into 1, remove only
// turns 1 into 0, flip does either.
inline bool change_allowed(AttackKind kind, std::uint8_t current) {
  switch (kind) {
    case AttackKind::add:
    case AttackKind::random_add: return current == 0;
    case AttackKind::remove:
    case AttackKind::random_remove: return current == 1;
    default: return true;
  }
}

// Incorrect class with the smallest log-likelihood; ties to the lowest index.
inline int least_likely_class(const ModelParams& params, const SpikeTrain& x, int c, Rule rule) {
  require(params.dims.num_outputs >= 2, "least_likely_class: need at least two classes");
  check_class(params, c);
  check_input(params, x);
  const DesiredOutputs desired = make_desired_outputs(params.dims.horizon);
  const Eigen::MatrixXd f = synaptic_features(params.basis, x);
  int best = -1;
  double best_value = 0.0;
  for (int k = 0; k < params.dims.num_outputs; ++k) {
    if (k == c) continue;
    const double v = log_likelihood_with_grad(rule, params, f, k, desired, nullptr);
    if (best < 0 || v < best_value) {
      best = k;
      best_value = v;
    }
  }
  return best;
}

// Holds the potentials of the current raster for one target class so that the
// likelihood after a single-entry change costs O(N_Y * span) instead of a full
// re-evaluation. A change at sample t only moves u_{i,t'} for t' in (t, t + span].
class AttackCache {
 public:
  AttackCache(const ModelParams& params, Rule rule, int target, int time_support, SpikeTrain x)
      : params_(&params), rule_(rule), target_(target), time_support_(time_support), x_(std::move(x)) {
    check_input(params, x_);
    check_class(params, target);
    require(time_support >= 1 && time_support <= params.dims.horizon, "AttackCache: time support out of range");
    const int ny = params.dims.num_outputs;
    const int nx = params.dims.num_inputs;
    const int span = params.basis.synaptic_span();
    lagged_kernel_.resize(static_cast<std::size_t>(nx) * ny * span);
    for (int j = 0; j < nx; ++j)
      for (int i = 0; i < ny; ++i) {
        const Eigen::VectorXd alpha = params.synaptic_kernel(j, i);
        for (int lag = 1; lag <= span; ++lag) lagged_kernel_[kernel_index(j, i, lag)] = alpha(span - lag);
      }
    if (rule == Rule::rate) {
      target_y_ = make_desired_outputs(params.dims.horizon).for_class(target, ny);
      feedback_u_ = Eigen::MatrixXd::Zero(ny, params.dims.horizon);
      for (int i = 0; i < ny; ++i)
        feedback_u_.row(i) = params.weights.feedback.row(i) *
                             feedback_features(params.basis, target_y_.row(i), params.dims.horizon);
    }
    refresh();
  }

  const SpikeTrain& input() const { return x_; }
  int target() const { return target_; }
  int time_support() const { return time_support_; }
  Rule rule() const { return rule_; }
  double value() const { return value_; }

  bool matches(const ModelParams& params, const SpikeTrain& x) const { return &params == params_ && x == x_; }

  // Target log-likelihood after toggling entry (j, t). No validation.
  double candidate_value(int j, int t) const {
    const int ny = params_->dims.num_outputs;
    const int horizon = params_->dims.horizon;
    const int span = params_->basis.synaptic_span();
    const double sign = x_(j, t) ? -1.0 : 1.0;
    const int last = std::min(span, horizon - 1 - t);
    if (last <= 0) return value_;
    if (rule_ == Rule::rate) {
      double delta = 0.0;
      for (int lag = 1; lag <= last; ++lag) {
        const int ts = t + lag;
        for (int i = 0; i < ny; ++i) {
          const double u = u_(i, ts) + sign * lagged_kernel_[kernel_index(j, i, lag)];
          delta += bernoulli_log_prob(u, target_y_(i, ts) != 0) - terms_(i, ts);
        }
      }
      return value_ + delta;
    }
    // first-to-spike: rebuild the per-t log-probabilities with the moved columns
    thread_local std::vector<double> log_pt;
    log_pt.assign(static_cast<std::size_t>(horizon), 0.0);
    double others = 0.0;
    double own = 0.0;
    for (int ts = 0; ts < horizon; ++ts) {
      const bool moved = ts > t && ts <= t + last;
      double own_spike = 0.0;
      double own_silent = 0.0;
      for (int i = 0; i < ny; ++i) {
        double silent;
        if (moved) {
          const double u = u_(i, ts) + sign * lagged_kernel_[kernel_index(j, i, ts - t)];
          silent = log_one_minus_sigmoid(u);
          if (i == target_) own_spike = log_sigmoid(u);
        } else {
          silent = terms_(i, ts);
          if (i == target_) own_spike = spike_terms_(ts);
        }
        if (i == target_)
          own_silent = silent;
        else
          others += silent;
      }
      log_pt[ts] = others + own + own_spike;
      own += own_silent;
    }
    return log_sum_exp(log_pt);
  }

  void commit(int j, int t) {
    x_ = x_.flipped(j, t);
    refresh();
  }

 private:
  std::size_t kernel_index(int j, int i, int lag) const {
    return (static_cast<std::size_t>(j) * params_->dims.num_outputs + i) * params_->basis.synaptic_span() +
           static_cast<std::size_t>(lag - 1);
  }

  void refresh() {
    const Eigen::MatrixXd f = synaptic_features(params_->basis, x_);
    u_ = feedforward_potentials(*params_, f);
    const auto ny = u_.rows();
    const auto horizon = u_.cols();
    terms_.resize(ny, horizon);
    if (rule_ == Rule::rate) {
      u_ += feedback_u_;
      value_ = 0.0;
      for (Eigen::Index t = 0; t < horizon; ++t)
        for (Eigen::Index i = 0; i < ny; ++i) {
          terms_(i, t) = bernoulli_log_prob(u_(i, t), target_y_(static_cast<int>(i), static_cast<int>(t)) != 0);
          value_ += terms_(i, t);
        }
    } else {
      spike_terms_.resize(horizon);
      for (Eigen::Index t = 0; t < horizon; ++t) {
        for (Eigen::Index i = 0; i < ny; ++i) terms_(i, t) = log_one_minus_sigmoid(u_(i, t));
        spike_terms_(t) = log_sigmoid(u_(target_, t));
      }
      value_ = fts_objective_from_potentials(u_, target_, nullptr);
    }
  }

  const ModelParams* params_;
  Rule rule_;
  int target_;
  int time_support_;
  SpikeTrain x_;
  SpikeTrain target_y_;
  Eigen::MatrixXd feedback_u_;
  Eigen::MatrixXd u_;
  Eigen::MatrixXd terms_;       // rate: per-entry log-prob; fts: log(1 - g)
  Eigen::VectorXd spike_terms_; // fts: log g of the target neuron
  std::vector<double> lagged_kernel_;
  double value_ = 0.0;
};

// Target log-likelihood after toggling (j, t) of x_current, from the cache.
inline double greedy_step_incremental(const ModelParams& params, const SpikeTrain& x_current, int j, int t,
                                      Rule rule, const AttackCache& cache) {
  if (!cache.matches(params, x_current) || cache.rule() != rule)
    throw Error("greedy_step_incremental: stale cache");
  require(j >= 0 && j < params.dims.num_inputs, "greedy_step_incremental: neuron index out of range");
  require(t >= 0 && t < cache.time_support(), "greedy_step_incremental: candidate outside the attack time support");
  return cache.candidate_value(j, t);
}

struct AttackStep {
  int step = 0;
  int neuron = 0;  // 0-based
  int time = 0;    // 0-based
  int direction = 0;  // +1 spike added, -1 spike removed
  double target_log_likelihood = 0.0;
};

struct AttackResult {
  SpikeTrain adversarial;
  int target = 0;
  double initial_log_likelihood = 0.0;
  std::vector<AttackStep> trace;
};

// Greedy budgeted attack: at each step apply the single legal change with t < T_A
// that most increases the likelihood of the least-likely class, stopping early
// when no change improves on leaving the raster as it is.
inline AttackResult greedy_attack(const ModelParams& params, const SpikeTrain& x, int c, const AttackSpec& spec,
                                  Rule rule) {
  require(!is_random(spec.kind), "greedy_attack: kind must be add, remove or flip");
  check_input(params, x);
  const int horizon = params.dims.horizon;
  const int ta = resolved_time_support(spec, horizon);
  const int budget = attack_budget(spec, params.dims.num_inputs, horizon);
  AttackResult out;
  out.target = least_likely_class(params, x, c, rule);
  AttackCache cache(params, rule, out.target, ta, x);
  out.initial_log_likelihood = cache.value();
  for (int step = 1; step <= budget; ++step) {
    double best_value = cache.value();
    int best_j = -1;
    int best_t = -1;
    const SpikeTrain& cur = cache.input();
    for (int j = 0; j < params.dims.num_inputs; ++j)
      for (int t = 0; t < ta; ++t) {
        if (!change_allowed(spec.kind, cur(j, t))) continue;
        const double v = cache.candidate_value(j, t);
        if (v > best_value) {
          best_value = v;
          best_j = j;
          best_t = t;
        }
      }
    if (best_j < 0) break;
    const int direction = cur(best_j, best_t) ? -1 : 1;
    cache.commit(best_j, best_t);
    out.trace.push_back({step, best_j, best_t, direction, cache.value()});
  }
  out.adversarial = cache.input();
  return out;
}

// Uniform choice of min(budget, #legal) distinct legal positions with t < T_A.
inline SpikeTrain random_perturb(const SpikeTrain& x, const AttackSpec& spec, Rng& rng) {
  require(is_random(spec.kind), "random_perturb: kind must be random_add, random_remove or random_flip");
  const int ta = resolved_time_support(spec, x.horizon());
  const int budget = attack_budget(spec, x.num_neurons(), x.horizon());
  std::vector<std::pair<int, int>> legal;
  for (int j = 0; j < x.num_neurons(); ++j)
    for (int t = 0; t < ta; ++t)
      if (change_allowed(spec.kind, x(j, t))) legal.emplace_back(j, t);
  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(budget), legal.size());
  Perturbation p(x.num_neurons(), x.horizon());
  for (std::size_t n = 0; n < k; ++n) {
    const auto pick = n + uniform_index(rng, legal.size() - n);
    std::swap(legal[n], legal[pick]);
    const auto [j, t] = legal[n];
    p(j, t) = x(j, t) ? -1 : 1;
  }
  return apply_perturbation(x, p);
}

// Applies the first `steps` changes of a greedy trace to x.
inline SpikeTrain replay_trace(const SpikeTrain& x, const std::vector<AttackStep>& trace, std::size_t steps) {
  SpikeTrain out = x;
  for (std::size_t n = 0; n < std::min(steps, trace.size()); ++n) out = out.flipped(trace[n].neuron, trace[n].time);
  return out;
}

// Columns: step, neuron, time, direction, target_log_likelihood. Indices are
// 1-based; step 0 is the clean input.
inline void write_attack_trace_csv(std::ostream& os, const AttackResult& r) {
  os << "step,neuron,time,direction,target_log_likelihood\n";
  os << std::setprecision(17);
  os << "0,,,none," << r.initial_log_likelihood << '\n';
  for (const auto& s : r.trace)
    os << s.step << ',' << s.neuron + 1 << ',' << s.time + 1 << ',' << (s.direction > 0 ? "add" : "remove") << ','
       << s.target_log_likelihood << '\n';
}

}  // namespace psnn
