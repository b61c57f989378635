#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <ostream>
#include <span>
#include <vector>

#include "psnn/decoding.hpp"
#include "psnn/model.hpp"
#include "psnn/parallel.hpp"
#include "psnn/random.hpp"

namespace psnn {

struct TrainConfig {
  Rule rule = Rule::rate;
  ModelDims dims;
  BasisConfig basis;
  double learning_rate = 1e-3;
  std::vector<double> lr_candidates;  // model selection on holdout; empty means {learning_rate}
  int max_epochs = 200;
  double holdout_fraction = 0.2;
  int patience = 10;
  double init_range = 1.0;
  std::uint64_t seed = 0;
  int workers = 1;
};

struct EpochRecord {
  int epoch = 0;
  double train_nll = 0.0;  // mean NLL over the epoch, measured before each update
  double validation_accuracy = 0.0;
  double learning_rate = 0.0;
  double wall_seconds = 0.0;
};

struct TrainingLog {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  double best_validation_accuracy = 0.0;
  double learning_rate = 0.0;
};

struct TrainResult {
  ModelParams params;
  TrainingLog log;
};

// Period-4 pattern 0001 0001 ... truncated to the horizon.
inline std::vector<std::uint8_t> make_desired_pattern(int horizon) {
  require(horizon >= 1, "make_desired_pattern: horizon must be positive");
  std::vector<std::uint8_t> p(static_cast<std::size_t>(horizon), 0);
  for (int t = 3; t < horizon; t += 4) p[t] = 1;
  return p;
}

inline DesiredOutputs make_desired_outputs(int horizon) { return {make_desired_pattern(horizon)}; }

inline ModelParams init_params(const ModelDims& dims, const BasisConfig& basis, double init_range,
                               std::uint64_t seed) {
  require(init_range >= 0.0, "init_params: init_range must be nonnegative");
  ModelParams params(dims, basis);
  Rng rng = make_stream(seed, {0x1417});
  const auto n = params.weights.size();
  for (std::size_t k = 0; k < n; ++k) params.weights.flat(k) = init_range * (2.0 * uniform01(rng) - 1.0);
  return params;
}

inline double evaluate_accuracy(const ModelParams& params, std::span<const LabeledExample> dataset,
                                const DecoderConfig& cfg, int workers = 1) {
  require(!dataset.empty(), "evaluate_accuracy: dataset is empty");
  std::vector<std::uint8_t> correct(dataset.size(), 0);
  parallel_for(dataset.size(), workers, [&](std::size_t n) {
    correct[n] = decode(params, dataset[n].input, cfg) == dataset[n].label;
  });
  std::size_t hits = 0;
  for (auto c : correct) hits += c;
  return static_cast<double>(hits) / static_cast<double>(dataset.size());
}

struct HoldoutSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

// Seeded split. With too few examples for a holdout, validation reuses the
// training indices.
inline HoldoutSplit split_holdout(std::size_t n, double fraction, std::uint64_t seed) {
  require(fraction > 0.0 && fraction < 1.0, "holdout_fraction must lie in (0, 1)");
  std::vector<std::size_t> order(n);
  for (std::size_t k = 0; k < n; ++k) order[k] = k;
  Rng rng = make_stream(seed, {0x5eed5});
  shuffle(order.begin(), order.end(), rng);
  auto n_val = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  if (n_val >= n) n_val = n - 1;
  HoldoutSplit split;
  split.validation.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  split.train.assign(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  if (split.validation.empty()) split.validation = split.train;
  return split;
}

// Replaces the training input before each update (adversarial training);
// the ML trainer passes none.
using InputTransform = std::function<SpikeTrain(const ModelParams&, const SpikeTrain&, int label)>;

namespace detail {

inline void check_train_config(const TrainConfig& cfg) {
  require(cfg.learning_rate >= 0.0, "train: learning rate must be nonnegative");
  for (double lr : cfg.lr_candidates) require(lr >= 0.0, "train: learning rates must be nonnegative");
  require(cfg.max_epochs >= 1, "train: max_epochs must be >= 1");
  require(cfg.patience >= 1, "train: patience must be >= 1");
  require(cfg.holdout_fraction > 0.0 && cfg.holdout_fraction < 1.0, "train: holdout_fraction must lie in (0, 1)");
}

inline TrainResult sgd_single_rate(std::span<const LabeledExample> dataset, const TrainConfig& cfg, double eta,
                                   const HoldoutSplit& split, const InputTransform& transform) {
  const DesiredOutputs desired = make_desired_outputs(cfg.dims.horizon);
  ModelParams params = init_params(cfg.dims, cfg.basis, cfg.init_range, cfg.seed);
  ModelParams best = params;
  TrainingLog log;
  log.learning_rate = eta;
  double best_acc = -1.0;
  int since_best = 0;

  std::vector<LabeledExample> validation;
  validation.reserve(split.validation.size());
  for (auto k : split.validation) validation.push_back(dataset[k]);
  const DecoderConfig decoder{cfg.rule, DecodeMode::score, 1, cfg.seed};

  std::vector<std::size_t> order = split.train;
  ParamSet grad;
  const auto start = std::chrono::steady_clock::now();
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    Rng rng = make_stream(cfg.seed, {0xe90c, static_cast<std::uint64_t>(epoch)});
    shuffle(order.begin(), order.end(), rng);
    double nll = 0.0;
    for (auto k : order) {
      const LabeledExample& ex = dataset[k];
      const Eigen::MatrixXd features =
          transform ? synaptic_features(params.basis, transform(params, ex.input, ex.label))
                    : synaptic_features(params.basis, ex.input);
      nll -= log_likelihood_with_grad(cfg.rule, params, features, ex.label, desired, &grad);
      params.weights.add_scaled(eta, grad);
    }
    const double acc = evaluate_accuracy(params, validation, decoder, cfg.workers);
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    log.epochs.push_back({epoch, nll / static_cast<double>(order.size()), acc, eta, elapsed});
    if (acc > best_acc) {
      best_acc = acc;
      best = params;
      log.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
    if (!params.weights.all_finite()) break;
  }
  log.best_validation_accuracy = best_acc;
  return {std::move(best), std::move(log)};
}

inline TrainResult run_sgd(std::span<const LabeledExample> dataset, const TrainConfig& cfg,
                           const InputTransform& transform) {
  require(!dataset.empty(), "train: dataset is empty");
  check_train_config(cfg);
  for (const auto& ex : dataset) {
    require(ex.label >= 0 && ex.label < cfg.dims.num_outputs, "train: label out of range");
    require_shape(ex.input.num_neurons() == cfg.dims.num_inputs && ex.input.horizon() == cfg.dims.horizon,
                  "train: example raster shape does not match model dimensions");
  }
  const HoldoutSplit split = split_holdout(dataset.size(), cfg.holdout_fraction, cfg.seed);
  std::vector<double> rates = cfg.lr_candidates;
  if (rates.empty()) rates.push_back(cfg.learning_rate);
  TrainResult best;
  bool have = false;
  for (double eta : rates) {
    TrainResult r = sgd_single_rate(dataset, cfg, eta, split, transform);
    if (!have || r.log.best_validation_accuracy > best.log.best_validation_accuracy) {
      best = std::move(r);
      have = true;
    }
  }
  return best;
}

}  // namespace detail

// Per-example SGD ascent on the log-likelihood of the configured decoding rule
// with holdout early stopping. Returns the best-validation parameters.
inline TrainResult train_ml(std::span<const LabeledExample> dataset, const TrainConfig& cfg) {
  return detail::run_sgd(dataset, cfg, nullptr);
}

// Full-batch gradient ascent on the rate log-likelihood. Returns the dataset
// NLL before every iteration and after the last one.
inline std::vector<double> full_batch_ascent(ModelParams& params, std::span<const LabeledExample> dataset,
                                             double eta, int iterations) {
  const DesiredOutputs desired = make_desired_outputs(params.dims.horizon);
  std::vector<Eigen::MatrixXd> features;
  features.reserve(dataset.size());
  for (const auto& ex : dataset) features.push_back(synaptic_features(params.basis, ex.input));
  std::vector<double> nll;
  ParamSet total;
  ParamSet grad;
  for (int it = 0; it <= iterations; ++it) {
    total = params.zero_like();
    double value = 0.0;
    for (std::size_t n = 0; n < dataset.size(); ++n) {
      value += rate_objective(params, features[n], desired.for_class(dataset[n].label, params.dims.num_outputs),
                              &grad);
      total += grad;
    }
    nll.push_back(-value);
    if (it < iterations) params.weights.add_scaled(eta, total);
  }
  return nll;
}

// Columns: epoch, train_nll, validation_accuracy, learning_rate, wall_seconds.
inline void write_training_log_csv(std::ostream& os, const TrainingLog& log) {
  os << "epoch,train_nll,validation_accuracy,learning_rate,wall_seconds\n";
  os << std::setprecision(10);
  for (const auto& e : log.epochs)
    os << e.epoch << ',' << e.train_nll << ',' << e.validation_accuracy << ',' << e.learning_rate << ','
       << e.wall_seconds << '\n';
}

}  // namespace psnn
