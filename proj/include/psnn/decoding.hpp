#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "psnn/model.hpp"
#include "psnn/random.hpp"

namespace psnn {

enum class DecodeMode { sampled, score };

struct DecoderConfig {
  Rule rule = Rule::rate;
  DecodeMode mode = DecodeMode::score;
  int num_samples = 1;
  std::uint64_t seed = 0;
};

namespace detail {

// First index of the maximum; ties go to the lowest index.
template <typename Vec>
int argmax_lowest(const Vec& v) {
  int best = 0;
  for (int k = 1; k < static_cast<int>(v.size()); ++k)
    if (v[k] > v[best]) best = k;
  return best;
}

inline void check_decoder(const DecoderConfig& cfg) {
  require(cfg.num_samples >= 1, "decoder: num_samples must be >= 1");
}

}  // namespace detail

// Neuron with the earliest spike in an output raster; ties at the same sample
// go to the lowest index. Empty when no neuron spikes.
inline std::optional<int> first_spike_winner(const SpikeTrain& y) {
  for (int t = 0; t < y.horizon(); ++t)
    for (int i = 0; i < y.num_neurons(); ++i)
      if (y(i, t)) return i;
  return std::nullopt;
}

// Expected spike counts with feedback zeroed: sum_t g(u_{i,t}).
inline std::vector<double> expected_counts(const ModelParams& params, const Eigen::MatrixXd& features) {
  const Eigen::MatrixXd u = feedforward_potentials(params, features);
  std::vector<double> counts(static_cast<std::size_t>(params.dims.num_outputs), 0.0);
  for (Eigen::Index t = 0; t < u.cols(); ++t)
    for (Eigen::Index i = 0; i < u.rows(); ++i) counts[i] += sigmoid(u(i, t));
  return counts;
}

inline int decode_rate_features(const ModelParams& params, const Eigen::MatrixXd& features) {
  return detail::argmax_lowest(expected_counts(params, features));
}

inline int decode_fts_features(const ModelParams& params, const Eigen::MatrixXd& features) {
  const Eigen::MatrixXd u = feedforward_potentials(params, features);
  std::vector<double> scores(static_cast<std::size_t>(params.dims.num_outputs));
  for (int c = 0; c < params.dims.num_outputs; ++c) scores[c] = fts_objective_from_potentials(u, c, nullptr);
  return detail::argmax_lowest(scores);
}

inline int decode_rate(const ModelParams& params, const SpikeTrain& x, const DecoderConfig& cfg) {
  require(cfg.rule == Rule::rate, "decode_rate: decoder rule is not rate");
  detail::check_decoder(cfg);
  check_input(params, x);
  if (cfg.mode == DecodeMode::score) return decode_rate_features(params, synaptic_features(params.basis, x));
  Rng rng(mix64(cfg.seed));
  std::vector<long> counts(static_cast<std::size_t>(params.dims.num_outputs), 0);
  for (int m = 0; m < cfg.num_samples; ++m) {
    const SpikeTrain y = sample_outputs(params, x, rng);
    for (int i = 0; i < y.num_neurons(); ++i)
      for (auto b : y.row(i)) counts[i] += b;
  }
  return detail::argmax_lowest(counts);
}

struct FirstSpikeDecision {
  int label = 0;
  int silent_draws = 0;  // draws where no output neuron spiked
};

inline FirstSpikeDecision decode_first_to_spike_detailed(const ModelParams& params, const SpikeTrain& x,
                                                         const DecoderConfig& cfg) {
  require(cfg.rule == Rule::first_to_spike, "decode_first_to_spike: decoder rule is not first_to_spike");
  detail::check_decoder(cfg);
  check_input(params, x);
  if (cfg.mode == DecodeMode::score) return {decode_fts_features(params, synaptic_features(params.basis, x)), 0};
  Rng rng(mix64(cfg.seed));
  std::vector<long> votes(static_cast<std::size_t>(params.dims.num_outputs), 0);
  FirstSpikeDecision out;
  for (int m = 0; m < cfg.num_samples; ++m) {
    const auto winner = first_spike_winner(sample_outputs(params, x, rng));
    if (!winner) ++out.silent_draws;
    ++votes[winner.value_or(0)];
  }
  out.label = detail::argmax_lowest(votes);
  return out;
}

inline int decode_first_to_spike(const ModelParams& params, const SpikeTrain& x, const DecoderConfig& cfg) {
  return decode_first_to_spike_detailed(params, x, cfg).label;
}

inline int decode(const ModelParams& params, const SpikeTrain& x, const DecoderConfig& cfg) {
  return cfg.rule == Rule::rate ? decode_rate(params, x, cfg) : decode_first_to_spike(params, x, cfg);
}

}  // namespace psnn
