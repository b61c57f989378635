#pragma once

#include <cfenv>
#include <cmath>
#include <cstdint>
#include <vector>

#include "psnn/error.hpp"
#include "psnn/random.hpp"
#include "psnn/spike_train.hpp"

namespace psnn {

enum class EncodingScheme { rate, time };

struct EncoderConfig {
  EncodingScheme scheme = EncodingScheme::rate;
  int horizon = 16;
  double rate_scale = 0.5;
  std::uint64_t seed = 0;
};

inline void check_intensities(const PixelImage& img) {
  for (double v : img.intensities)
    require(v >= 0.0 && v <= 1.0, "encoder: pixel intensities must lie in [0, 1]");
}

// Each row is T i.i.d. Bernoulli(rate_scale * intensity) draws. The stream for
// row j depends only on (seed, example_id, j).
inline SpikeTrain encode_rate(const PixelImage& img, const EncoderConfig& cfg,
                              std::uint64_t example_id) {
  require(cfg.scheme == EncodingScheme::rate, "encode_rate: config is not a rate scheme");
  require(cfg.horizon > 0, "encode_rate: horizon must be positive");
  require(cfg.rate_scale > 0.0 && cfg.rate_scale <= 1.0, "encode_rate: rate_scale must be in (0, 1]");
  check_intensities(img);
  const int n = static_cast<int>(img.intensities.size());
  const int horizon = cfg.horizon;
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(n) * horizon, 0);
  for (int j = 0; j < n; ++j) {
    const double p = cfg.rate_scale * img.intensities[j];
    if (p <= 0.0) continue;
    auto rng = make_stream(cfg.seed, {example_id, static_cast<std::uint64_t>(j)});
    for (int t = 0; t < horizon; ++t)
      bits[static_cast<std::size_t>(j) * horizon + t] = bernoulli(rng, p) ? 1 : 0;
  }
  return SpikeTrain(n, horizon, std::move(bits));
}

// 1-based latency sample for intensity v: round(1 + (1 - v)(T - 1)), ties to even.
inline int latency_sample(double v, int horizon) {
  const int saved = std::fegetround();
  std::fesetround(FE_TONEAREST);
  const double t = std::nearbyint(1.0 + (1.0 - v) * (horizon - 1));
  std::fesetround(saved);
  return static_cast<int>(t);
}

inline SpikeTrain encode_time(const PixelImage& img, const EncoderConfig& cfg) {
  require(cfg.scheme == EncodingScheme::time, "encode_time: config is not a time scheme");
  require(cfg.horizon > 0, "encode_time: horizon must be positive");
  check_intensities(img);
  const int n = static_cast<int>(img.intensities.size());
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(n) * cfg.horizon, 0);
  for (int j = 0; j < n; ++j) {
    const int t = latency_sample(img.intensities[j], cfg.horizon);
    bits[static_cast<std::size_t>(j) * cfg.horizon + (t - 1)] = 1;
  }
  return SpikeTrain(n, cfg.horizon, std::move(bits));
}

inline SpikeTrain encode(const PixelImage& img, const EncoderConfig& cfg, std::uint64_t example_id) {
  return cfg.scheme == EncodingScheme::rate ? encode_rate(img, cfg, example_id)
                                            : encode_time(img, cfg);
}

}  // namespace psnn
