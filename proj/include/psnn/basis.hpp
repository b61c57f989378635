#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "psnn/error.hpp"

namespace psnn {

// Raised-cosine bumps on the raw sample axis. Column k is
//   0.5 * cos(clamp((t - c_k) * pi / (2 w), -pi, pi)) + 0.5,   t = 1..span,
// with centers c_k evenly spaced over [1, span] (rounded to the nearest sample,
// so every bump peaks at 1) and w half the center spacing, so neighbouring
// bumps cross at half height and each bump vanishes at its neighbours' centers. A single basis is centred on the span and made wide
// enough to cover it.
inline Eigen::MatrixXd raised_cosine_basis(int num_bases, int span) {
  require(num_bases >= 1 && span >= 1, "raised_cosine_basis: num_bases and span must be >= 1");
  Eigen::MatrixXd basis(span, num_bases);
  double first_center = 1.0;
  double spacing = 0.0;
  double width = 0.0;
  if (num_bases == 1) {
    first_center = 0.5 * (1.0 + span);
    width = 0.5 * (1.0 + span);
  } else {
    spacing = static_cast<double>(span - 1) / (num_bases - 1);
    width = 0.5 * spacing;
  }
  for (int k = 0; k < num_bases; ++k) {
    const double center = num_bases == 1 ? first_center : std::round(first_center + k * spacing);
    for (int s = 0; s < span; ++s) {
      const double t = s + 1.0;
      if (width <= 0.0) {
        basis(s, k) = (t == center) ? 1.0 : 0.0;
        continue;
      }
      const double phase = std::clamp((t - center) * std::numbers::pi / (2.0 * width),
                                      -std::numbers::pi, std::numbers::pi);
      basis(s, k) = 0.5 * std::cos(phase) + 0.5;
    }
  }
  return basis;
}

struct BasisConfig {
  int synaptic_bases = 16;
  int synaptic_span = 16;
  int feedback_bases = 16;
  int feedback_span = 16;

  friend bool operator==(const BasisConfig&, const BasisConfig&) = default;
};

// Fixed kernel bases. Row s of a basis matrix weights the history sample at
// lag (span - s), so the last row multiplies the most recent sample.
struct BasisSet {
  BasisConfig config;
  Eigen::MatrixXd synaptic;
  Eigen::MatrixXd feedback;

  BasisSet() : BasisSet(BasisConfig{}) {}
  explicit BasisSet(const BasisConfig& cfg)
      : config(cfg),
        synaptic(raised_cosine_basis(cfg.synaptic_bases, cfg.synaptic_span)),
        feedback(raised_cosine_basis(cfg.feedback_bases, cfg.feedback_span)) {}

  int synaptic_bases() const { return static_cast<int>(synaptic.cols()); }
  int synaptic_span() const { return static_cast<int>(synaptic.rows()); }
  int feedback_bases() const { return static_cast<int>(feedback.cols()); }
  int feedback_span() const { return static_cast<int>(feedback.rows()); }
};

}  // namespace psnn
