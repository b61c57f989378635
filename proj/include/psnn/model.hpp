#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "psnn/basis.hpp"
#include "psnn/error.hpp"
#include "psnn/random.hpp"
#include "psnn/spike_train.hpp"

namespace psnn {

enum class Rule { rate, first_to_spike };

struct ModelDims {
  int num_inputs = 256;
  int num_outputs = 4;
  int horizon = 16;

  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

// Learnable parameters. Also used as the gradient type, so an update is a
// single scaled addition.
//   synaptic: N_Y x (N_X * K_syn), column j * K_syn + k holds w_{j,i,k}
//   feedback: N_Y x K_fb
//   bias:     N_Y
struct ParamSet {
  Eigen::MatrixXd synaptic;
  Eigen::MatrixXd feedback;
  Eigen::VectorXd bias;

  static ParamSet zeros(int num_outputs, int num_inputs, int synaptic_bases, int feedback_bases) {
    ParamSet p;
    p.synaptic = Eigen::MatrixXd::Zero(num_outputs, static_cast<Eigen::Index>(num_inputs) * synaptic_bases);
    p.feedback = Eigen::MatrixXd::Zero(num_outputs, feedback_bases);
    p.bias = Eigen::VectorXd::Zero(num_outputs);
    return p;
  }

  ParamSet& add_scaled(double scale, const ParamSet& other) {
    synaptic.noalias() += scale * other.synaptic;
    feedback.noalias() += scale * other.feedback;
    bias.noalias() += scale * other.bias;
    return *this;
  }

  ParamSet& operator+=(const ParamSet& other) { return add_scaled(1.0, other); }

  double squared_norm() const {
    return synaptic.squaredNorm() + feedback.squaredNorm() + bias.squaredNorm();
  }

  std::size_t size() const {
    return static_cast<std::size_t>(synaptic.size() + feedback.size() + bias.size());
  }

  // Flat view in checkpoint order: synaptic (i, j, k), feedback (i, k), bias (i).
  double& flat(std::size_t n) {
    const auto ns = static_cast<std::size_t>(synaptic.size());
    const auto nf = static_cast<std::size_t>(feedback.size());
    if (n < ns) {
      const auto cols = static_cast<std::size_t>(synaptic.cols());
      return synaptic(static_cast<Eigen::Index>(n / cols), static_cast<Eigen::Index>(n % cols));
    }
    n -= ns;
    if (n < nf) {
      const auto cols = static_cast<std::size_t>(feedback.cols());
      return feedback(static_cast<Eigen::Index>(n / cols), static_cast<Eigen::Index>(n % cols));
    }
    return bias(static_cast<Eigen::Index>(n - nf));
  }
  double flat(std::size_t n) const { return const_cast<ParamSet&>(*this).flat(n); }

  bool all_finite() const {
    return synaptic.allFinite() && feedback.allFinite() && bias.allFinite();
  }
};

struct ModelParams {
  ModelDims dims;
  BasisSet basis;
  ParamSet weights;

  ModelParams() = default;
  ModelParams(const ModelDims& d, const BasisConfig& b)
      : dims(d),
        basis(b),
        weights(ParamSet::zeros(d.num_outputs, d.num_inputs, basis.synaptic_bases(),
                                basis.feedback_bases())) {
    require(d.num_inputs > 0 && d.num_outputs > 0 && d.horizon > 0,
            "ModelParams: dimensions must be positive");
  }

  ParamSet zero_like() const {
    return ParamSet::zeros(dims.num_outputs, dims.num_inputs, basis.synaptic_bases(),
                           basis.feedback_bases());
  }

  // alpha_{j,i} = A w_{j,i}; entry s multiplies the input at lag (span - s).
  Eigen::VectorXd synaptic_kernel(int j, int i) const {
    const int k = basis.synaptic_bases();
    return basis.synaptic *
           weights.synaptic.row(i).segment(static_cast<Eigen::Index>(j) * k, k).transpose();
  }

  // beta_i = B v_i
  Eigen::VectorXd feedback_kernel(int i) const {
    return basis.feedback * weights.feedback.row(i).transpose();
  }
};

// Desired output spike train for the labelled neuron; every other neuron is
// asked to stay silent.
struct DesiredOutputs {
  std::vector<std::uint8_t> pattern;

  SpikeTrain for_class(int c, int num_outputs) const {
    const int horizon = static_cast<int>(pattern.size());
    require(c >= 0 && c < num_outputs, "DesiredOutputs: class out of range");
    std::vector<std::uint8_t> bits(static_cast<std::size_t>(num_outputs) * horizon, 0);
    std::copy(pattern.begin(), pattern.end(), bits.begin() + static_cast<std::ptrdiff_t>(c) * horizon);
    return SpikeTrain(num_outputs, horizon, std::move(bits));
  }
};

// ---------------------------------------------------------------------------
// numerics

inline double softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double log_sigmoid(double u) { return -softplus(-u); }
inline double log_one_minus_sigmoid(double u) { return -softplus(u); }

inline double bernoulli_log_prob(double u, bool spike) {
  return spike ? log_sigmoid(u) : log_one_minus_sigmoid(u);
}

inline double log_sum_exp(std::span<const double> v) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : v) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

// ---------------------------------------------------------------------------
// features and potentials

// Filtered input history: row j * K + k, column t holds a_k^T x_{j, t-span}^{t-1}
// with samples before t = 0 taken as silent.
inline Eigen::MatrixXd synaptic_features(const BasisSet& basis, const SpikeTrain& x) {
  const int k_count = basis.synaptic_bases();
  const int span = basis.synaptic_span();
  const int horizon = x.horizon();
  Eigen::MatrixXd f = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(x.num_neurons()) * k_count, horizon);
  for (int j = 0; j < x.num_neurons(); ++j) {
    const auto row = x.row(j);
    const Eigen::Index r0 = static_cast<Eigen::Index>(j) * k_count;
    for (int ts = 0; ts < horizon; ++ts) {
      if (!row[ts]) continue;
      const int last = std::min(span, horizon - 1 - ts);
      for (int lag = 1; lag <= last; ++lag)
        f.col(ts + lag).segment(r0, k_count) += basis.synaptic.row(span - lag).transpose();
    }
  }
  return f;
}

// Filtered own-output history for one neuron: K_fb x T.
inline Eigen::MatrixXd feedback_features(const BasisSet& basis, std::span<const std::uint8_t> y, int horizon) {
  const int k_count = basis.feedback_bases();
  const int span = basis.feedback_span();
  Eigen::MatrixXd f = Eigen::MatrixXd::Zero(k_count, horizon);
  for (int ts = 0; ts < horizon; ++ts) {
    if (!y[ts]) continue;
    const int last = std::min(span, horizon - 1 - ts);
    for (int lag = 1; lag <= last; ++lag) f.col(ts + lag) += basis.feedback.row(span - lag).transpose();
  }
  return f;
}

inline void check_input(const ModelParams& params, const SpikeTrain& x) {
  require_shape(x.num_neurons() == params.dims.num_inputs && x.horizon() == params.dims.horizon,
                "input raster shape does not match model dimensions");
}

inline void check_class(const ModelParams& params, int c) {
  require(c >= 0 && c < params.dims.num_outputs, "class index out of range");
}

// Potentials with the feedback term zeroed: W F + gamma.
inline Eigen::MatrixXd feedforward_potentials(const ModelParams& params, const Eigen::MatrixXd& features) {
  Eigen::MatrixXd u = params.weights.synaptic * features;
  u.colwise() += params.weights.bias;
  return u;
}

struct Potentials {
  Eigen::MatrixXd u;  // N_Y x T
};

// u_{i,t} for every output neuron, feedback taken from the rows of y_feedback.
inline Potentials potentials(const ModelParams& params, const SpikeTrain& x, const SpikeTrain& y_feedback) {
  check_input(params, x);
  require_shape(y_feedback.num_neurons() == params.dims.num_outputs &&
                    y_feedback.horizon() == params.dims.horizon,
                "feedback raster shape does not match model dimensions");
  Potentials p{feedforward_potentials(params, synaptic_features(params.basis, x))};
  for (int i = 0; i < params.dims.num_outputs; ++i) {
    const auto fb = feedback_features(params.basis, y_feedback.row(i), params.dims.horizon);
    p.u.row(i) += params.weights.feedback.row(i) * fb;
  }
  return p;
}

// u_{i,t} from the defining sum over neurons and lags. Slow, index-checked.
inline double membrane_potential(const ModelParams& params, const SpikeTrain& x,
                                 const SpikeTrain& y_feedback, int i, int t) {
  check_input(params, x);
  require_shape(i >= 0 && i < params.dims.num_outputs, "membrane_potential: output index out of range");
  require_shape(t >= 0 && t < params.dims.horizon, "membrane_potential: time index out of range");
  require_shape(y_feedback.num_neurons() == params.dims.num_outputs &&
                    y_feedback.horizon() == params.dims.horizon,
                "membrane_potential: feedback raster shape mismatch");
  double u = params.weights.bias(i);
  const int span = params.basis.synaptic_span();
  for (int j = 0; j < params.dims.num_inputs; ++j) {
    const Eigen::VectorXd alpha = params.synaptic_kernel(j, i);
    for (int s = 0; s < span; ++s) {
      const int ts = t - span + s;
      if (ts >= 0 && x(j, ts)) u += alpha(s);
    }
  }
  const Eigen::VectorXd beta = params.feedback_kernel(i);
  const int fspan = params.basis.feedback_span();
  for (int s = 0; s < fspan; ++s) {
    const int ts = t - fspan + s;
    if (ts >= 0 && y_feedback(i, ts)) u += beta(s);
  }
  return u;
}

// ---------------------------------------------------------------------------
// likelihoods and gradients

// Joint log-likelihood of the target raster y with teacher-forced feedback,
// i.e. the rate-decoding training objective. Fills grad when non-null.
inline double rate_objective(const ModelParams& params, const Eigen::MatrixXd& features,
                             const SpikeTrain& target, ParamSet* grad) {
  const int ny = params.dims.num_outputs;
  const int horizon = params.dims.horizon;
  Eigen::MatrixXd u = feedforward_potentials(params, features);
  std::vector<Eigen::MatrixXd> fb(static_cast<std::size_t>(ny));
  std::vector<bool> has_fb(static_cast<std::size_t>(ny), false);
  for (int i = 0; i < ny; ++i) {
    const auto row = target.row(i);
    if (std::none_of(row.begin(), row.end(), [](auto b) { return b != 0; })) continue;
    fb[i] = feedback_features(params.basis, row, horizon);
    has_fb[i] = true;
    u.row(i) += params.weights.feedback.row(i) * fb[i];
  }
  double total = 0.0;
  for (int t = 0; t < horizon; ++t)
    for (int i = 0; i < ny; ++i) total += bernoulli_log_prob(u(i, t), target(i, t) != 0);
  if (grad) {
    Eigen::MatrixXd delta(ny, horizon);
    for (int t = 0; t < horizon; ++t)
      for (int i = 0; i < ny; ++i) delta(i, t) = static_cast<double>(target(i, t)) - sigmoid(u(i, t));
    *grad = params.zero_like();
    grad->synaptic.noalias() = delta * features.transpose();
    grad->bias = delta.rowwise().sum();
    for (int i = 0; i < ny; ++i)
      if (has_fb[i]) grad->feedback.row(i).noalias() = delta.row(i) * fb[i].transpose();
  }
  return total;
}

// Log of sum_t p_t: the probability that neuron c spikes first (possibly
// jointly with nothing else), with all feedback zeroed.
inline double fts_objective_from_potentials(const Eigen::MatrixXd& u, int c, Eigen::MatrixXd* delta) {
  const auto ny = u.rows();
  const auto horizon = u.cols();
  std::vector<double> log_pt(static_cast<std::size_t>(horizon));
  double others = 0.0;
  double own = 0.0;
  for (Eigen::Index t = 0; t < horizon; ++t) {
    for (Eigen::Index i = 0; i < ny; ++i)
      if (i != c) others += log_one_minus_sigmoid(u(i, t));
    log_pt[t] = others + own + log_sigmoid(u(c, t));
    own += log_one_minus_sigmoid(u(c, t));
  }
  const double total = log_sum_exp(log_pt);
  if (delta) {
    delta->resize(ny, horizon);
    std::vector<double> w(static_cast<std::size_t>(horizon));
    for (Eigen::Index t = 0; t < horizon; ++t) w[t] = std::exp(log_pt[t] - total);
    double tail = 0.0;  // sum of w over t' >= t
    for (Eigen::Index t = horizon - 1; t >= 0; --t) {
      tail += w[t];
      for (Eigen::Index i = 0; i < ny; ++i) {
        const double g = sigmoid(u(i, t));
        if (i != c)
          (*delta)(i, t) = -g * tail;
        else
          (*delta)(i, t) = (1.0 - g) * w[t] - g * (tail - w[t]);
      }
    }
  }
  return total;
}

inline double fts_objective(const ModelParams& params, const Eigen::MatrixXd& features, int c, ParamSet* grad) {
  const Eigen::MatrixXd u = feedforward_potentials(params, features);
  if (!grad) return fts_objective_from_potentials(u, c, nullptr);
  Eigen::MatrixXd delta;
  const double total = fts_objective_from_potentials(u, c, &delta);
  *grad = params.zero_like();
  grad->synaptic.noalias() = delta * features.transpose();
  grad->bias = delta.rowwise().sum();
  return total;
}

// log p(y_i | x) for one output neuron with feedback from y_i itself.
inline double neuron_log_likelihood(const ModelParams& params, const SpikeTrain& x,
                                    std::span<const std::uint8_t> y_i, int i) {
  check_input(params, x);
  check_class(params, i);
  require_shape(static_cast<int>(y_i.size()) == params.dims.horizon,
                "neuron_log_likelihood: output train length mismatch");
  const Eigen::MatrixXd f = synaptic_features(params.basis, x);
  Eigen::RowVectorXd u = params.weights.synaptic.row(i) * f;
  u.array() += params.weights.bias(i);
  u += params.weights.feedback.row(i) * feedback_features(params.basis, y_i, params.dims.horizon);
  double total = 0.0;
  for (int t = 0; t < params.dims.horizon; ++t) total += bernoulli_log_prob(u(t), y_i[t] != 0);
  return total;
}

inline double rate_log_likelihood(const ModelParams& params, const SpikeTrain& x, int c,
                                  const DesiredOutputs& desired) {
  check_input(params, x);
  check_class(params, c);
  require_shape(static_cast<int>(desired.pattern.size()) == params.dims.horizon,
                "desired pattern length must equal the horizon");
  return rate_objective(params, synaptic_features(params.basis, x),
                        desired.for_class(c, params.dims.num_outputs), nullptr);
}

inline double fts_log_likelihood(const ModelParams& params, const SpikeTrain& x, int c) {
  check_input(params, x);
  check_class(params, c);
  return fts_objective(params, synaptic_features(params.basis, x), c, nullptr);
}

inline ParamSet grad_rate(const ModelParams& params, const SpikeTrain& x, int c, const DesiredOutputs& desired) {
  check_input(params, x);
  check_class(params, c);
  require_shape(static_cast<int>(desired.pattern.size()) == params.dims.horizon,
                "desired pattern length must equal the horizon");
  ParamSet g;
  rate_objective(params, synaptic_features(params.basis, x), desired.for_class(c, params.dims.num_outputs), &g);
  return g;
}

inline ParamSet grad_fts(const ModelParams& params, const SpikeTrain& x, int c) {
  check_input(params, x);
  check_class(params, c);
  ParamSet g;
  fts_objective(params, synaptic_features(params.basis, x), c, &g);
  return g;
}

// Training/attack likelihood for either decoding rule.
inline double log_likelihood(Rule rule, const ModelParams& params, const SpikeTrain& x, int c,
                             const DesiredOutputs& desired) {
  return rule == Rule::rate ? rate_log_likelihood(params, x, c, desired) : fts_log_likelihood(params, x, c);
}

inline double log_likelihood_with_grad(Rule rule, const ModelParams& params, const Eigen::MatrixXd& features,
                                       int c, const DesiredOutputs& desired, ParamSet* grad) {
  if (rule == Rule::rate)
    return rate_objective(params, features, desired.for_class(c, params.dims.num_outputs), grad);
  return fts_objective(params, features, c, grad);
}

// Autoregressive draw of the output raster: y_{i,t} ~ Bernoulli(g(u_{i,t}))
// where u_{i,t} sees the already sampled y_{i, <t}.
inline SpikeTrain sample_outputs(const ModelParams& params, const SpikeTrain& x, Rng& rng) {
  check_input(params, x);
  const int ny = params.dims.num_outputs;
  const int horizon = params.dims.horizon;
  const int fspan = params.basis.feedback_span();
  const Eigen::MatrixXd drive = feedforward_potentials(params, synaptic_features(params.basis, x));
  std::vector<Eigen::VectorXd> beta;
  beta.reserve(static_cast<std::size_t>(ny));
  for (int i = 0; i < ny; ++i) beta.push_back(params.feedback_kernel(i));
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(ny) * horizon, 0);
  for (int t = 0; t < horizon; ++t) {
    for (int i = 0; i < ny; ++i) {
      double u = drive(i, t);
      const int last = std::min(fspan, t);
      for (int lag = 1; lag <= last; ++lag)
        if (bits[static_cast<std::size_t>(i) * horizon + (t - lag)]) u += beta[i](fspan - lag);
      bits[static_cast<std::size_t>(i) * horizon + t] = bernoulli(rng, sigmoid(u)) ? 1 : 0;
    }
  }
  return SpikeTrain(ny, horizon, std::move(bits));
}

}  // namespace psnn
