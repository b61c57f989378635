#pragma once

// Independent reference computations used only by the tests. Nothing here
// calls the feature/potential fast paths of the library.

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <random>
#include <vector>

#include "psnn/model.hpp"

namespace oracle {

using psnn::ModelParams;
using psnn::SpikeTrain;

// Oracles accumulate in long double so finite differences of them stay far
// below the tolerances they are compared against.
using Real = long double;

inline Real sig(Real u) { return 1.0L / (1.0L + std::exp(-u)); }

inline SpikeTrain random_raster(int n, int t, double p, std::mt19937_64& gen) {
  std::bernoulli_distribution d(p);
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(n) * t);
  for (auto& b : bits) b = d(gen) ? 1 : 0;
  return SpikeTrain(n, t, std::move(bits));
}

struct Instance {
  ModelParams params;
  SpikeTrain x;
};

// Random small model with weights uniform on [-scale, scale].
inline Instance random_instance(std::mt19937_64& gen, int nx, int ny, int horizon, int k, double scale = 1.0) {
  psnn::BasisConfig b{k, horizon, k, horizon};
  ModelParams params({nx, ny, horizon}, b);
  std::uniform_real_distribution<double> u(-scale, scale);
  params.weights.synaptic = params.weights.synaptic.unaryExpr([&](double) { return u(gen); });
  params.weights.feedback = params.weights.feedback.unaryExpr([&](double) { return u(gen); });
  params.weights.bias = params.weights.bias.unaryExpr([&](double) { return u(gen); });
  return {std::move(params), random_raster(nx, horizon, 0.4, gen)};
}

// Membrane potential straight from the defining double sum: kernels are built
// entry by entry from the basis and the weights, windows are walked sample by
// sample, samples before the trial count as silent.
inline Real potential(const ModelParams& p, const SpikeTrain& x, const SpikeTrain& y, int i, int t) {
  const auto& A = p.basis.synaptic;
  const auto& B = p.basis.feedback;
  const int ka = static_cast<int>(A.cols());
  const int tau = static_cast<int>(A.rows());
  const int kb = static_cast<int>(B.cols());
  const int tau_fb = static_cast<int>(B.rows());
  Real u = p.weights.bias(i);
  for (int j = 0; j < x.num_neurons(); ++j) {
    for (int s = 0; s < tau; ++s) {
      // window (x_{t-tau}, ..., x_{t-1}); entry s pairs with sample t - tau + s
      const int ts = t - tau + s;
      if (ts < 0 || !x(j, ts)) continue;
      Real alpha = 0.0L;
      for (int k = 0; k < ka; ++k) alpha += Real(A(s, k)) * p.weights.synaptic(i, j * ka + k);
      u += alpha;
    }
  }
  for (int s = 0; s < tau_fb; ++s) {
    const int ts = t - tau_fb + s;
    if (ts < 0 || !y(i, ts)) continue;
    Real beta = 0.0L;
    for (int k = 0; k < kb; ++k) beta += Real(B(s, k)) * p.weights.feedback(i, k);
    u += beta;
  }
  return u;
}

inline SpikeTrain zeros(int n, int t) { return SpikeTrain(n, t); }

// Calls f on every binary raster of the given shape.
inline void for_each_raster(int n, int t, const std::function<void(const SpikeTrain&)>& f) {
  const int bits = n * t;
  for (std::uint64_t m = 0; m < (1ULL << bits); ++m) {
    std::vector<std::uint8_t> v(static_cast<std::size_t>(bits));
    for (int b = 0; b < bits; ++b) v[b] = (m >> b) & 1ULL;
    f(SpikeTrain(n, t, std::move(v)));
  }
}

// Probability of an output raster under the autoregressive model, multiplying
// Bernoulli factors in the probability domain.
inline Real raster_probability(const ModelParams& p, const SpikeTrain& x, const SpikeTrain& y) {
  Real prob = 1.0L;
  for (int i = 0; i < y.num_neurons(); ++i)
    for (int t = 0; t < y.horizon(); ++t) {
      const Real g = sig(potential(p, x, y, i, t));
      prob *= y(i, t) ? g : 1.0L - g;
    }
  return prob;
}

inline SpikeTrain desired_raster(int ny, int horizon, int c) {
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(ny) * horizon, 0);
  for (int t = 3; t < horizon; t += 4) bits[static_cast<std::size_t>(c) * horizon + t] = 1;
  return SpikeTrain(ny, horizon, std::move(bits));
}

// Teacher-forced log-likelihood of the desired raster for class c.
inline Real rate_log_likelihood(const ModelParams& p, const SpikeTrain& x, int c) {
  const SpikeTrain y = desired_raster(p.dims.num_outputs, p.dims.horizon, c);
  Real total = 0.0L;
  for (int i = 0; i < y.num_neurons(); ++i)
    for (int t = 0; t < y.horizon(); ++t) {
      const Real u = potential(p, x, y, i, t);
      // log g(u) = -log(1 + e^-u), log(1 - g(u)) = -log(1 + e^u)
      total += y(i, t) ? -std::log1p(std::exp(-u)) : -std::log1p(std::exp(u));
    }
  return total;
}

// log sum_t P(c spikes at t, nothing spikes before t, no other neuron spikes
// up to and including t), feedback zeroed; summed in the probability domain.
inline Real fts_log_likelihood(const ModelParams& p, const SpikeTrain& x, int c) {
  const SpikeTrain silent(p.dims.num_outputs, p.dims.horizon);
  Real total = 0.0L;
  Real survive = 1.0L;
  for (int t = 0; t < p.dims.horizon; ++t) {
    Real others = 1.0L;
    for (int i = 0; i < p.dims.num_outputs; ++i)
      if (i != c) others *= 1.0L - sig(potential(p, x, silent, i, t));
    const Real gc = sig(potential(p, x, silent, c, t));
    survive *= others;
    total += survive * gc;
    survive *= 1.0L - gc;
  }
  return std::log(total);
}

// First-spike outcome probabilities with feedback zeroed, by enumeration of
// every output raster. Index N_Y collects rasters without a unique earliest
// spiking neuron (silence or a tie at the first spike time).
inline std::vector<Real> first_spike_distribution(const ModelParams& p, const SpikeTrain& x) {
  const int ny = p.dims.num_outputs;
  const int horizon = p.dims.horizon;
  const SpikeTrain silent = zeros(ny, horizon);
  std::vector<Real> g(static_cast<std::size_t>(ny * horizon));
  for (int i = 0; i < ny; ++i)
    for (int t = 0; t < horizon; ++t) g[i * horizon + t] = sig(potential(p, x, silent, i, t));
  std::vector<Real> out(static_cast<std::size_t>(ny + 1), 0.0L);
  for_each_raster(ny, horizon, [&](const SpikeTrain& y) {
    Real prob = 1.0L;
    for (int i = 0; i < ny; ++i)
      for (int t = 0; t < horizon; ++t) prob *= y(i, t) ? g[i * horizon + t] : 1.0L - g[i * horizon + t];
    int winner = ny;
    for (int t = 0; t < horizon && winner == ny; ++t) {
      int spikers = 0;
      int who = -1;
      for (int i = 0; i < ny; ++i)
        if (y(i, t)) {
          ++spikers;
          who = i;
        }
      if (spikers == 1) winner = who;
      if (spikers >= 1) break;
    }
    out[winner] += prob;
  });
  return out;
}

// Central finite difference of f along every flat parameter coordinate.
inline std::vector<double> finite_difference(ModelParams p, const std::function<Real(const ModelParams&)>& f,
                                             double h = 1e-6) {
  std::vector<double> out(p.weights.size());
  for (std::size_t n = 0; n < out.size(); ++n) {
    const double orig = p.weights.flat(n);
    p.weights.flat(n) = orig + h;
    const Real up = f(p);
    p.weights.flat(n) = orig - h;
    const Real down = f(p);
    p.weights.flat(n) = orig;
    // the step actually taken, after rounding orig +- h to double
    out[n] = static_cast<double>((up - down) / (Real(orig + h) - Real(orig - h)));
  }
  return out;
}

// |a - b| <= rtol * max(|a|, |b|) + atol, over every coordinate.
inline bool gradients_agree(const psnn::ParamSet& g, const std::vector<double>& fd, double rtol, double atol,
                            std::string* where = nullptr) {
  for (std::size_t n = 0; n < fd.size(); ++n) {
    const double a = g.flat(n);
    const double b = fd[n];
    if (std::abs(a - b) > rtol * std::max(std::abs(a), std::abs(b)) + atol) {
      if (where) *where = "coordinate " + std::to_string(n) + ": analytic " + std::to_string(a) + " vs " + std::to_string(b);
      return false;
    }
  }
  return true;
}

}  // namespace oracle
