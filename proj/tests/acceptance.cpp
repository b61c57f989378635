// Acceptance suite: one PASS/FAIL line per criterion.
//
// Criteria 8-11 need the USPS files; set PSNN_USPS_DIR to a directory holding
// "usps" and "usps.t". Without them those criteria report FAIL.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <thread>

#include "psnn/experiment.hpp"
#include "support/oracles.hpp"

namespace fs = std::filesystem;
using namespace psnn;

namespace {

// Tolerances and sizes.
constexpr int kGradInstances = 100;
constexpr double kGradRtol = 1e-5;
constexpr double kGradAtol = 1e-9;  // for coordinates whose true value is 0
constexpr double kGradSeconds = 30.0;
constexpr double kNormTol = 1e-9;
constexpr int kGreedyOracleInstances = 50;
constexpr int kIncrementalCandidates = 200;
constexpr double kIncrementalTol = 1e-10;
constexpr int kFuzzCases = 1000;
constexpr double kConvexEta = 1e-3;
constexpr int kConvexIterations = 500;
constexpr double kFlipSlack = 0.05;
const std::vector<std::uint64_t> kSeeds{1, 2, 3};

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

DesiredOutputs pattern_for(int horizon) {
  std::vector<std::uint8_t> p(static_cast<std::size_t>(horizon), 0);
  for (int t = 3; t < horizon; t += 4) p[t] = 1;
  return {p};
}

double target_ll(Rule rule, const ModelParams& p, const SpikeTrain& x, int target) {
  return rule == Rule::rate ? static_cast<double>(oracle::rate_log_likelihood(p, x, target))
                            : static_cast<double>(oracle::fts_log_likelihood(p, x, target));
}

// ---------------------------------------------------------------------------
// 1. gradient checks

Outcome gradient_checks() {
  const auto t0 = Clock::now();
  std::mt19937_64 gen(101);
  std::uniform_int_distribution<int> nx_d(1, 5), ny_d(1, 3), t_d(1, 6);
  int failures = 0;
  std::string first;
  for (int n = 0; n < kGradInstances; ++n) {
    const int horizon = t_d(gen);
    const int k = std::uniform_int_distribution<int>(1, std::min(3, horizon))(gen);
    const auto inst = oracle::random_instance(gen, nx_d(gen), ny_d(gen), horizon, k);
    const int c = std::uniform_int_distribution<int>(0, inst.params.dims.num_outputs - 1)(gen);
    for (Rule rule : {Rule::rate, Rule::first_to_spike}) {
      const ParamSet g = rule == Rule::rate ? grad_rate(inst.params, inst.x, c, pattern_for(horizon))
                                            : grad_fts(inst.params, inst.x, c);
      const auto fd = oracle::finite_difference(inst.params, [&](const ModelParams& p) {
        return rule == Rule::rate ? oracle::rate_log_likelihood(p, inst.x, c) : oracle::fts_log_likelihood(p, inst.x, c);
      });
      std::string where;
      if (!oracle::gradients_agree(g, fd, kGradRtol, kGradAtol, &where)) {
        if (failures++ == 0) first = where;
      }
    }
  }
  const double secs = seconds_since(t0);
  return {failures == 0 && secs < kGradSeconds,
          std::to_string(kGradInstances) + " instances x {rate, first_to_spike}, " + std::to_string(failures) +
              " mismatches" + (first.empty() ? "" : " (" + first + ")") + ", " + fmt(secs, 3) + " s"};
}

// ---------------------------------------------------------------------------
// 2. normalization

Outcome normalization() {
  std::mt19937_64 gen(202);
  double worst = 0.0;
  const std::vector<std::pair<int, int>> shapes{{1, 12}, {2, 6}, {3, 4}, {4, 3}, {6, 2}, {2, 5}, {3, 3}};
  for (auto [ny, horizon] : shapes)
    for (int rep = 0; rep < 3; ++rep) {
      const auto inst = oracle::random_instance(gen, 3, ny, horizon, std::min(3, horizon), 2.0);
      double total = 0.0;
      oracle::for_each_raster(ny, horizon, [&](const SpikeTrain& y) {
        double ll = 0.0;
        for (int i = 0; i < ny; ++i) ll += neuron_log_likelihood(inst.params, inst.x, y.row(i), i);
        total += std::exp(ll);
      });
      worst = std::max(worst, std::abs(total - 1.0));
    }
  double worst_fts = 0.0;
  for (int rep = 0; rep < 50; ++rep) {
    const auto inst = oracle::random_instance(gen, 3, 2, 3, 2, 2.0);
    const auto dist = oracle::first_spike_distribution(inst.params, inst.x);
    const double total = std::exp(fts_log_likelihood(inst.params, inst.x, 0)) +
                         std::exp(fts_log_likelihood(inst.params, inst.x, 1)) + static_cast<double>(dist[2]);
    worst_fts = std::max(worst_fts, std::abs(total - 1.0));
  }
  return {worst <= kNormTol && worst_fts <= kNormTol,
          "joint max |sum - 1| = " + fmt(worst, 3) + ", first-to-spike max |sum - 1| = " + fmt(worst_fts, 3)};
}

// ---------------------------------------------------------------------------
// 3. greedy first step against exhaustive search

Outcome greedy_oracle() {
  std::mt19937_64 gen(303);
  int mismatches = 0;
  int cases = 0;
  for (int n = 0; n < kGreedyOracleInstances; ++n) {
    const auto inst = oracle::random_instance(gen, 3, 3, 4, 2, 2.0);
    const Rule rule = n % 2 ? Rule::first_to_spike : Rule::rate;
    const int c = n % 3;
    const int ta = 1 + n % 4;
    for (AttackKind kind : {AttackKind::add, AttackKind::remove, AttackKind::flip}) {
      const AttackResult r = greedy_attack(inst.params, inst.x, c, {kind, 1.0 / 12, ta, 0}, rule);
      // exhaustive argmax over every legal single-entry change, no-op included
      int target = -1;
      double lowest = 0.0;
      for (int k = 0; k < 3; ++k) {
        if (k == c) continue;
        const double v = target_ll(rule, inst.params, inst.x, k);
        if (target < 0 || v < lowest) {
          target = k;
          lowest = v;
        }
      }
      double best = lowest;
      SpikeTrain best_x = inst.x;
      for (int j = 0; j < 3; ++j)
        for (int t = 0; t < ta; ++t) {
          if (!change_allowed(kind, inst.x(j, t))) continue;
          const SpikeTrain cand = inst.x.flipped(j, t);
          const double v = target_ll(rule, inst.params, cand, target);
          if (v > best + 1e-12) {
            best = v;
            best_x = cand;
          }
        }
      ++cases;
      mismatches += r.target != target || r.adversarial != best_x;
    }
  }
  return {mismatches == 0, std::to_string(cases) + " (instance, kind) cases on " +
                               std::to_string(kGreedyOracleInstances) + " instances, " +
                               std::to_string(mismatches) + " mismatches"};
}

// ---------------------------------------------------------------------------
// 4. incremental likelihood

Outcome incremental() {
  std::mt19937_64 gen(404);
  int candidates = 0;
  double worst = 0.0;
  for (int n = 0; candidates < 4 * kIncrementalCandidates; ++n) {
    const int horizon = 3 + n % 6;
    const auto inst = oracle::random_instance(gen, 4, 3, horizon, std::min(3, horizon), 2.0);
    const Rule rule = n % 2 ? Rule::first_to_spike : Rule::rate;
    const int target = n % 3;
    const AttackCache cache(inst.params, rule, target, horizon, inst.x);
    for (int j = 0; j < 4; ++j)
      for (int t = 0; t < horizon; ++t) {
        const SpikeTrain moved = inst.x.flipped(j, t);
        const double scratch = log_likelihood(rule, inst.params, moved, target, make_desired_outputs(horizon));
        const double inc = greedy_step_incremental(inst.params, inst.x, j, t, rule, cache);
        worst = std::max(worst, std::abs(inc - scratch));
        ++candidates;
      }
  }
  return {worst <= kIncrementalTol && candidates >= kIncrementalCandidates,
          std::to_string(candidates) + " candidates, max |incremental - scratch| = " + fmt(worst, 3)};
}

// ---------------------------------------------------------------------------
// 5. budget, legality and time-support locality

Outcome fuzz_invariants() {
  std::mt19937_64 gen(505);
  std::uniform_real_distribution<double> eps_d(0.0, 0.5);
  const AttackKind kinds[] = {AttackKind::add,        AttackKind::remove,        AttackKind::flip,
                              AttackKind::random_add, AttackKind::random_remove, AttackKind::random_flip};
  int violations = 0;
  for (int n = 0; n < kFuzzCases; ++n) {
    const int horizon = 1 + n % 6;
    const auto inst = oracle::random_instance(gen, 1 + (n / 6) % 5, 2 + n % 2, horizon, std::min(2, horizon), 2.0);
    const AttackKind kind = kinds[n % 6];
    const int ta = std::uniform_int_distribution<int>(1, horizon)(gen);
    const AttackSpec spec{kind, eps_d(gen), ta, static_cast<std::uint64_t>(n)};
    const Rule rule = (n / 2) % 2 ? Rule::first_to_spike : Rule::rate;
    SpikeTrain adv;
    if (is_random(kind)) {
      Rng rng = make_stream(static_cast<std::uint64_t>(n), {});
      adv = random_perturb(inst.x, spec, rng);
    } else {
      adv = greedy_attack(inst.params, inst.x, 0, spec, rule).adversarial;
    }
    const int budget = attack_budget(spec, inst.x.num_neurons(), horizon);
    bool ok = hamming_distance(inst.x, adv) <= static_cast<std::size_t>(budget);
    for (int j = 0; j < inst.x.num_neurons(); ++j)
      for (int t = 0; t < horizon; ++t) {
        if (adv(j, t) == inst.x(j, t)) continue;
        ok = ok && t < ta && change_allowed(kind, inst.x(j, t));
      }
    violations += !ok;
  }
  return {violations == 0, std::to_string(kFuzzCases) + " fuzz cases, " + std::to_string(violations) + " violations"};
}

// ---------------------------------------------------------------------------
// 6. monotone full-batch descent

Outcome convexity() {
  std::vector<LabeledExample> data;
  for (int n = 0; n < 10; ++n) {
    PixelImage img{std::vector<double>(8, 0.15), n % 2, static_cast<std::uint64_t>(n)};
    for (int j = 4 * (n % 2); j < 4 * (n % 2) + 4; ++j) img.intensities[j] = 0.9;
    data.push_back({encode_rate(img, {EncodingScheme::rate, 8, 0.5, 6}, static_cast<std::uint64_t>(n)), n % 2});
  }
  ModelParams p = init_params({8, 2, 8}, {8, 8, 8, 8}, 1.0, 6);
  const auto nll = full_batch_ascent(p, data, kConvexEta, kConvexIterations);
  int increases = 0;
  for (std::size_t k = 1; k < nll.size(); ++k) increases += nll[k] > nll[k - 1];
  return {increases == 0, std::to_string(kConvexIterations) + " iterations, NLL " + fmt(nll.front(), 6) + " -> " +
                              fmt(nll.back(), 6) + ", " + std::to_string(increases) + " increases"};
}

// ---------------------------------------------------------------------------
// 7. zero-budget adversarial training equals ML training

Outcome zero_budget_robust() {
  std::mt19937_64 gen(707);
  std::vector<LabeledExample> data;
  for (int n = 0; n < 40; ++n) {
    PixelImage img{std::vector<double>(12, 0.1), n % 3, static_cast<std::uint64_t>(n)};
    for (int j = 4 * (n % 3); j < 4 * (n % 3) + 4; ++j) img.intensities[j] = 0.8;
    data.push_back({encode_rate(img, {EncodingScheme::rate, 8, 0.5, 7}, static_cast<std::uint64_t>(n)), n % 3});
  }
  int mismatches = 0;
  for (Rule rule : {Rule::rate, Rule::first_to_spike}) {
    TrainConfig cfg;
    cfg.rule = rule;
    cfg.dims = {12, 3, 8};
    cfg.basis = {8, 8, 8, 8};
    cfg.lr_candidates = {1e-2, 1e-3};
    cfg.max_epochs = 15;
    cfg.seed = 77;
    const TrainResult ml = train_ml(data, cfg);
    const TrainResult adv = adversarial_train(data, {cfg, {AttackKind::flip, 0.0, 0, 0}});
    bool same = ml.params.weights.synaptic == adv.params.weights.synaptic &&
                ml.params.weights.feedback == adv.params.weights.feedback &&
                ml.params.weights.bias == adv.params.weights.bias && ml.log.epochs.size() == adv.log.epochs.size() &&
                ml.log.best_epoch == adv.log.best_epoch && ml.log.learning_rate == adv.log.learning_rate;
    for (std::size_t e = 0; same && e < ml.log.epochs.size(); ++e)
      same = ml.log.epochs[e].train_nll == adv.log.epochs[e].train_nll &&
             ml.log.epochs[e].validation_accuracy == adv.log.epochs[e].validation_accuracy;
    mismatches += !same;
  }
  return {mismatches == 0, "rate and first_to_spike trajectories, " + std::to_string(mismatches) + " differ"};
}

// ---------------------------------------------------------------------------
// 8-11. desk-scale regimes on USPS

struct Usps {
  std::string dir;
  int workers = 1;
};

std::optional<Usps> find_usps() {
  const char* env = std::getenv("PSNN_USPS_DIR");
  if (!env) return std::nullopt;
  const fs::path dir(env);
  if (!fs::exists(dir / "usps") || !fs::exists(dir / "usps.t")) return std::nullopt;
  return Usps{dir.string(), static_cast<int>(std::max(1u, std::thread::hardware_concurrency()))};
}

ExperimentConfig preset(const Usps& usps, const std::string& name, std::uint64_t seed) {
  json overrides = {{"seed", seed},
                    {"workers", usps.workers},
                    {"dataset", {{"train_path", usps.dir + "/usps"}, {"test_path", usps.dir + "/usps.t"}}}};
  return load_experiment_config(std::string(PSNN_SOURCE_DIR) + "/configs/" + name + ".json", overrides);
}

double accuracy_at(const ExperimentReport& r, AttackKind kind, double eps) {
  for (const auto& row : r.rows)
    if (row.kind == kind && std::abs(row.epsilon - eps) < 1e-12) return row.accuracy;
  throw Error("missing report row");
}

// Mean accuracy over seeds at one (kind, epsilon) point.
double seed_mean(const Usps& usps, const std::string& name, AttackKind kind, double eps, double* seconds) {
  double total = 0.0;
  for (auto seed : kSeeds) {
    const auto t0 = Clock::now();
    ExperimentConfig cfg = preset(usps, name, seed);
    cfg.sweep_kinds = {kind};
    cfg.sweep_epsilons = {eps};
    const ExperimentReport r = run_experiment(cfg);
    const double secs = seconds_since(t0);
    *seconds = std::max(*seconds, secs);
    std::cerr << "  " << name << " seed " << seed << ": accuracy " << fmt(accuracy_at(r, kind, eps)) << " ("
              << fmt(secs, 3) << " s)\n";
    total += accuracy_at(r, kind, eps);
  }
  return total / static_cast<double>(kSeeds.size());
}

Outcome fig2(const Usps& usps) {
  std::string detail;
  bool pass = true;
  double longest = 0.0;
  for (const char* name : {"fig2_rate_decoding", "fig2_fts_decoding"}) {
    const auto t0 = Clock::now();
    const ExperimentReport r = run_experiment(preset(usps, name, kSeeds[0]));
    longest = std::max(longest, seconds_since(t0));
    const auto cfg = preset(usps, name, kSeeds[0]);
    for (double eps : cfg.sweep_epsilons) {
      const double add = accuracy_at(r, AttackKind::add, eps);
      const double remove = accuracy_at(r, AttackKind::remove, eps);
      const double flip = accuracy_at(r, AttackKind::flip, eps);
      const bool ok = add <= accuracy_at(r, AttackKind::random_add, eps) &&
                      remove <= accuracy_at(r, AttackKind::random_remove, eps) &&
                      flip <= accuracy_at(r, AttackKind::random_flip, eps) &&
                      flip <= std::min(add, remove) + kFlipSlack;
      if (!ok) {
        pass = false;
        detail += std::string(name) + " fails at eps=" + fmt(eps) + "; ";
      }
    }
    detail += std::string(name) + " flip@max=" + fmt(accuracy_at(r, AttackKind::flip, cfg.sweep_epsilons.back())) +
              " random_flip@max=" + fmt(accuracy_at(r, AttackKind::random_flip, cfg.sweep_epsilons.back())) + "; ";
  }
  return {pass && longest <= 1800.0, detail + "longest run " + fmt(longest, 4) + " s"};
}

Outcome fig4(const Usps& usps) {
  const double eps = 10.0 / 2048;
  double longest = 0.0;
  const double ml = seed_mean(usps, "fig4_ml", AttackKind::flip, eps, &longest);
  const double robust = seed_mean(usps, "fig4_robust", AttackKind::flip, eps, &longest);
  const bool pass = ml >= 0.30 && ml <= 0.60 && robust >= 0.75 && robust <= 0.95 && robust - ml >= 0.20 &&
                    longest <= 1800.0;
  return {pass, "ML " + fmt(ml) + " (band [0.30, 0.60]), robust " + fmt(robust) + " (band [0.75, 0.95]), gap " +
                    fmt(robust - ml) + " (>= 0.20), longest run " + fmt(longest, 4) + " s"};
}

Outcome fig5(const Usps& usps) {
  const double eps = 5.0 / 2048;
  double longest = 0.0;
  const double ml = seed_mean(usps, "fig5_ml", AttackKind::flip, eps, &longest);
  const double ta1 = seed_mean(usps, "fig5_robust_ta1", AttackKind::flip, eps, &longest);
  const double ta8 = seed_mean(usps, "fig5_robust_ta8", AttackKind::flip, eps, &longest);
  const bool pass = ml >= 0.20 && ml <= 0.50 && ta1 >= 0.45 && ta1 <= 0.75 && ta8 >= 0.65 && ta8 <= 0.90 &&
                    ml < ta1 && ta1 < ta8 && longest <= 1800.0;
  return {pass, "ML " + fmt(ml) + " (band [0.20, 0.50]), T_A=1 " + fmt(ta1) + " (band [0.45, 0.75]), T_A=8 " +
                    fmt(ta8) + " (band [0.65, 0.90]), longest run " + fmt(longest, 4) + " s"};
}

Outcome fig3(const Usps& usps) {
  const auto t0 = Clock::now();
  const ExperimentReport rate = run_experiment(preset(usps, "fig3_rate_encoding", kSeeds[0]));
  const double t_rate = seconds_since(t0);
  const auto t1 = Clock::now();
  const ExperimentReport time = run_experiment(preset(usps, "fig3_time_encoding", kSeeds[0]));
  const double t_time = seconds_since(t1);
  bool pass = std::max(t_rate, t_time) <= 1800.0;
  std::string detail;
  for (double eps : preset(usps, "fig3_rate_encoding", kSeeds[0]).sweep_epsilons) {
    const double a = accuracy_at(time, AttackKind::remove, eps);
    const double b = accuracy_at(rate, AttackKind::remove, eps);
    pass = pass && a <= b;
    detail += "eps=" + fmt(eps) + " time " + fmt(a) + " rate " + fmt(b) + "; ";
  }
  return {pass, detail + "longest run " + fmt(std::max(t_rate, t_time), 4) + " s"};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  const auto usps = find_usps();
  auto needs_usps = [&](Outcome (*f)(const Usps&)) {
    return [f, &usps]() -> Outcome {
      if (!usps) return {false, "USPS not available (set PSNN_USPS_DIR to a directory with usps and usps.t)"};
      return f(*usps);
    };
  };
  const std::vector<Criterion> criteria{
      {1, "gradient checks", gradient_checks},
      {2, "normalization", normalization},
      {3, "greedy-step oracle", greedy_oracle},
      {4, "incremental-likelihood oracle", incremental},
      {5, "budget/feasibility invariants", fuzz_invariants},
      {6, "convexity of rate NLL", convexity},
      {7, "zero-budget adversarial training", zero_budget_robust},
      {8, "attack comparison, fig2 presets", needs_usps(fig2)},
      {9, "robust vs ML training, fig4 presets", needs_usps(fig4)},
      {10, "attack time support, fig5 presets", needs_usps(fig5)},
      {11, "time vs rate encoding, fig3 presets", needs_usps(fig3)},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << c.id << " (" << c.name << "): " << o.detail
              << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
