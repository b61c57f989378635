#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "psnn/adversary.hpp"
#include "psnn/checkpoint.hpp"
#include "psnn/dataset.hpp"
#include "psnn/decoding.hpp"
#include "psnn/encoding.hpp"
#include "psnn/parallel.hpp"
#include "psnn/robust_training.hpp"
#include "psnn/training.hpp"

namespace psnn {

using json = nlohmann::json;

enum class TrainingMethod { ml, robust };

struct ExperimentConfig {
  std::string name = "experiment";
  std::uint64_t seed = 1;
  int workers = 1;
  std::string output_dir = ".";
  DatasetConfig dataset;
  EncoderConfig encoder;
  DecoderConfig decoder;
  TrainingMethod method = TrainingMethod::ml;
  TrainConfig train;
  AttackSpec train_attack;  // robust training only
  std::vector<AttackKind> sweep_kinds;
  std::vector<double> sweep_epsilons;
  json source;  // effective config, used for the config hash
};

struct ReportRow {
  AttackKind kind = AttackKind::flip;
  double epsilon = 0.0;
  double accuracy = 0.0;
  std::size_t n_examples = 0;
  std::uint64_t seed = 0;
};

struct ExperimentReport {
  std::string config_hash;
  std::uint64_t seed = 0;
  double clean_accuracy = 0.0;
  std::vector<ReportRow> rows;
  TrainingLog log;
};

// ---------------------------------------------------------------------------
// config

namespace detail {

[[noreturn]] inline void config_fail(const std::string& field, const std::string& msg) {
  throw ConfigError(field + ": " + msg);
}

inline const json* find(const json& obj, const char* key) {
  if (!obj.is_object()) return nullptr;
  const auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

template <typename T>
T get_or(const json& obj, const char* key, const std::string& path, T fallback) {
  const json* v = find(obj, key);
  if (!v) return fallback;
  try {
    return v->get<T>();
  } catch (const json::exception&) {
    config_fail(path + "." + key, "has the wrong type");
  }
}

// Accepts a number or a fraction string such as "10/2048".
inline double parse_epsilon(const json& v, const std::string& field) {
  double eps = 0.0;
  if (v.is_number()) {
    eps = v.get<double>();
  } else if (v.is_string()) {
    const auto s = v.get<std::string>();
    const auto slash = s.find('/');
    try {
      if (slash == std::string::npos) {
        eps = std::stod(s);
      } else {
        eps = std::stod(s.substr(0, slash)) / std::stod(s.substr(slash + 1));
      }
    } catch (const std::exception&) {
      config_fail(field, "cannot parse epsilon '" + s + "'");
    }
  } else {
    config_fail(field, "epsilon must be a number or a \"a/b\" string");
  }
  if (!(eps >= 0.0 && eps <= 1.0)) config_fail(field, "epsilon must lie in [0, 1]");
  return eps;
}

inline Rule parse_rule(const std::string& s, const std::string& field) {
  if (s == "rate") return Rule::rate;
  if (s == "first_to_spike") return Rule::first_to_spike;
  config_fail(field, "expected \"rate\" or \"first_to_spike\"");
}

inline std::string rule_name(Rule r) { return r == Rule::rate ? "rate" : "first_to_spike"; }

inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

// Parses the JSON experiment schema (see configs/ for annotated presets).
inline ExperimentConfig parse_experiment_config(const json& root) {
  using detail::config_fail;
  using detail::find;
  using detail::get_or;
  if (!root.is_object()) config_fail("config", "top level must be an object");
  ExperimentConfig cfg;
  cfg.source = root;
  cfg.name = get_or<std::string>(root, "name", "config", cfg.name);
  cfg.seed = get_or<std::uint64_t>(root, "seed", "config", cfg.seed);
  cfg.workers = get_or<int>(root, "workers", "config", cfg.workers);
  if (cfg.workers < 1) config_fail("workers", "must be >= 1");
  cfg.output_dir = get_or<std::string>(root, "output_dir", "config", cfg.output_dir);

  const json empty = json::object();
  const json& ds = find(root, "dataset") ? root["dataset"] : empty;
  cfg.dataset.train_path = get_or<std::string>(ds, "train_path", "dataset", "");
  cfg.dataset.test_path = get_or<std::string>(ds, "test_path", "dataset", "");
  cfg.dataset.class_filter = get_or<std::vector<int>>(ds, "classes", "dataset", cfg.dataset.class_filter);
  if (cfg.dataset.class_filter.empty()) config_fail("dataset.classes", "must not be empty");
  for (int d : cfg.dataset.class_filter)
    if (d < 0 || d > 9) config_fail("dataset.classes", "entries must be digits 0..9");

  const json& enc = find(root, "encoder") ? root["encoder"] : empty;
  const auto scheme = get_or<std::string>(enc, "scheme", "encoder", "rate");
  if (scheme == "rate")
    cfg.encoder.scheme = EncodingScheme::rate;
  else if (scheme == "time")
    cfg.encoder.scheme = EncodingScheme::time;
  else
    config_fail("encoder.scheme", "expected \"rate\" or \"time\"");
  cfg.encoder.horizon = get_or<int>(enc, "horizon", "encoder", 16);
  if (cfg.encoder.horizon < 4) config_fail("encoder.horizon", "must be >= 4");
  cfg.encoder.rate_scale = get_or<double>(enc, "rate_scale", "encoder", 0.5);
  if (!(cfg.encoder.rate_scale > 0.0 && cfg.encoder.rate_scale <= 1.0))
    config_fail("encoder.rate_scale", "must lie in (0, 1]");
  cfg.encoder.seed = cfg.seed;

  const int horizon = cfg.encoder.horizon;
  const json& model = find(root, "model") ? root["model"] : empty;
  cfg.train.basis.synaptic_bases = get_or<int>(model, "synaptic_bases", "model", horizon);
  cfg.train.basis.synaptic_span = get_or<int>(model, "synaptic_span", "model", horizon);
  cfg.train.basis.feedback_bases = get_or<int>(model, "feedback_bases", "model", horizon);
  cfg.train.basis.feedback_span = get_or<int>(model, "feedback_span", "model", horizon);
  for (auto [v, f] : {std::pair{cfg.train.basis.synaptic_bases, "model.synaptic_bases"},
                      {cfg.train.basis.synaptic_span, "model.synaptic_span"},
                      {cfg.train.basis.feedback_bases, "model.feedback_bases"},
                      {cfg.train.basis.feedback_span, "model.feedback_span"}})
    if (v < 1) config_fail(f, "must be >= 1");

  const json& dec = find(root, "decoder") ? root["decoder"] : empty;
  cfg.decoder.rule = detail::parse_rule(get_or<std::string>(dec, "rule", "decoder", "rate"), "decoder.rule");
  const auto mode = get_or<std::string>(dec, "mode", "decoder", "score");
  if (mode == "score")
    cfg.decoder.mode = DecodeMode::score;
  else if (mode == "sampled")
    cfg.decoder.mode = DecodeMode::sampled;
  else
    config_fail("decoder.mode", "expected \"score\" or \"sampled\"");
  cfg.decoder.num_samples = get_or<int>(dec, "num_samples", "decoder", 1);
  if (cfg.decoder.num_samples < 1) config_fail("decoder.num_samples", "must be >= 1");
  cfg.decoder.seed = cfg.seed;

  const json& tr = find(root, "training") ? root["training"] : empty;
  const auto method = get_or<std::string>(tr, "method", "training", "ml");
  if (method == "ml")
    cfg.method = TrainingMethod::ml;
  else if (method == "robust")
    cfg.method = TrainingMethod::robust;
  else
    config_fail("training.method", "expected \"ml\" or \"robust\"");
  cfg.train.rule = cfg.decoder.rule;
  cfg.train.learning_rate = get_or<double>(tr, "learning_rate", "training", 1e-3);
  if (!(cfg.train.learning_rate >= 0.0)) config_fail("training.learning_rate", "must be nonnegative");
  cfg.train.lr_candidates = get_or<std::vector<double>>(tr, "lr_candidates", "training", {});
  for (double lr : cfg.train.lr_candidates)
    if (!(lr >= 0.0)) config_fail("training.lr_candidates", "entries must be nonnegative");
  cfg.train.max_epochs = get_or<int>(tr, "max_epochs", "training", 200);
  if (cfg.train.max_epochs < 1) config_fail("training.max_epochs", "must be >= 1");
  cfg.train.holdout_fraction = get_or<double>(tr, "holdout_fraction", "training", 0.2);
  if (!(cfg.train.holdout_fraction > 0.0 && cfg.train.holdout_fraction < 1.0))
    config_fail("training.holdout_fraction", "must lie in (0, 1)");
  cfg.train.patience = get_or<int>(tr, "patience", "training", cfg.train.max_epochs);
  if (cfg.train.patience < 1) config_fail("training.patience", "must be >= 1");
  cfg.train.init_range = get_or<double>(tr, "init_range", "training", 1.0);
  if (!(cfg.train.init_range >= 0.0)) config_fail("training.init_range", "must be nonnegative");
  cfg.train.seed = cfg.seed;
  cfg.train.workers = cfg.workers;
  cfg.train.dims = {kUspsPixels, static_cast<int>(sorted_class_filter(cfg.dataset.class_filter).size()),
                    horizon};
  if (const json* att = find(tr, "attack")) {
    cfg.train_attack.kind = parse_attack_kind(get_or<std::string>(*att, "kind", "training.attack", "flip"));
    if (is_random(cfg.train_attack.kind)) config_fail("training.attack.kind", "must be add, remove or flip");
    if (const json* e = find(*att, "epsilon")) cfg.train_attack.epsilon = detail::parse_epsilon(*e, "training.attack.epsilon");
    cfg.train_attack.time_support = get_or<int>(*att, "time_support", "training.attack", horizon);
    if (cfg.train_attack.time_support < 1 || cfg.train_attack.time_support > horizon)
      config_fail("training.attack.time_support", "must lie in [1, horizon]");
  } else if (cfg.method == TrainingMethod::robust) {
    config_fail("training.attack", "required when training.method is \"robust\"");
  }

  const json& sw = find(root, "sweep") ? root["sweep"] : empty;
  for (const auto& k : get_or<std::vector<std::string>>(sw, "kinds", "sweep", {})) {
    try {
      cfg.sweep_kinds.push_back(parse_attack_kind(k));
    } catch (const ConfigError&) {
      config_fail("sweep.kinds", "unknown attack kind '" + k + "'");
    }
  }
  if (const json* eps = find(sw, "epsilons")) {
    if (!eps->is_array()) config_fail("sweep.epsilons", "must be an array");
    for (std::size_t n = 0; n < eps->size(); ++n)
      cfg.sweep_epsilons.push_back(detail::parse_epsilon((*eps)[n], "sweep.epsilons[" + std::to_string(n) + "]"));
  }
  return cfg;
}

inline ExperimentConfig load_experiment_config(const std::string& path, const json& overrides = json::object()) {
  std::ifstream is(path);
  if (!is) throw ConfigError("config: cannot open " + path);
  json root;
  try {
    root = json::parse(is, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  root.merge_patch(overrides);
  return parse_experiment_config(root);
}

// Hash of the effective config minus fields that cannot change results
// (worker count, output location).
inline std::string config_hash(const ExperimentConfig& cfg) {
  json canonical = cfg.source;
  canonical.erase("workers");
  canonical.erase("output_dir");
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << detail::fnv1a64(canonical.dump());
  return os.str();
}

// ---------------------------------------------------------------------------
// experiment pieces

inline constexpr std::uint64_t kTestIdOffset = 1ULL << 40;

struct EncodedData {
  std::vector<LabeledExample> train;
  std::vector<LabeledExample> test;
};

inline EncodedData load_and_encode(const ExperimentConfig& cfg) {
  const UspsSplit split = load_usps(cfg.dataset);
  require(!split.train.empty(), "dataset: no training examples for the selected classes");
  require(!split.test.empty(), "dataset: no test examples for the selected classes");
  return {encode_all(split.train, cfg.encoder, 0), encode_all(split.test, cfg.encoder, kTestIdOffset)};
}

inline TrainResult train_model(const ExperimentConfig& cfg, std::span<const LabeledExample> train) {
  if (cfg.method == TrainingMethod::ml) return train_ml(train, cfg.train);
  return adversarial_train(train, RobustConfig{cfg.train, cfg.train_attack});
}

// Accuracy for every (kind, epsilon) pair. Greedy attacks are run once per
// example at the largest budget; smaller budgets are prefixes of that trace
// because each greedy step depends only on the steps before it.
inline std::vector<ReportRow> attack_sweep(const ModelParams& params, std::span<const LabeledExample> test,
                                           const DecoderConfig& decoder, const std::vector<AttackKind>& kinds,
                                           const std::vector<double>& epsilons, std::uint64_t seed, int workers,
                                           int time_support = 0) {
  require(!test.empty(), "attack_sweep: no test examples");
  const int nx = params.dims.num_inputs;
  const int horizon = params.dims.horizon;
  std::vector<ReportRow> rows;
  for (AttackKind kind : kinds) {
    std::vector<int> budgets;
    int max_budget = 0;
    for (double eps : epsilons) {
      budgets.push_back(attack_budget(AttackSpec{kind, eps, time_support, 0}, nx, horizon));
      max_budget = std::max(max_budget, budgets.back());
    }
    // correct[e * n + k]
    std::vector<std::uint8_t> correct(epsilons.size() * test.size(), 0);
    parallel_for(test.size(), workers, [&](std::size_t k) {
      const LabeledExample& ex = test[k];
      if (!is_random(kind)) {
        const AttackResult r =
            greedy_attack(params, ex.input, ex.label,
                          AttackSpec{kind, static_cast<double>(max_budget) / (nx * horizon), time_support, 0},
                          decoder.rule);
        for (std::size_t e = 0; e < epsilons.size(); ++e) {
          const SpikeTrain x = replay_trace(ex.input, r.trace, static_cast<std::size_t>(budgets[e]));
          correct[e * test.size() + k] = decode(params, x, decoder) == ex.label;
        }
      } else {
        for (std::size_t e = 0; e < epsilons.size(); ++e) {
          Rng rng = make_stream(seed, {0xa77ac4, static_cast<std::uint64_t>(kind), e, k});
          const SpikeTrain x = random_perturb(ex.input, AttackSpec{kind, epsilons[e], time_support, seed}, rng);
          correct[e * test.size() + k] = decode(params, x, decoder) == ex.label;
        }
      }
    });
    for (std::size_t e = 0; e < epsilons.size(); ++e) {
      std::size_t hits = 0;
      for (std::size_t k = 0; k < test.size(); ++k) hits += correct[e * test.size() + k];
      rows.push_back({kind, epsilons[e], static_cast<double>(hits) / static_cast<double>(test.size()), test.size(),
                      seed});
    }
  }
  return rows;
}

// Comment lines identifying the run, written at the top of every CSV.
inline void write_provenance(std::ostream& os, const std::string& what, const ExperimentConfig& cfg) {
  os << "# psnn " << what << " v1\n";
  os << "# config_hash=" << config_hash(cfg) << '\n';
  os << "# seed=" << cfg.seed << '\n';
}

// Report CSV: comment header with hash and seed, then
// kind,epsilon,accuracy,n_examples,seed
inline void write_report_csv(std::ostream& os, const ExperimentReport& report) {
  os << "# psnn report v1\n";
  os << "# config_hash=" << report.config_hash << '\n';
  os << "# seed=" << report.seed << '\n';
  os << std::setprecision(17);
  os << "# clean_accuracy=" << report.clean_accuracy << '\n';
  os << "kind,epsilon,accuracy,n_examples,seed\n";
  for (const auto& r : report.rows)
    os << to_string(r.kind) << ',' << r.epsilon << ',' << r.accuracy << ',' << r.n_examples << ',' << r.seed << '\n';
}

inline ExperimentReport run_experiment(const ExperimentConfig& cfg, const ModelParams* pretrained = nullptr) {
  const EncodedData data = load_and_encode(cfg);
  ExperimentReport report;
  report.config_hash = config_hash(cfg);
  report.seed = cfg.seed;
  ModelParams params;
  if (pretrained) {
    params = *pretrained;
  } else {
    TrainResult tr = train_model(cfg, data.train);
    params = std::move(tr.params);
    report.log = std::move(tr.log);
  }
  report.clean_accuracy = evaluate_accuracy(params, data.test, cfg.decoder, cfg.workers);
  report.rows = attack_sweep(params, data.test, cfg.decoder, cfg.sweep_kinds, cfg.sweep_epsilons, cfg.seed,
                             cfg.workers);
  return report;
}

}  // namespace psnn
