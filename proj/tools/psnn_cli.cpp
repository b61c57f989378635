// Experiment driver: train, robust-train, attack, eval and sweep subcommands.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "psnn/experiment.hpp"

namespace fs = std::filesystem;
using namespace psnn;

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<int> workers;
  std::optional<std::string> dataset_path;
};

void add_common(CLI::App* app, CommonFlags& f) {
  app->add_option("--config", f.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
  app->add_option("--seed", f.seed, "override the config seed");
  app->add_option("--out-dir", f.out_dir, "output directory");
  app->add_option("--workers", f.workers, "worker threads")->check(CLI::PositiveNumber);
  app->add_option("--dataset-path", f.dataset_path, "directory holding the USPS files 'usps' and 'usps.t'");
}

ExperimentConfig load(const CommonFlags& f) {
  json overrides = json::object();
  if (f.seed) overrides["seed"] = *f.seed;
  if (f.out_dir) overrides["output_dir"] = *f.out_dir;
  if (f.workers) overrides["workers"] = *f.workers;
  if (f.dataset_path) {
    overrides["dataset"]["train_path"] = (fs::path(*f.dataset_path) / "usps").string();
    overrides["dataset"]["test_path"] = (fs::path(*f.dataset_path) / "usps.t").string();
  }
  return load_experiment_config(f.config, overrides);
}

fs::path out_file(const ExperimentConfig& cfg, const std::string& name) {
  fs::create_directories(cfg.output_dir);
  return fs::path(cfg.output_dir) / name;
}

void write_log(const ExperimentConfig& cfg, const TrainingLog& log) {
  std::ofstream os(out_file(cfg, "training_log.csv"));
  write_provenance(os, "training log", cfg);
  write_training_log_csv(os, log);
}

std::string checkpoint_path(const ExperimentConfig& cfg, const std::string& flag) {
  return flag.empty() ? out_file(cfg, "model.ckpt").string() : flag;
}

ModelParams load_model(const ExperimentConfig& cfg, const std::string& path) {
  Checkpoint ck = load_checkpoint(path);
  if (ck.params.dims.horizon != cfg.encoder.horizon || ck.params.dims.num_outputs != cfg.train.dims.num_outputs)
    throw ConfigError("checkpoint " + path + " does not match the config dimensions");
  if (ck.rule != cfg.decoder.rule) throw ConfigError("checkpoint " + path + " was trained for another decoding rule");
  return std::move(ck.params);
}

int run_train(const CommonFlags& flags, std::optional<TrainingMethod> method) {
  ExperimentConfig cfg = load(flags);
  if (method) cfg.method = *method;
  const bool has_attack = cfg.source.contains("training") && cfg.source.at("training").contains("attack");
  if (cfg.method == TrainingMethod::robust && !has_attack)
    throw ConfigError("training.attack: required for robust-train");
  const EncodedData data = load_and_encode(cfg);
  const TrainResult tr = train_model(cfg, data.train);
  const auto ck = out_file(cfg, "model.ckpt");
  save_checkpoint(ck.string(), tr.params, cfg.decoder.rule);
  write_log(cfg, tr.log);
  const double acc = evaluate_accuracy(tr.params, data.test, cfg.decoder, cfg.workers);
  std::cout << "epochs=" << tr.log.epochs.size() << " best_epoch=" << tr.log.best_epoch
            << " learning_rate=" << tr.log.learning_rate
            << " validation_accuracy=" << tr.log.best_validation_accuracy << " test_accuracy=" << acc
            << " checkpoint=" << ck.string() << '\n';
  return 0;
}

int run_eval(const CommonFlags& flags, const std::string& ckpt) {
  const ExperimentConfig cfg = load(flags);
  const ModelParams params = load_model(cfg, checkpoint_path(cfg, ckpt));
  const EncodedData data = load_and_encode(cfg);
  const double acc = evaluate_accuracy(params, data.test, cfg.decoder, cfg.workers);
  std::cout << std::setprecision(17) << "accuracy=" << acc << " n_examples=" << data.test.size() << '\n';
  return 0;
}

int run_attack(const CommonFlags& flags, const std::string& ckpt, std::size_t index, const std::string& kind,
               const std::string& epsilon, int time_support) {
  const ExperimentConfig cfg = load(flags);
  const ModelParams params = load_model(cfg, checkpoint_path(cfg, ckpt));
  const EncodedData data = load_and_encode(cfg);
  if (index >= data.test.size()) throw ConfigError("--index: only " + std::to_string(data.test.size()) + " test examples");
  AttackSpec spec;
  spec.kind = parse_attack_kind(kind);
  spec.epsilon = detail::parse_epsilon(json(epsilon), "--epsilon");
  spec.time_support = time_support;
  spec.seed = cfg.seed;
  const LabeledExample& ex = data.test[index];
  SpikeTrain adv;
  std::optional<AttackResult> result;
  if (is_random(spec.kind)) {
    Rng rng = make_stream(cfg.seed, {0xa77ac4, static_cast<std::uint64_t>(spec.kind), index});
    adv = random_perturb(ex.input, spec, rng);
  } else {
    result = greedy_attack(params, ex.input, ex.label, spec, cfg.decoder.rule);
    adv = result->adversarial;
  }
  {
    std::ofstream os(out_file(cfg, "attack_input.txt"));
    write_raster(os, ex.input);
  }
  {
    std::ofstream os(out_file(cfg, "attack_raster.txt"));
    write_raster(os, adv);
  }
  if (result) {
    std::ofstream os(out_file(cfg, "attack_trace.csv"));
    write_provenance(os, "attack trace", cfg);
    os << "# kind=" << to_string(spec.kind) << " epsilon=" << std::setprecision(17) << spec.epsilon
       << " time_support=" << resolved_time_support(spec, cfg.encoder.horizon) << " index=" << index << '\n';
    write_attack_trace_csv(os, *result);
  }
  std::cout << "label=" << ex.label << " clean_prediction=" << decode(params, ex.input, cfg.decoder)
            << " adversarial_prediction=" << decode(params, adv, cfg.decoder)
            << " hamming=" << hamming_distance(ex.input, adv);
  if (result) std::cout << " target=" << result->target << " steps=" << result->trace.size();
  std::cout << '\n';
  return 0;
}

int run_sweep(const CommonFlags& flags, const std::string& ckpt) {
  const ExperimentConfig cfg = load(flags);
  if (cfg.sweep_kinds.empty() || cfg.sweep_epsilons.empty())
    throw ConfigError("sweep: config needs sweep.kinds and sweep.epsilons");
  std::optional<ModelParams> pretrained;
  if (!ckpt.empty()) pretrained = load_model(cfg, ckpt);
  const ExperimentReport report = run_experiment(cfg, pretrained ? &*pretrained : nullptr);
  if (!pretrained) write_log(cfg, report.log);
  const auto path = out_file(cfg, "report.csv");
  std::ofstream os(path);
  write_report_csv(os, report);
  std::cout << "clean_accuracy=" << report.clean_accuracy << " rows=" << report.rows.size()
            << " report=" << path.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Probabilistic SNN training and adversarial attack experiments"};
  app.require_subcommand(1);

  CommonFlags train_flags, robust_flags, eval_flags, attack_flags, sweep_flags;
  auto* train = app.add_subcommand("train", "maximum-likelihood training");
  add_common(train, train_flags);
  auto* robust = app.add_subcommand("robust-train", "adversarial training");
  add_common(robust, robust_flags);

  std::string eval_ckpt;
  auto* eval = app.add_subcommand("eval", "test accuracy of a checkpoint");
  add_common(eval, eval_flags);
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint (default <out-dir>/model.ckpt)");

  std::string attack_ckpt, attack_kind = "flip", attack_eps = "0";
  std::size_t attack_index = 0;
  int attack_ta = 0;
  auto* attack = app.add_subcommand("attack", "attack one test example and dump the rasters and trace");
  add_common(attack, attack_flags);
  attack->add_option("--checkpoint", attack_ckpt, "checkpoint (default <out-dir>/model.ckpt)");
  attack->add_option("--index", attack_index, "test example index (0-based)");
  attack->add_option("--kind", attack_kind, "add|remove|flip|random_add|random_remove|random_flip");
  attack->add_option("--epsilon", attack_eps, "budget fraction, number or a/b");
  attack->add_option("--time-support", attack_ta, "T_A (0 = full horizon)")->check(CLI::NonNegativeNumber);

  std::string sweep_ckpt;
  auto* sweep = app.add_subcommand("sweep", "train (unless --checkpoint) and sweep attacks; writes report.csv");
  add_common(sweep, sweep_flags);
  sweep->add_option("--checkpoint", sweep_ckpt, "evaluate this checkpoint instead of training");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) return run_train(train_flags, TrainingMethod::ml);
    if (*robust) return run_train(robust_flags, TrainingMethod::robust);
    if (*eval) return run_eval(eval_flags, eval_ckpt);
    if (*attack) return run_attack(attack_flags, attack_ckpt, attack_index, attack_kind, attack_eps, attack_ta);
    if (*sweep) return run_sweep(sweep_flags, sweep_ckpt);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
