#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <string>
#include <vector>

#include "jtens/analysis.hpp"
#include "jtens/checkpoint.hpp"
#include "jtens/csv.hpp"
#include "jtens/diagnostics.hpp"
#include "jtens/sweep.hpp"

namespace {

using namespace jtens;

// --config is honored before the flag pass so that explicit flags override
// file values, which in turn override the built-in defaults.
std::string config_path_from_argv(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--config" && i + 1 < argc) return argv[i + 1];
    const std::string prefix = "--config=";
    if (arg.rfind(prefix, 0) == 0) return arg.substr(prefix.size());
  }
  return "";
}

void add_common_options(CLI::App* cmd, ExperimentConfig& config, std::string& config_file) {
  cmd->add_option("--config", config_file, "JSON config file (defaults < file < flags)");
  cmd->add_option("--members", config.members, "ensemble size M");
  cmd->add_option("--hidden", config.hidden_sizes, "hidden layer widths")->delimiter(',');
  cmd->add_option("--family", config.family, "categorical | gaussian");
  cmd->add_option("--trainer", config.trainer, "joint | independent | bagging");
  cmd->add_option("--lambdas", config.lambdas, "lambda grid")->delimiter(',');
  cmd->add_option("--seeds", config.seeds, "training seeds")->delimiter(',');
  cmd->add_option("--epochs", config.epochs, "training epochs");
  cmd->add_option("--learning-rate", config.sgd.learning_rate, "SGD learning rate");
  cmd->add_option("--momentum", config.sgd.momentum, "SGD momentum");
  cmd->add_option("--weight-decay", config.sgd.weight_decay, "L2 penalty on weights");
  cmd->add_option("--batch-size", config.sgd.batch_size, "mini-batch size");
  cmd->add_option("--lr-grid", config.learning_rate_grid,
                  "learning rates tried per lambda (picked by validation error)")
      ->delimiter(',');
  cmd->add_option("--dataset", config.dataset.source, "blobs | sine | idx | csv");
  cmd->add_option("--blob-classes", config.dataset.blob_classes, "blob class count");
  cmd->add_option("--blob-dim", config.dataset.blob_dim, "blob feature dimension");
  cmd->add_option("--blob-separation", config.dataset.blob_separation,
                  "blob center circle radius");
  cmd->add_option("--sine-noise", config.dataset.sine_noise, "sine noise std");
  cmd->add_option("--train-count", config.dataset.train_count, "synthetic training examples");
  cmd->add_option("--test-count", config.dataset.test_count, "synthetic test examples");
  cmd->add_option("--idx-train-images", config.dataset.idx_train_images, "IDX image file");
  cmd->add_option("--idx-train-labels", config.dataset.idx_train_labels, "IDX label file");
  cmd->add_option("--idx-test-images", config.dataset.idx_test_images, "IDX image file");
  cmd->add_option("--idx-test-labels", config.dataset.idx_test_labels, "IDX label file");
  cmd->add_option("--csv-train", config.dataset.csv_train, "training CSV");
  cmd->add_option("--csv-test", config.dataset.csv_test, "test CSV");
  cmd->add_option("--label-column", config.dataset.label_column, "CSV label column name");
  cmd->add_option("--validation-count", config.dataset.validation_count,
                  "training examples held out for validation");
  cmd->add_option("--data-seed", config.dataset.data_seed, "dataset generation/split seed");
  cmd->add_option("--output-dir", config.output_dir, "artifact directory");
  cmd->add_option("--parallelism", config.parallelism, "concurrent runs in a sweep");
  cmd->add_option("--probe-epoch", config.diagnostics.dominance_probe_epoch,
                  "dominance probe epoch");
  cmd->add_option("--dominance-threshold", config.diagnostics.dominance_threshold,
                  "min/median ratio below which dominance is flagged");
  cmd->add_option("--robustness-repeats", config.diagnostics.robustness_repeats,
                  "resamplings per robustness keep count");
  cmd->add_option("--keep-counts", config.diagnostics.keep_counts,
                  "robustness keep counts (default 1..M)")
      ->delimiter(',');
}

void print_summary(const SweepResult& result) {
  std::printf("%s\n", summary_csv_header().c_str());
  for (const SummaryRow& r : result.rows)
    std::printf("%.4g,%.4g,%d,%d,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%.4g,%.6g,%.6g\n",
                r.lambda, r.chosen_lr, r.runs_ok, r.runs_failed, r.mean_test_error,
                r.stderr_test_error, r.mean_ensemble_kl, r.stderr_ensemble_kl,
                r.mean_avg_member_kl, r.stderr_avg_member_kl, r.mean_diversity,
                r.stderr_diversity, r.dominance_flag_rate, r.mean_robustness_half_error,
                r.stderr_robustness_half_error);
  std::printf("artifacts: %s%s\n", result.dir.c_str(),
              result.reused ? " (already complete, reused)" : "");
}

EnsembleModel load_model(const std::string& path) {
  std::string tag;
  std::vector<Checkpoint> members = load_ensemble_checkpoint(path, &tag);
  EnsembleModel model;
  model.family = family_from_tag(tag);
  for (Checkpoint& c : members) model.members.push_back(std::move(c.mlp));
  return model;
}

int run_train(const ExperimentConfig& config) {
  ExperimentConfig single = config;
  single.lambdas = {config.lambdas.front()};
  single.seeds = {config.seeds.front()};
  single.learning_rate_grid.clear();  // train uses --learning-rate as given
  const SweepResult result = run_sweep(single);
  print_summary(result);
  // A sweep tolerates per-run gaps; a single training run has nothing to
  // aggregate over, so its failure is the command's failure.
  for (const RunRecord& run : result.runs) {
    if (run.ok) continue;
    std::fprintf(stderr, "run failed: %s\n", run.error.c_str());
    if (run.error_kind == "config") return 1;
    if (run.error_kind == "numeric") return 3;
    return 2;
  }
  return 0;
}

int run_sweep_verb(const ExperimentConfig& config) {
  const SweepResult result = run_sweep(config);
  print_summary(result);
  return 0;
}

int run_evaluate(const ExperimentConfig& config, const std::string& ensemble_path) {
  const EnsembleModel model = load_model(ensemble_path);
  const DatasetBundle data = dataset_from_config(config);
  const EvalResult eval = evaluate(model, data.test, data.regression, data.num_classes);
  std::printf("test_error %.6g\n", eval.error_rate);
  std::printf("ensemble_kl %.6g\n", eval.mean_kl);
  std::printf("avg_member_kl %.6g\n", eval.avg_member_kl);
  std::printf("diversity %.6g\n", eval.diversity);
  for (Eigen::Index j = 0; j < eval.per_member_errors.size(); ++j)
    std::printf("member_%lld_test_error %.6g\n", static_cast<long long>(j),
                eval.per_member_errors(j));
  return 0;
}

int run_robustness(const ExperimentConfig& config, const std::string& ensemble_path,
                   const std::string& out_path) {
  const EnsembleModel model = load_model(ensemble_path);
  const DatasetBundle data = dataset_from_config(config);
  std::vector<Eigen::Index> keeps = config.diagnostics.keep_counts;
  if (keeps.empty())
    for (Eigen::Index k = 1; k <= static_cast<Eigen::Index>(model.members.size()); ++k)
      keeps.push_back(k);
  const RobustnessCurve curve =
      robustness_curve(model, data.test, keeps, config.diagnostics.robustness_repeats,
                       config.dataset.data_seed);
  if (!out_path.empty()) {
    write_robustness_csv(out_path, curve);
    std::printf("wrote %s\n", out_path.c_str());
    return 0;
  }
  std::printf("keep_count,mean_error,std_error\n");
  for (std::size_t k = 0; k < curve.keep_counts.size(); ++k)
    std::printf("%lld,%.6g,%.6g\n", static_cast<long long>(curve.keep_counts[k]),
                curve.mean_error(static_cast<Eigen::Index>(k)),
                curve.std_error(static_cast<Eigen::Index>(k)));
  return 0;
}

int run_dominance(const ExperimentConfig& config, const std::string& trace_path) {
  const TrainingTrace trace = trace_from_csv(trace_path);
  const DominanceReport report =
      detect_dominance(trace, config.diagnostics.dominance_probe_epoch,
                       config.diagnostics.dominance_threshold);
  std::printf("probe_epoch %d\n", report.probe_epoch);
  std::printf("dominance_ratio %.6g\n", report.dominance_ratio);
  std::printf("flagged %s\n", report.flagged ? "yes" : "no");
  std::printf("probe_best_member %lld\n", static_cast<long long>(report.probe_best_member));
  std::printf("end_best_member %lld\n",
              static_cast<long long>(report.end_of_training_best_member));
  std::printf("member_errors_at_probe");
  for (Eigen::Index j = 0; j < report.member_errors_at_probe.size(); ++j)
    std::printf(" %.6g", report.member_errors_at_probe(j));
  std::printf("\n");
  return 0;
}

int run_verify(std::uint64_t seed) {
  const std::vector<IdentityCheck> checks = run_verification_suite(seed);
  bool all_passed = true;
  for (const IdentityCheck& c : checks) {
    std::printf("[%s] %-52s deviation %.3e  tolerance %.1e\n", c.passed ? "PASS" : "FAIL",
                c.name.c_str(), c.deviation, c.tolerance);
    all_passed = all_passed && c.passed;
  }
  std::printf("%zu/%zu identity checks passed\n",
              static_cast<std::size_t>(
                  std::count_if(checks.begin(), checks.end(),
                                [](const IdentityCheck& c) { return c.passed; })),
              checks.size());
  if (!all_passed) throw NumericError("identity verification failed");
  return 0;
}

int run_param_count(const ExperimentConfig& config, Eigen::Index input_dim,
                    Eigen::Index classes) {
  if (input_dim == 0) {
    if (config.dataset.source == "blobs") input_dim = config.dataset.blob_dim;
    else if (config.dataset.source == "sine") input_dim = 1;
    else throw ConfigError("param-count: pass --input-dim for idx/csv datasets");
  }
  if (classes == 0) {
    classes = config.family == "gaussian" ? 1 : config.dataset.blob_classes;
  }
  const std::vector<LayerSpec> spec = mlp_spec(input_dim, config.hidden_sizes, classes);
  const std::int64_t per_member = param_count(spec);
  std::printf("per_member_parameters %lld\n", static_cast<long long>(per_member));
  std::printf("members %lld\n", static_cast<long long>(config.members));
  std::printf("total_parameters %lld\n",
              static_cast<long long>(per_member * config.members));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  ExperimentConfig config;
  std::string config_file;  // consumed before the flag pass; see config_path_from_argv
  std::string ensemble_path;
  std::string trace_path;
  std::string out_path;
  std::uint64_t verify_seed = 20260816ULL;
  Eigen::Index input_dim = 0;
  Eigen::Index classes = 0;

  CLI::App app{"Train, sweep, and probe ensembles under a tunable joint loss"};
  app.require_subcommand(1);

  CLI::App* train_cmd =
      app.add_subcommand("train", "one training run (first lambda, first seed)");
  CLI::App* sweep_cmd = app.add_subcommand("sweep", "full (lambda x seed) grid with summary");
  CLI::App* eval_cmd = app.add_subcommand("evaluate", "evaluate a saved ensemble on the test split");
  CLI::App* robust_cmd =
      app.add_subcommand("robustness", "member-dropping curve for a saved ensemble");
  CLI::App* dom_cmd = app.add_subcommand("dominance", "dominance probe over a trace.csv");
  CLI::App* verify_cmd =
      app.add_subcommand("verify", "run every built-in identity and gradient check");
  CLI::App* param_cmd = app.add_subcommand("param-count", "parameter count for the architecture");

  for (CLI::App* cmd : {train_cmd, sweep_cmd, eval_cmd, robust_cmd, dom_cmd, param_cmd})
    add_common_options(cmd, config, config_file);
  eval_cmd->add_option("--ensemble", ensemble_path, "ensemble.json path")->required();
  robust_cmd->add_option("--ensemble", ensemble_path, "ensemble.json path")->required();
  robust_cmd->add_option("--out", out_path, "write the curve CSV here instead of stdout");
  dom_cmd->add_option("--trace", trace_path, "trace.csv path")->required();
  verify_cmd->add_option("--seed", verify_seed, "seed for the randomized checks");
  param_cmd->add_option("--input-dim", input_dim, "input dimension (default: from dataset)");
  param_cmd->add_option("--classes", classes, "output classes (default: from dataset)");

  try {
    const std::string config_path = config_path_from_argv(argc, argv);
    if (!config_path.empty()) config = load_config(config_path);

    app.parse(argc, argv);

    if (const char* env_dir = std::getenv("JTENS_OUTPUT_DIR"))
      if (*env_dir) config.output_dir = env_dir;
    validate(config);

    if (*train_cmd) return run_train(config);
    if (*sweep_cmd) return run_sweep_verb(config);
    if (*eval_cmd) return run_evaluate(config, ensemble_path);
    if (*robust_cmd) return run_robustness(config, ensemble_path, out_path);
    if (*dom_cmd) return run_dominance(config, trace_path);
    if (*verify_cmd) return run_verify(verify_seed);
    if (*param_cmd) return run_param_count(config, input_dim, classes);
    return 1;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 2;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
