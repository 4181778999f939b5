#include "jtens/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <thread>
#include <vector>

#include "json.hpp"

#include "jtens/checkpoint.hpp"
#include "jtens/csv.hpp"
#include "jtens/diagnostics.hpp"
#include "jtens/fileio.hpp"
#include "jtens/idx.hpp"
#include "jtens/joint_loss.hpp"
#include "jtens/rng.hpp"
#include "jtens/synthetic.hpp"

namespace jtens {

namespace {

namespace fs = std::filesystem;
using ordered = nlohmann::ordered_json;

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

std::string hex16(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

std::string run_dir_name(std::size_t lambda_index, std::size_t seed_index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "l%02zu-s%02zu", lambda_index, seed_index);
  return buf;
}

double mean_of(const std::vector<double>& values) {
  if (values.empty()) return kNan;
  double sum = 0.0;
  for (const double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

double stderr_of(const std::vector<double>& values) {
  if (values.size() < 2) return kNan;
  const double mean = mean_of(values);
  double ss = 0.0;
  for (const double v : values) ss += (v - mean) * (v - mean);
  const double n = static_cast<double>(values.size());
  return std::sqrt(ss / (n - 1.0) / n);
}

std::vector<Eigen::Index> effective_keep_counts(const ExperimentConfig& config) {
  if (!config.diagnostics.keep_counts.empty()) return config.diagnostics.keep_counts;
  std::vector<Eigen::Index> all;
  for (Eigen::Index k = 1; k <= config.members; ++k) all.push_back(k);
  return all;
}

DistributionFamily family_for(const ExperimentConfig& config, const DatasetBundle& data) {
  if (config.family == "gaussian") return DistributionFamily::gaussian_unit_variance();
  return DistributionFamily::categorical(data.num_classes);
}

TrainResult train_once(const ExperimentConfig& config, const DatasetBundle& data,
                       double lambda, std::uint64_t seed, double lr) {
  const DistributionFamily family = family_for(config, data);
  const std::vector<LayerSpec> spec =
      mlp_spec(data.feature_dim(), config.hidden_sizes, family.arity());
  const EnsembleModel init = init_ensemble(spec, config.members, family, seed);
  SgdConfig sgd = config.sgd;
  sgd.learning_rate = lr;
  TrainOptions options;
  options.epochs = config.epochs;
  options.seed = seed;

  if (config.trainer == "independent") return train_independent(init, data, sgd, options);
  if (config.trainer == "bagging") return train_bagging(init, data, sgd, options);
  return train(init, data, JointLossConfig(lambda, config.members), sgd, options);
}

ordered metrics_to_json(const RunMetrics& m) {
  ordered out;
  out["test_error"] = m.test_error;
  out["ensemble_kl"] = m.ensemble_kl;
  out["avg_member_kl"] = m.avg_member_kl;
  out["diversity"] = m.diversity;
  out["dominance_ratio"] = m.dominance_ratio;
  out["dominance_flagged"] = m.dominance_flagged;
  out["robustness_half_error"] = m.robustness_half_error;
  out["best_epoch"] = m.best_epoch;
  out["chosen_lr"] = m.chosen_lr;
  return out;
}

// NaN has no JSON encoding; nlohmann writes it as null, so read it back.
double number_or_nan(const ordered& j, const char* key) {
  const ordered& v = j.at(key);
  return v.is_null() ? kNan : v.get<double>();
}

RunMetrics metrics_from_json(const ordered& j) {
  RunMetrics m;
  m.test_error = number_or_nan(j, "test_error");
  m.ensemble_kl = number_or_nan(j, "ensemble_kl");
  m.avg_member_kl = number_or_nan(j, "avg_member_kl");
  m.diversity = number_or_nan(j, "diversity");
  m.dominance_ratio = number_or_nan(j, "dominance_ratio");
  m.dominance_flagged = j.at("dominance_flagged").get<bool>();
  m.robustness_half_error = number_or_nan(j, "robustness_half_error");
  m.best_epoch = j.at("best_epoch").get<int>();
  m.chosen_lr = number_or_nan(j, "chosen_lr");
  return m;
}

// The sweep context shared by every job.
struct SweepContext {
  const ExperimentConfig* config = nullptr;
  const DatasetBundle* data = nullptr;
  fs::path sweep_dir;
  std::string hash;
  std::string config_json;
};

void write_run_manifest(const SweepContext& ctx, const fs::path& dir, const RunRecord& record,
                        double wall_seconds) {
  ordered doc;
  doc["status"] = record.ok ? "ok" : "failed";
  doc["error"] = record.error;
  doc["error_kind"] = record.error_kind;
  doc["config_hash"] = ctx.hash;
  doc["lambda"] = record.lambda;
  doc["seed"] = record.seed;
  doc["trainer"] = ctx.config->trainer;
  doc["wall_seconds"] = wall_seconds;
  doc["metrics"] = metrics_to_json(record.metrics);
  doc["config"] = ordered::parse(ctx.config_json);
  write_text_atomic((dir / "manifest.json").string(), doc.dump(2) + "\n");
}

// A finished, matching run from a previous invocation, if its manifest holds.
std::optional<RunRecord> load_existing_run(const SweepContext& ctx, std::size_t lambda_index,
                                           std::size_t seed_index) {
  const fs::path manifest =
      ctx.sweep_dir / "runs" / run_dir_name(lambda_index, seed_index) / "manifest.json";
  if (!fs::exists(manifest)) return std::nullopt;
  try {
    const ordered doc = ordered::parse(read_text_file(manifest.string()));
    if (doc.at("config_hash").get<std::string>() != ctx.hash) return std::nullopt;
    if (doc.at("status").get<std::string>() != "ok") return std::nullopt;
    RunRecord record;
    record.lambda = doc.at("lambda").get<double>();
    record.seed = doc.at("seed").get<std::uint64_t>();
    record.ok = true;
    record.metrics = metrics_from_json(doc.at("metrics"));
    record.dir = "runs/" + run_dir_name(lambda_index, seed_index);
    return record;
  } catch (const std::exception&) {
    return std::nullopt;  // unreadable manifest: redo the run
  }
}

// Evaluates, probes, and writes every artifact for one finished training.
RunRecord finalize_run(const SweepContext& ctx, std::size_t lambda_index,
                       std::size_t seed_index, double lambda, std::uint64_t seed,
                       double chosen_lr, const TrainResult& result) {
  const ExperimentConfig& config = *ctx.config;
  const DatasetBundle& data = *ctx.data;

  RunRecord record;
  record.lambda = lambda;
  record.seed = seed;
  record.dir = "runs/" + run_dir_name(lambda_index, seed_index);

  const EvalResult eval =
      evaluate(result.model, data.test, data.regression, data.num_classes);
  record.metrics.test_error = eval.error_rate;
  record.metrics.ensemble_kl = eval.mean_kl;
  record.metrics.avg_member_kl = eval.avg_member_kl;
  record.metrics.diversity = eval.diversity;
  record.metrics.best_epoch = result.trace.best_epoch;
  record.metrics.chosen_lr = chosen_lr;

  if (config.members >= 2) {
    const DominanceReport dom = detect_dominance(
        result.trace, config.diagnostics.dominance_probe_epoch,
        config.diagnostics.dominance_threshold);
    record.metrics.dominance_ratio = dom.dominance_ratio;
    record.metrics.dominance_flagged = dom.flagged;
  } else {
    record.metrics.dominance_ratio = kNan;
  }

  const std::vector<Eigen::Index> keeps = effective_keep_counts(config);
  const RobustnessCurve curve =
      robustness_curve(result.model, data.test, keeps, config.diagnostics.robustness_repeats,
                       derive_seed(seed, 0x70b));
  const Eigen::Index half = (config.members + 1) / 2;
  record.metrics.robustness_half_error = kNan;
  for (std::size_t k = 0; k < keeps.size(); ++k)
    if (keeps[k] == half)
      record.metrics.robustness_half_error = curve.mean_error(static_cast<Eigen::Index>(k));

  const fs::path dir = ctx.sweep_dir / record.dir;
  fs::create_directories(dir);
  write_trace_csv((dir / "trace.csv").string(), result.trace);
  write_robustness_csv((dir / "robustness.csv").string(), curve);
  std::vector<Checkpoint> members;
  for (std::size_t j = 0; j < result.model.members.size(); ++j)
    members.push_back(Checkpoint{result.model.members[j], result.momentum[j], seed});
  save_ensemble_checkpoint(members, family_tag(result.model.family),
                           (dir / "ensemble.json").string());

  record.ok = true;
  write_run_manifest(ctx, dir, record, result.trace.manifest.wall_seconds);
  return record;
}

RunRecord fail_run(const SweepContext& ctx, std::size_t lambda_index, std::size_t seed_index,
                   double lambda, std::uint64_t seed, double chosen_lr,
                   const std::string& error, const std::string& error_kind) {
  RunRecord record;
  record.lambda = lambda;
  record.seed = seed;
  record.ok = false;
  record.error = error;
  record.error_kind = error_kind;
  record.metrics.chosen_lr = chosen_lr;
  record.metrics.test_error = kNan;
  record.metrics.ensemble_kl = kNan;
  record.metrics.avg_member_kl = kNan;
  record.metrics.diversity = kNan;
  record.metrics.dominance_ratio = kNan;
  record.metrics.robustness_half_error = kNan;
  record.dir = "runs/" + run_dir_name(lambda_index, seed_index);
  const fs::path dir = ctx.sweep_dir / record.dir;
  try {
    fs::create_directories(dir);
    write_run_manifest(ctx, dir, record, 0.0);
  } catch (const std::exception&) {
    // Recording the failure is best-effort; the summary still marks the gap.
  }
  return record;
}

std::string kind_of(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return "config";
  if (dynamic_cast<const DataError*>(&e)) return "data";
  if (dynamic_cast<const NumericError*>(&e)) return "numeric";
  return "other";
}

RunRecord execute_run(const SweepContext& ctx, std::size_t lambda_index,
                      std::size_t seed_index, double lr) {
  const double lambda = ctx.config->lambdas[lambda_index];
  const std::uint64_t seed = ctx.config->seeds[seed_index];
  try {
    const TrainResult result = train_once(*ctx.config, *ctx.data, lambda, seed, lr);
    return finalize_run(ctx, lambda_index, seed_index, lambda, seed, lr, result);
  } catch (const std::exception& e) {
    return fail_run(ctx, lambda_index, seed_index, lambda, seed, lr, e.what(), kind_of(e));
  }
}

// Trains the first seed at every grid learning rate and keeps the run whose
// best epoch has the lowest validation error (ties: earlier grid entry).
// Returns the finished seed-0 record; the chosen rate rides in its metrics.
RunRecord select_lr_and_run(const SweepContext& ctx, std::size_t lambda_index) {
  const ExperimentConfig& config = *ctx.config;
  const double lambda = config.lambdas[lambda_index];
  const std::uint64_t seed = config.seeds[0];

  const bool can_select = !config.learning_rate_grid.empty() &&
                          config.dataset.validation_count > 0;
  if (!can_select) return execute_run(ctx, lambda_index, 0, config.sgd.learning_rate);

  std::optional<TrainResult> best;
  double best_val = 0.0;
  double best_lr = config.sgd.learning_rate;
  std::string last_error = "no learning rate in the grid finished training";
  std::string last_kind = "numeric";
  for (const double lr : config.learning_rate_grid) {
    try {
      TrainResult result = train_once(config, *ctx.data, lambda, seed, lr);
      const double val =
          result.trace.epochs[static_cast<std::size_t>(result.trace.best_epoch - 1)]
              .ensemble_val_err;
      const bool better = !best || (!std::isnan(val) && (std::isnan(best_val) || val < best_val));
      if (better) {
        best = std::move(result);
        best_val = val;
        best_lr = lr;
      }
    } catch (const std::exception& e) {
      last_error = e.what();
      last_kind = kind_of(e);
    }
  }
  if (!best)
    return fail_run(ctx, lambda_index, 0, lambda, seed, config.sgd.learning_rate, last_error,
                    last_kind);
  try {
    return finalize_run(ctx, lambda_index, 0, lambda, seed, best_lr, *best);
  } catch (const std::exception& e) {
    return fail_run(ctx, lambda_index, 0, lambda, seed, best_lr, e.what(), kind_of(e));
  }
}

void run_jobs(int parallelism, std::size_t count, const std::function<void(std::size_t)>& job) {
  if (parallelism <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  const std::size_t workers =
      std::min<std::size_t>(static_cast<std::size_t>(parallelism), count);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      while (true) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        job(i);
      }
    });
  for (std::thread& t : pool) t.join();
}

SummaryRow summarize_lambda(double lambda, const std::vector<RunRecord>& records) {
  SummaryRow row;
  row.lambda = lambda;
  std::vector<double> test_error, ensemble_kl, avg_kl, diversity, robustness;
  int flagged = 0;
  row.chosen_lr = kNan;
  for (const RunRecord& r : records) {
    if (!r.ok) {
      ++row.runs_failed;
      continue;
    }
    ++row.runs_ok;
    row.chosen_lr = r.metrics.chosen_lr;  // identical across seeds of one lambda
    test_error.push_back(r.metrics.test_error);
    ensemble_kl.push_back(r.metrics.ensemble_kl);
    avg_kl.push_back(r.metrics.avg_member_kl);
    diversity.push_back(r.metrics.diversity);
    robustness.push_back(r.metrics.robustness_half_error);
    if (r.metrics.dominance_flagged) ++flagged;
  }
  row.mean_test_error = mean_of(test_error);
  row.stderr_test_error = stderr_of(test_error);
  row.mean_ensemble_kl = mean_of(ensemble_kl);
  row.stderr_ensemble_kl = stderr_of(ensemble_kl);
  row.mean_avg_member_kl = mean_of(avg_kl);
  row.stderr_avg_member_kl = stderr_of(avg_kl);
  row.mean_diversity = mean_of(diversity);
  row.stderr_diversity = stderr_of(diversity);
  row.mean_robustness_half_error = mean_of(robustness);
  row.stderr_robustness_half_error = stderr_of(robustness);
  row.dominance_flag_rate =
      row.runs_ok == 0 ? kNan : static_cast<double>(flagged) / row.runs_ok;
  return row;
}

std::string summary_to_csv(const std::vector<SummaryRow>& rows) {
  std::string out = summary_csv_header() + "\n";
  for (const SummaryRow& r : rows) {
    out += format_g17(r.lambda);
    out += ',' + format_g17(r.chosen_lr);
    out += ',' + std::to_string(r.runs_ok);
    out += ',' + std::to_string(r.runs_failed);
    out += ',' + format_g17(r.mean_test_error);
    out += ',' + format_g17(r.stderr_test_error);
    out += ',' + format_g17(r.mean_ensemble_kl);
    out += ',' + format_g17(r.stderr_ensemble_kl);
    out += ',' + format_g17(r.mean_avg_member_kl);
    out += ',' + format_g17(r.stderr_avg_member_kl);
    out += ',' + format_g17(r.mean_diversity);
    out += ',' + format_g17(r.stderr_diversity);
    out += ',' + format_g17(r.dominance_flag_rate);
    out += ',' + format_g17(r.mean_robustness_half_error);
    out += ',' + format_g17(r.stderr_robustness_half_error);
    out.push_back('\n');
  }
  return out;
}

}  // namespace

std::string summary_csv_header() {
  return "lambda,chosen_lr,runs_ok,runs_failed,mean_test_error,stderr_test_error,"
         "mean_ensemble_kl,stderr_ensemble_kl,mean_avg_member_kl,stderr_avg_member_kl,"
         "mean_diversity,stderr_diversity,dominance_flag_rate,"
         "mean_robustness_half_error,stderr_robustness_half_error";
}

DatasetBundle dataset_from_config(const ExperimentConfig& config) {
  const DatasetConfig& d = config.dataset;
  RawDataset raw;
  if (d.source == "blobs") {
    raw = gaussian_blobs(d.blob_classes, d.blob_dim, d.blob_separation, d.train_count,
                         d.test_count, d.data_seed);
  } else if (d.source == "sine") {
    raw = noisy_sine(d.train_count, d.test_count, d.sine_noise, d.data_seed);
  } else if (d.source == "idx") {
    raw = load_idx_dataset(d.idx_train_images, d.idx_train_labels, d.idx_test_images,
                           d.idx_test_labels);
  } else if (d.source == "csv") {
    const bool regression = config.family == "gaussian";
    RawDataset train = load_csv(d.csv_train, d.label_column, regression);
    const RawDataset test = load_csv(d.csv_test, d.label_column, regression);
    if (train.train.features.cols() != test.train.features.cols())
      throw DataError("csv: train and test files disagree on the feature count");
    train.test = test.train;
    train.num_classes = std::max(train.num_classes, test.num_classes);
    train.provenance = "csv:" + d.csv_train + "+" + d.csv_test;
    raw = std::move(train);
  } else {
    throw ConfigError("config: dataset source must be 'blobs', 'sine', 'idx', or 'csv'");
  }
  return split_and_normalize(raw, d.validation_count, derive_seed(d.data_seed, 0x517));
}

SweepResult run_sweep(const ExperimentConfig& config) {
  validate(config);

  SweepContext ctx;
  ctx.config = &config;
  ctx.config_json = config_to_json(config);
  const std::string identity = config_identity(config);
  ctx.hash = hex16(fnv1a64(identity));
  ctx.sweep_dir = fs::path(config.output_dir) / ("sweep-" + ctx.hash);

  SweepResult result;
  result.dir = ctx.sweep_dir.string();

  const std::size_t n_lambda = config.lambdas.size();
  const std::size_t n_seed = config.seeds.size();

  // A finished sweep: same identity, summary in place. Collect the stored
  // records and return without touching anything.
  if (fs::exists(ctx.sweep_dir / "summary.csv") && fs::exists(ctx.sweep_dir / "config.json")) {
    const ExperimentConfig stored =
        config_from_json(read_text_file((ctx.sweep_dir / "config.json").string()));
    if (config_identity(stored) != identity)
      throw DataError("sweep: directory " + result.dir + " holds a different experiment");
    std::vector<RunRecord> records;
    bool complete = true;
    for (std::size_t li = 0; li < n_lambda && complete; ++li)
      for (std::size_t si = 0; si < n_seed && complete; ++si) {
        // Failed manifests are legitimate members of a finished sweep.
        const fs::path manifest =
            ctx.sweep_dir / "runs" / run_dir_name(li, si) / "manifest.json";
        if (!fs::exists(manifest)) {
          complete = false;
          break;
        }
        if (auto existing = load_existing_run(ctx, li, si)) {
          records.push_back(std::move(*existing));
          continue;
        }
        try {
          const ordered doc = ordered::parse(read_text_file(manifest.string()));
          RunRecord record;
          record.lambda = doc.at("lambda").get<double>();
          record.seed = doc.at("seed").get<std::uint64_t>();
          record.ok = false;
          record.error = doc.at("error").get<std::string>();
          record.error_kind = doc.value("error_kind", "other");
          record.metrics = metrics_from_json(doc.at("metrics"));
          record.dir = "runs/" + run_dir_name(li, si);
          records.push_back(std::move(record));
        } catch (const std::exception&) {
          complete = false;  // unreadable manifest: redo the missing pieces
        }
      }
    if (complete) {
      result.runs = std::move(records);
      for (std::size_t li = 0; li < n_lambda; ++li) {
        std::vector<RunRecord> for_lambda(result.runs.begin() + li * n_seed,
                                          result.runs.begin() + (li + 1) * n_seed);
        result.rows.push_back(summarize_lambda(config.lambdas[li], for_lambda));
      }
      result.reused = true;
      return result;
    }
    // Fall through: the summary exists but runs are missing; redo the sweep.
  }

  const DatasetBundle data = dataset_from_config(config);
  ctx.data = &data;

  fs::create_directories(ctx.sweep_dir / "runs");
  write_text_atomic((ctx.sweep_dir / "config.json").string(), ctx.config_json);

  // Phase A: per lambda, pick the learning rate on the first seed.
  std::vector<RunRecord> seed0(n_lambda);
  std::vector<double> chosen(n_lambda, config.sgd.learning_rate);
  run_jobs(config.parallelism, n_lambda, [&](std::size_t li) {
    if (auto existing = load_existing_run(ctx, li, 0)) {
      seed0[li] = std::move(*existing);
    } else {
      seed0[li] = select_lr_and_run(ctx, li);
    }
    if (seed0[li].ok) chosen[li] = seed0[li].metrics.chosen_lr;
  });

  // Phase B: every remaining (lambda, seed) at the chosen rate.
  std::vector<RunRecord> rest(n_lambda * (n_seed > 0 ? n_seed - 1 : 0));
  if (n_seed > 1) {
    run_jobs(config.parallelism, n_lambda * (n_seed - 1), [&](std::size_t flat) {
      const std::size_t li = flat / (n_seed - 1);
      const std::size_t si = 1 + flat % (n_seed - 1);
      if (auto existing = load_existing_run(ctx, li, si)) {
        rest[flat] = std::move(*existing);
      } else {
        rest[flat] = execute_run(ctx, li, si, chosen[li]);
      }
    });
  }

  for (std::size_t li = 0; li < n_lambda; ++li) {
    std::vector<RunRecord> for_lambda;
    for_lambda.push_back(seed0[li]);
    for (std::size_t si = 1; si < n_seed; ++si)
      for_lambda.push_back(rest[li * (n_seed - 1) + (si - 1)]);
    result.rows.push_back(summarize_lambda(config.lambdas[li], for_lambda));
    for (RunRecord& r : for_lambda) result.runs.push_back(std::move(r));
  }

  write_text_atomic((ctx.sweep_dir / "summary.csv").string(), summary_to_csv(result.rows));
  return result;
}

}  // namespace jtens
