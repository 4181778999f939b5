#include "jtens/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "jtens/rng.hpp"

namespace jtens {

namespace {

constexpr Eigen::Index kEvalBatch = 2048;

Eigen::MatrixXd gather_rows(const Eigen::MatrixXd& m, const std::vector<Eigen::Index>& rows,
                            std::size_t begin, std::size_t end) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(end - begin), m.cols());
  for (std::size_t i = begin; i < end; ++i)
    out.row(static_cast<Eigen::Index>(i - begin)) = m.row(rows[i]);
  return out;
}

// Accumulates evaluation statistics over a split in fixed-size chunks.
struct SplitStats {
  double ensemble_err = 0.0;
  double ensemble_kl = 0.0;
  double avg_member_kl = 0.0;
  double diversity = 0.0;
  Eigen::VectorXd member_err;
};

SplitStats eval_split(const EnsembleModel& model, const DataSplit& split, bool regression,
                      Eigen::Index num_classes) {
  const Eigen::Index n = split.size();
  const Eigen::Index m = static_cast<Eigen::Index>(model.members.size());
  SplitStats stats;
  stats.member_err = Eigen::VectorXd::Zero(m);
  if (n == 0) return stats;

  for (Eigen::Index start = 0; start < n; start += kEvalBatch) {
    const Eigen::Index len = std::min(kEvalBatch, n - start);
    const Eigen::MatrixXd x = split.features.middleRows(start, len);
    std::vector<Eigen::MatrixXd> logits(m);
    for (Eigen::Index j = 0; j < m; ++j) logits[j] = forward(model.members[j], x);
    const Eigen::MatrixXd eta_bar = combine_logits_rows(logits);

    if (regression) {
      const Eigen::VectorXd y = split.targets.segment(start, len);
      stats.ensemble_kl += 0.5 * (eta_bar.col(0) - y).squaredNorm();
      for (Eigen::Index j = 0; j < m; ++j) {
        const double kl = 0.5 * (logits[j].col(0) - y).squaredNorm();
        stats.avg_member_kl += kl;
        stats.member_err(j) += kl;
        stats.diversity += 0.5 * (logits[j].col(0) - eta_bar.col(0)).squaredNorm();
      }
    } else {
      const Eigen::MatrixXd log_q_bar = log_softmax_rows(eta_bar);
      std::vector<Eigen::MatrixXd> log_q(m);
      for (Eigen::Index j = 0; j < m; ++j) log_q[j] = log_softmax_rows(logits[j]);
      for (Eigen::Index i = 0; i < len; ++i) {
        const int label = split.labels(start + i);
        if (argmax_row(eta_bar.row(i)) != label) stats.ensemble_err += 1.0;
        stats.ensemble_kl += -log_q_bar(i, label);
        for (Eigen::Index j = 0; j < m; ++j) {
          if (argmax_row(logits[j].row(i)) != label) stats.member_err(j) += 1.0;
          stats.avg_member_kl += -log_q[j](i, label);
          double div = 0.0;
          for (Eigen::Index k = 0; k < num_classes; ++k)
            div += std::exp(log_q_bar(i, k)) * (log_q_bar(i, k) - log_q[j](i, k));
          stats.diversity += div;
        }
      }
    }
  }

  const double dn = static_cast<double>(n);
  const double dm = static_cast<double>(m);
  stats.ensemble_err /= dn;
  stats.ensemble_kl /= dn;
  stats.avg_member_kl /= dn * dm;
  stats.diversity /= dn * dm;
  stats.member_err /= dn;
  if (regression) stats.ensemble_err = stats.ensemble_kl;
  return stats;
}

// Per-member gradient of the batch-mean loss at the logit layer.
using LogitGradFn = std::function<std::vector<Eigen::MatrixXd>(
    const Eigen::MatrixXd& targets, const std::vector<Eigen::MatrixXd>& member_logits)>;

struct Snapshot {
  std::vector<Mlp> members;
  std::vector<MomentumState> momentum;
};

TrainResult run_training_loop(const EnsembleModel& init, const DatasetBundle& data,
                              const SgdConfig& sgd, const TrainOptions& options,
                              const LogitGradFn& logit_grads, double trace_lambda,
                              const std::string& trainer_name) {
  if (options.epochs < 1) throw ConfigError("train: epochs must be positive");
  if (sgd.batch_size < 1) throw ConfigError("train: batch size must be positive");
  const auto t0 = std::chrono::steady_clock::now();

  EnsembleModel model = init;
  const Eigen::Index m = static_cast<Eigen::Index>(model.members.size());
  const Eigen::Index n = data.train.size();
  const Eigen::MatrixXd targets = target_matrix(data.train, data.regression, data.num_classes);

  std::vector<MomentumState> momentum(m);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});

  TrainingTrace trace;
  trace.manifest.trainer = trainer_name;
  trace.manifest.lambda = trace_lambda;
  trace.manifest.members = m;
  trace.manifest.sgd = sgd;
  trace.manifest.epochs = options.epochs;
  trace.manifest.seed = options.seed;

  const bool has_validation = data.validation.size() > 0;
  double best_val = std::numeric_limits<double>::infinity();
  Snapshot best;
  double lr = sgd.learning_rate;

  for (int epoch = 1; epoch <= options.epochs; ++epoch) {
    if (std::find(options.schedule.decay_epochs.begin(), options.schedule.decay_epochs.end(),
                  epoch) != options.schedule.decay_epochs.end())
      lr *= options.schedule.factor;
    SgdConfig step_cfg = sgd;
    step_cfg.learning_rate = lr;

    // One shared shuffle per epoch, identical across members.
    std::mt19937_64 rng(derive_seed(options.seed, static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), rng);

    for (Eigen::Index start = 0; start < n; start += sgd.batch_size) {
      const std::size_t b0 = static_cast<std::size_t>(start);
      const std::size_t b1 = static_cast<std::size_t>(std::min(start + sgd.batch_size, n));
      const Eigen::MatrixXd x = gather_rows(data.train.features, order, b0, b1);
      const Eigen::MatrixXd t = gather_rows(targets, order, b0, b1);

      std::vector<ForwardCache> caches(m);
      std::vector<Eigen::MatrixXd> logits(m);
      for (Eigen::Index j = 0; j < m; ++j) {
        try {
          logits[j] = forward(model.members[j], x, &caches[j]);
        } catch (const NumericError& e) {
          throw NumericError("epoch " + std::to_string(epoch) + ", member " +
                             std::to_string(j) + ": " + e.what());
        }
      }
      const std::vector<Eigen::MatrixXd> grads = logit_grads(t, logits);
      for (Eigen::Index j = 0; j < m; ++j) {
        const Gradients g = backward(model.members[j], caches[j], grads[j]);
        try {
          sgd_step(model.members[j], g, momentum[j], step_cfg);
        } catch (const NumericError& e) {
          throw NumericError("epoch " + std::to_string(epoch) + ", member " +
                             std::to_string(j) + ": " + e.what());
        }
      }
    }

    const SplitStats train_stats = eval_split(model, data.train, data.regression, data.num_classes);
    const SplitStats test_stats = eval_split(model, data.test, data.regression, data.num_classes);

    EpochStats es;
    es.epoch = epoch;
    es.lambda = trace_lambda;
    es.ensemble_kl = train_stats.ensemble_kl;
    es.avg_member_kl = train_stats.avg_member_kl;
    es.diversity = train_stats.diversity;
    es.ensemble_train_err = train_stats.ensemble_err;
    es.ensemble_test_err = test_stats.ensemble_err;
    es.member_train_err = train_stats.member_err;
    es.member_test_err = test_stats.member_err;
    if (has_validation) {
      const SplitStats val_stats =
          eval_split(model, data.validation, data.regression, data.num_classes);
      es.ensemble_val_err = val_stats.ensemble_err;
    } else {
      es.ensemble_val_err = std::numeric_limits<double>::quiet_NaN();
    }
    if (!std::isfinite(es.ensemble_kl) || !std::isfinite(es.avg_member_kl))
      throw NumericError("epoch " + std::to_string(epoch) + ": training loss diverged");
    trace.epochs.push_back(std::move(es));

    if (has_validation && trace.epochs.back().ensemble_val_err < best_val) {
      best_val = trace.epochs.back().ensemble_val_err;
      best.members = model.members;
      best.momentum = momentum;
      trace.best_epoch = epoch;
    }
  }

  if (!has_validation || trace.best_epoch == 0) {
    trace.best_epoch = options.epochs;
    best.members = model.members;
    best.momentum = momentum;
  }

  trace.manifest.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  TrainResult result;
  result.model.family = model.family;
  result.model.members = std::move(best.members);
  result.momentum = std::move(best.momentum);
  result.trace = std::move(trace);
  return result;
}

}  // namespace

EnsembleModel init_ensemble(const std::vector<LayerSpec>& member_spec, Eigen::Index members,
                            const DistributionFamily& family, std::uint64_t seed) {
  if (members < 1) throw ConfigError("ensemble: need at least one member");
  if (member_spec.empty() || member_spec.back().output_dim != family.arity())
    throw ConfigError("ensemble: member output dim must match family arity");
  EnsembleModel model;
  model.family = family;
  model.members.reserve(static_cast<std::size_t>(members));
  for (Eigen::Index j = 0; j < members; ++j)
    model.members.push_back(init_mlp(member_spec, derive_seed(seed, static_cast<std::uint64_t>(j))));
  return model;
}

TrainResult train(const EnsembleModel& init, const DatasetBundle& data,
                  const JointLossConfig& config, const SgdConfig& sgd,
                  const TrainOptions& options) {
  if (static_cast<Eigen::Index>(init.members.size()) != config.members)
    throw ConfigError("train: ensemble size does not match loss config");
  const DistributionFamily family = init.family;
  const LogitGradFn grads = [family, config](const Eigen::MatrixXd& t,
                                             const std::vector<Eigen::MatrixXd>& logits) {
    return joint_loss_grad_logits(family, t, logits, config);
  };
  return run_training_loop(init, data, sgd, options, grads, config.lambda, "joint");
}

TrainResult train_independent(const EnsembleModel& init, const DatasetBundle& data,
                              const SgdConfig& sgd, const TrainOptions& options) {
  const DistributionFamily family = init.family;
  const LogitGradFn grads = [family](const Eigen::MatrixXd& t,
                                     const std::vector<Eigen::MatrixXd>& logits) {
    const double scale = 1.0 / static_cast<double>(t.rows());
    std::vector<Eigen::MatrixXd> out;
    out.reserve(logits.size());
    for (const auto& eta : logits) {
      if (family.kind == FamilyKind::GaussianUnitVariance)
        out.push_back((eta - t) * scale);
      else
        out.push_back((softmax_rows(eta) - t) * scale);
    }
    return out;
  };
  return run_training_loop(init, data, sgd, options, grads, 0.0, "independent");
}

std::vector<Eigen::Index> bootstrap_indices(Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<Eigen::Index> dist(0, n - 1);
  std::vector<Eigen::Index> out(static_cast<std::size_t>(n));
  for (auto& i : out) i = dist(rng);
  return out;
}

TrainResult train_bagging(const EnsembleModel& init, const DatasetBundle& data,
                          const SgdConfig& sgd, const TrainOptions& options) {
  const Eigen::Index m = static_cast<Eigen::Index>(init.members.size());
  TrainResult result;
  result.model.family = init.family;
  result.momentum.resize(static_cast<std::size_t>(m));

  for (Eigen::Index j = 0; j < m; ++j) {
    const auto rows = bootstrap_indices(
        data.train.size(), derive_seed(options.seed, 0x6261u, static_cast<std::uint64_t>(j)));
    DatasetBundle member_data = data;
    member_data.train.features.resize(data.train.size(), data.train.features.cols());
    if (data.regression)
      member_data.train.targets.resize(data.train.size());
    else
      member_data.train.labels.resize(data.train.size());
    for (Eigen::Index i = 0; i < data.train.size(); ++i) {
      member_data.train.features.row(i) = data.train.features.row(rows[static_cast<std::size_t>(i)]);
      if (data.regression)
        member_data.train.targets(i) = data.train.targets(rows[static_cast<std::size_t>(i)]);
      else
        member_data.train.labels(i) = data.train.labels(rows[static_cast<std::size_t>(i)]);
    }

    EnsembleModel single;
    single.family = init.family;
    single.members.push_back(init.members[static_cast<std::size_t>(j)]);
    TrainOptions member_options = options;
    member_options.seed = derive_seed(options.seed, 0x626201u, static_cast<std::uint64_t>(j));
    TrainResult r = train_independent(single, member_data, sgd, member_options);
    result.model.members.push_back(std::move(r.model.members.front()));
    result.momentum[static_cast<std::size_t>(j)] = std::move(r.momentum.front());
  }

  result.trace.manifest.trainer = "bagging";
  result.trace.manifest.members = m;
  result.trace.manifest.sgd = sgd;
  result.trace.manifest.epochs = options.epochs;
  result.trace.manifest.seed = options.seed;
  result.trace.best_epoch = options.epochs;
  return result;
}

StackingResult train_stacking(const EnsembleModel& trained, const DatasetBundle& data,
                              const SgdConfig& sgd, const TrainOptions& options) {
  if (data.regression) throw ConfigError("stacking: classification only");
  const Eigen::Index m = static_cast<Eigen::Index>(trained.members.size());
  const Eigen::Index k = trained.family.num_classes;

  StackingResult result;
  result.combiner.spec = {{m * k, k, Activation::Identity}};
  Layer layer;
  layer.weights = Eigen::MatrixXd::Zero(k, m * k);
  for (Eigen::Index j = 0; j < m; ++j)
    layer.weights.middleCols(j * k, k) =
        Eigen::MatrixXd::Identity(k, k) / static_cast<double>(m);
  layer.biases = Eigen::VectorXd::Zero(k);
  result.combiner.layers.push_back(std::move(layer));

  const Eigen::Index n = data.train.size();
  const Eigen::MatrixXd targets = target_matrix(data.train, false, k);
  const Eigen::MatrixXd val_targets = target_matrix(data.validation, false, k);

  // Meta-features: concatenated member logits, computed from frozen members.
  const auto meta_features = [&](const DataSplit& split) {
    const auto logits = member_logits_for_split(trained, split);
    Eigen::MatrixXd meta(split.size(), m * k);
    for (Eigen::Index j = 0; j < m; ++j) meta.middleCols(j * k, k) = logits[static_cast<std::size_t>(j)];
    return meta;
  };
  const Eigen::MatrixXd train_meta = meta_features(data.train);
  const Eigen::MatrixXd val_meta = meta_features(data.validation);

  MomentumState momentum;
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});

  const auto ce_loss = [&](const Eigen::MatrixXd& meta, const Eigen::MatrixXd& t) {
    if (t.rows() == 0) return std::numeric_limits<double>::quiet_NaN();
    const Eigen::MatrixXd out = forward(result.combiner, meta);
    return categorical_kl_rows(t, log_softmax_rows(out)).mean();
  };

  double best_val = std::numeric_limits<double>::infinity();
  Mlp best = result.combiner;
  for (int epoch = 1; epoch <= options.epochs; ++epoch) {
    std::mt19937_64 rng(derive_seed(options.seed, 0x737461u, static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), rng);
    for (Eigen::Index start = 0; start < n; start += sgd.batch_size) {
      const std::size_t b0 = static_cast<std::size_t>(start);
      const std::size_t b1 = static_cast<std::size_t>(std::min(start + sgd.batch_size, n));
      const Eigen::MatrixXd x = gather_rows(train_meta, order, b0, b1);
      const Eigen::MatrixXd t = gather_rows(targets, order, b0, b1);
      ForwardCache cache;
      const Eigen::MatrixXd out = forward(result.combiner, x, &cache);
      const Eigen::MatrixXd dlogits =
          (softmax_rows(out) - t) / static_cast<double>(t.rows());
      sgd_step(result.combiner, backward(result.combiner, cache, dlogits), momentum, sgd);
    }
    StackingEpoch se;
    se.epoch = epoch;
    se.train_loss = ce_loss(train_meta, targets);
    se.val_loss = ce_loss(val_meta, val_targets);
    result.epochs.push_back(se);
    if (data.validation.size() > 0 && se.val_loss < best_val) {
      best_val = se.val_loss;
      best = result.combiner;
      result.best_epoch = epoch;
    }
  }
  if (data.validation.size() == 0 || result.best_epoch == 0)
    result.best_epoch = options.epochs;
  else
    result.combiner = std::move(best);
  return result;
}

std::vector<Eigen::MatrixXd> member_logits_for_split(const EnsembleModel& model,
                                                     const DataSplit& split) {
  const Eigen::Index m = static_cast<Eigen::Index>(model.members.size());
  std::vector<Eigen::MatrixXd> logits(static_cast<std::size_t>(m));
  for (Eigen::Index j = 0; j < m; ++j) {
    logits[static_cast<std::size_t>(j)].resize(split.size(), model.members[static_cast<std::size_t>(j)].output_dim());
    for (Eigen::Index start = 0; start < split.size(); start += kEvalBatch) {
      const Eigen::Index len = std::min(kEvalBatch, split.size() - start);
      logits[static_cast<std::size_t>(j)].middleRows(start, len) =
          forward(model.members[static_cast<std::size_t>(j)], split.features.middleRows(start, len));
    }
  }
  return logits;
}

Eigen::Index argmax_row(const Eigen::RowVectorXd& row) {
  Eigen::Index best = 0;
  for (Eigen::Index k = 1; k < row.size(); ++k)
    if (row(k) > row(best)) best = k;
  return best;
}

EvalResult evaluate(const EnsembleModel& model, const DataSplit& split, bool regression,
                    Eigen::Index num_classes) {
  const SplitStats stats = eval_split(model, split, regression, num_classes);
  EvalResult out;
  out.error_rate = stats.ensemble_err;
  out.mean_kl = stats.ensemble_kl;
  out.avg_member_kl = stats.avg_member_kl;
  out.diversity = stats.diversity;
  out.per_member_errors = stats.member_err;
  return out;
}

EvalResult evaluate_stacked(const EnsembleModel& model, const Mlp& combiner,
                            const DataSplit& split, bool regression, Eigen::Index num_classes) {
  if (regression) throw ConfigError("stacking: classification only");
  const Eigen::Index m = static_cast<Eigen::Index>(model.members.size());
  const Eigen::Index k = num_classes;
  const auto logits = member_logits_for_split(model, split);
  Eigen::MatrixXd meta(split.size(), m * k);
  for (Eigen::Index j = 0; j < m; ++j) meta.middleCols(j * k, k) = logits[static_cast<std::size_t>(j)];
  const Eigen::MatrixXd out = forward(combiner, meta);
  const Eigen::MatrixXd log_q = log_softmax_rows(out);

  EvalResult result;
  result.per_member_errors = Eigen::VectorXd::Zero(m);
  for (Eigen::Index i = 0; i < split.size(); ++i) {
    const int label = split.labels(i);
    if (argmax_row(out.row(i)) != label) result.error_rate += 1.0;
    result.mean_kl += -log_q(i, label);
    for (Eigen::Index j = 0; j < m; ++j)
      if (argmax_row(logits[static_cast<std::size_t>(j)].row(i)) != label)
        result.per_member_errors(j) += 1.0;
  }
  const double dn = static_cast<double>(split.size());
  result.error_rate /= dn;
  result.mean_kl /= dn;
  result.per_member_errors /= dn;
  return result;
}

}  // namespace jtens
