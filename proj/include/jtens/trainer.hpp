#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include "jtens/dataset.hpp"
#include "jtens/joint_loss.hpp"
#include "jtens/net.hpp"

// Training loop for joint, independent, bagged, and stacked ensembles.
// All trainers share one mini-batch engine: a single shuffle per epoch
// applied to every member, analytic gradients at the logit layer, then
// per-member backprop and SGD. Runs are deterministic for a fixed seed.

namespace jtens {

struct EnsembleModel {
  std::vector<Mlp> members;
  DistributionFamily family;
};

// Build M structurally identical members with member-derived seeds.
EnsembleModel init_ensemble(const std::vector<LayerSpec>& member_spec, Eigen::Index members,
                            const DistributionFamily& family, std::uint64_t seed);

struct EpochStats {
  int epoch = 0;  // 1-based
  double lambda = 0.0;
  double ensemble_kl = 0.0;
  double avg_member_kl = 0.0;
  double diversity = 0.0;
  double ensemble_train_err = 0.0;
  double ensemble_val_err = 0.0;  // NaN when there is no validation split
  double ensemble_test_err = 0.0;
  Eigen::VectorXd member_train_err;
  Eigen::VectorXd member_test_err;
};

struct RunManifest {
  std::string trainer = "joint";  // joint | independent | bagging
  double lambda = 0.0;
  Eigen::Index members = 1;
  SgdConfig sgd;
  int epochs = 0;
  std::uint64_t seed = 0;
  std::string init_scheme = "uniform(+-sqrt(6/fan_in)), zero biases";
  double wall_seconds = 0.0;
};

struct TrainingTrace {
  std::vector<EpochStats> epochs;
  int best_epoch = 0;  // 1-based; validation-minimizing epoch, last epoch if no validation
  RunManifest manifest;
};

struct LrSchedule {
  std::vector<int> decay_epochs;  // 1-based epochs at which lr is multiplied by factor
  double factor = 0.1;
};

struct TrainOptions {
  int epochs = 1;
  std::uint64_t seed = 0;  // drives batch shuffling (and bootstraps for bagging)
  LrSchedule schedule;
};

struct TrainResult {
  EnsembleModel model;  // parameters from the best-validation epoch
  std::vector<MomentumState> momentum;
  TrainingTrace trace;
};

// Mini-batch SGD on the joint loss. Early stopping is model selection: the
// returned parameters are those of the epoch with minimal validation error
// (the first such epoch on ties); training always runs all epochs.
TrainResult train(const EnsembleModel& init, const DatasetBundle& data,
                  const JointLossConfig& config, const SgdConfig& sgd,
                  const TrainOptions& options);

// Each member minimizes its own loss D(p || q_j); no interaction except the
// shared batch order. Equivalent to the joint loss at lambda = 0 once the
// learning rate is divided by M.
TrainResult train_independent(const EnsembleModel& init, const DatasetBundle& data,
                              const SgdConfig& sgd, const TrainOptions& options);

// n draws with replacement from [0, n), member-indexed seed.
std::vector<Eigen::Index> bootstrap_indices(Eigen::Index n, std::uint64_t seed);

// Independent training of each member on its own bootstrap resample of the
// training split; combined at inference with combine_logits.
TrainResult train_bagging(const EnsembleModel& init, const DatasetBundle& data,
                          const SgdConfig& sgd, const TrainOptions& options);

struct StackingEpoch {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct StackingResult {
  Mlp combiner;  // single linear layer, M*K meta-features -> K logits
  std::vector<StackingEpoch> epochs;
  int best_epoch = 0;
};

// Trains a linear combiner over the concatenated logits of frozen members.
// Initialized to block averaging (each block I/M), which reproduces
// combine_logits exactly before the first update.
StackingResult train_stacking(const EnsembleModel& trained, const DatasetBundle& data,
                              const SgdConfig& sgd, const TrainOptions& options);

struct EvalResult {
  double error_rate = 0.0;  // classification: argmax mismatch; regression: mean KL
  double mean_kl = 0.0;     // KL of the combined prediction
  double avg_member_kl = 0.0;
  double diversity = 0.0;
  Eigen::VectorXd per_member_errors;
};

// Ensemble prediction via combine_logits; argmax ties break toward the
// lowest class index.
EvalResult evaluate(const EnsembleModel& model, const DataSplit& split, bool regression,
                    Eigen::Index num_classes);

EvalResult evaluate_stacked(const EnsembleModel& model, const Mlp& combiner,
                            const DataSplit& split, bool regression, Eigen::Index num_classes);

// Logits of every member over a split (eval batching, no caches kept).
std::vector<Eigen::MatrixXd> member_logits_for_split(const EnsembleModel& model,
                                                     const DataSplit& split);

Eigen::Index argmax_row(const Eigen::RowVectorXd& row);

}  // namespace jtens
