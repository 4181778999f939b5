#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>

#include "jtens/errors.hpp"

// Dataset containers and the split/normalize step. Features are n x d with
// one example per row. Classification splits carry integer labels in
// [0, K); regression splits carry real-valued targets.

namespace jtens {

struct DataSplit {
  Eigen::MatrixXd features;
  Eigen::VectorXi labels;   // classification
  Eigen::VectorXd targets;  // regression

  Eigen::Index size() const { return features.rows(); }
};

struct RawDataset {
  DataSplit train;
  DataSplit test;
  bool regression = false;
  Eigen::Index num_classes = 0;  // classification only
  std::string provenance;
};

struct DatasetBundle {
  DataSplit train;
  DataSplit validation;
  DataSplit test;
  bool regression = false;
  Eigen::Index num_classes = 0;

  // Normalization stats, computed on the post-split training portion only.
  Eigen::VectorXd feature_mean;
  Eigen::VectorXd feature_std;  // pre-floor values; divisor is 1 where < std_floor

  std::string provenance;
  std::uint64_t split_seed = 0;
  Eigen::Index validation_count = 0;

  Eigen::Index feature_dim() const { return train.features.cols(); }
};

inline constexpr double kStdFloor = 1e-8;

// Shuffles the raw training split with the given seed, holds out
// validation_count examples, computes mean/std on the remaining training rows
// only, and applies them to all three splits. Features with std below the
// floor are centered but not rescaled.
DatasetBundle split_and_normalize(const RawDataset& raw, Eigen::Index validation_count,
                                  std::uint64_t seed);

// One row per example; exact zeros off the hot class.
Eigen::MatrixXd one_hot(const Eigen::VectorXi& labels, Eigen::Index num_classes);

// Target matrix for the loss: one-hot rows (classification) or an n x 1
// column of means (regression).
Eigen::MatrixXd target_matrix(const DataSplit& split, bool regression,
                              Eigen::Index num_classes);

}  // namespace jtens
