#include "jtens/dataset.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <vector>

namespace jtens {

namespace {

DataSplit take_rows(const DataSplit& split, const std::vector<Eigen::Index>& rows,
                    bool regression) {
  DataSplit out;
  out.features.resize(static_cast<Eigen::Index>(rows.size()), split.features.cols());
  if (regression)
    out.targets.resize(static_cast<Eigen::Index>(rows.size()));
  else
    out.labels.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.features.row(static_cast<Eigen::Index>(i)) = split.features.row(rows[i]);
    if (regression)
      out.targets(static_cast<Eigen::Index>(i)) = split.targets(rows[i]);
    else
      out.labels(static_cast<Eigen::Index>(i)) = split.labels(rows[i]);
  }
  return out;
}

void apply_normalization(DataSplit& split, const Eigen::VectorXd& mean,
                         const Eigen::VectorXd& std) {
  for (Eigen::Index c = 0; c < split.features.cols(); ++c) {
    const double divisor = std(c) < kStdFloor ? 1.0 : std(c);
    split.features.col(c) = (split.features.col(c).array() - mean(c)) / divisor;
  }
}

}  // namespace

DatasetBundle split_and_normalize(const RawDataset& raw, Eigen::Index validation_count,
                                  std::uint64_t seed) {
  const Eigen::Index n = raw.train.size();
  if (validation_count < 0 || validation_count >= n)
    throw ConfigError("split: validation count must lie in [0, train size)");

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  const std::vector<Eigen::Index> val_rows(order.begin(), order.begin() + validation_count);
  const std::vector<Eigen::Index> train_rows(order.begin() + validation_count, order.end());

  DatasetBundle bundle;
  bundle.regression = raw.regression;
  bundle.num_classes = raw.num_classes;
  bundle.provenance = raw.provenance;
  bundle.split_seed = seed;
  bundle.validation_count = validation_count;
  bundle.train = take_rows(raw.train, train_rows, raw.regression);
  bundle.validation = take_rows(raw.train, val_rows, raw.regression);
  bundle.test = raw.test;

  const Eigen::Index d = bundle.train.features.cols();
  bundle.feature_mean = bundle.train.features.colwise().mean();
  bundle.feature_std.resize(d);
  const double rows = static_cast<double>(bundle.train.size());
  for (Eigen::Index c = 0; c < d; ++c) {
    const double var =
        (bundle.train.features.col(c).array() - bundle.feature_mean(c)).square().sum() / rows;
    bundle.feature_std(c) = std::sqrt(var);
  }

  apply_normalization(bundle.train, bundle.feature_mean, bundle.feature_std);
  apply_normalization(bundle.validation, bundle.feature_mean, bundle.feature_std);
  apply_normalization(bundle.test, bundle.feature_mean, bundle.feature_std);

  if (!bundle.train.features.allFinite() || !bundle.test.features.allFinite())
    throw NumericError("split: non-finite features after normalization");
  return bundle;
}

Eigen::MatrixXd one_hot(const Eigen::VectorXi& labels, Eigen::Index num_classes) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(labels.size(), num_classes);
  for (Eigen::Index i = 0; i < labels.size(); ++i) {
    if (labels(i) < 0 || labels(i) >= num_classes)
      throw DataError("label " + std::to_string(labels(i)) + " outside [0, " +
                      std::to_string(num_classes) + ")");
    out(i, labels(i)) = 1.0;
  }
  return out;
}

Eigen::MatrixXd target_matrix(const DataSplit& split, bool regression,
                              Eigen::Index num_classes) {
  if (regression) return split.targets;
  return one_hot(split.labels, num_classes);
}

}  // namespace jtens
