#include "jtens/synthetic.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "jtens/rng.hpp"

namespace jtens {

namespace {

void fill_blob_split(DataSplit& split, Eigen::Index n, Eigen::Index classes, Eigen::Index dim,
                     double separation, std::mt19937_64& rng) {
  std::normal_distribution<double> noise(0.0, 1.0);
  split.features.resize(n, dim);
  split.labels.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int label = static_cast<int>(rng() % static_cast<std::uint64_t>(classes));
    const double angle =
        2.0 * std::numbers::pi * static_cast<double>(label) / static_cast<double>(classes);
    split.labels(i) = label;
    for (Eigen::Index j = 0; j < dim; ++j) {
      double center = 0.0;
      if (j == 0) center = separation * std::cos(angle);
      if (j == 1) center = separation * std::sin(angle);
      split.features(i, j) = center + noise(rng);
    }
  }
}

void fill_sine_split(DataSplit& split, Eigen::Index n, double noise_std, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> x_dist(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, noise_std);
  split.features.resize(n, 1);
  split.targets.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x = x_dist(rng);
    split.features(i, 0) = x;
    split.targets(i) = std::sin(2.0 * std::numbers::pi * x) + noise(rng);
  }
}

}  // namespace

RawDataset gaussian_blobs(Eigen::Index classes, Eigen::Index dim, double separation,
                          Eigen::Index train_count, Eigen::Index test_count,
                          std::uint64_t seed) {
  if (classes < 2) throw ConfigError("blobs: need at least two classes");
  if (dim < 1) throw ConfigError("blobs: need at least one dimension");
  if (classes > 2 && dim < 2)
    throw ConfigError("blobs: three or more classes need at least two dimensions");
  if (!(separation >= 0.0)) throw ConfigError("blobs: separation must be non-negative");
  if (train_count < 1 || test_count < 1) throw ConfigError("blobs: empty split requested");

  RawDataset raw;
  raw.num_classes = classes;
  raw.provenance = "blobs(classes=" + std::to_string(classes) + ",dim=" + std::to_string(dim) +
                   ",separation=" + std::to_string(separation) + ")";
  std::mt19937_64 train_rng(derive_seed(seed, 0x62));
  std::mt19937_64 test_rng(derive_seed(seed, 0x63));
  fill_blob_split(raw.train, train_count, classes, dim, separation, train_rng);
  fill_blob_split(raw.test, test_count, classes, dim, separation, test_rng);
  return raw;
}

RawDataset noisy_sine(Eigen::Index train_count, Eigen::Index test_count, double noise,
                      std::uint64_t seed) {
  if (!(noise >= 0.0)) throw ConfigError("sine: noise must be non-negative");
  if (train_count < 1 || test_count < 1) throw ConfigError("sine: empty split requested");

  RawDataset raw;
  raw.regression = true;
  raw.provenance = "sine(noise=" + std::to_string(noise) + ")";
  std::mt19937_64 train_rng(derive_seed(seed, 0x73));
  std::mt19937_64 test_rng(derive_seed(seed, 0x74));
  fill_sine_split(raw.train, train_count, noise, train_rng);
  fill_sine_split(raw.test, test_count, noise, test_rng);
  return raw;
}

}  // namespace jtens
