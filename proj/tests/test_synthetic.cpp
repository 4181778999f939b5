#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "jtens/joint_loss.hpp"
#include "jtens/synthetic.hpp"
#include "jtens/trainer.hpp"

using namespace jtens;

namespace {

bool bitwise_equal(const DataSplit& a, const DataSplit& b) {
  if (a.features.rows() != b.features.rows() || a.features.cols() != b.features.cols())
    return false;
  if ((a.features.array() != b.features.array()).any()) return false;
  if (a.labels.size() != b.labels.size() || a.labels != b.labels) return false;
  if (a.targets.size() != b.targets.size()) return false;
  if (a.targets.size() > 0 && (a.targets.array() != b.targets.array()).any()) return false;
  return true;
}

}  // namespace

TEST_CASE("the same seed regenerates the same blobs, a different seed does not") {
  const RawDataset a = gaussian_blobs(3, 4, 2.0, 100, 50, 42);
  const RawDataset b = gaussian_blobs(3, 4, 2.0, 100, 50, 42);
  CHECK(bitwise_equal(a.train, b.train));
  CHECK(bitwise_equal(a.test, b.test));
  const RawDataset c = gaussian_blobs(3, 4, 2.0, 100, 50, 43);
  CHECK_FALSE(bitwise_equal(a.train, c.train));
}

TEST_CASE("the same seed regenerates the same sine data") {
  const RawDataset a = noisy_sine(80, 40, 0.1, 7);
  const RawDataset b = noisy_sine(80, 40, 0.1, 7);
  CHECK(a.regression);
  CHECK(bitwise_equal(a.train, b.train));
  CHECK(bitwise_equal(a.test, b.test));
  CHECK_FALSE(bitwise_equal(a.train, noisy_sine(80, 40, 0.1, 8).train));
}

TEST_CASE("blob shapes, flags, and provenance are as requested") {
  const RawDataset data = gaussian_blobs(4, 6, 1.5, 30, 20, 1);
  CHECK(data.train.features.rows() == 30);
  CHECK(data.train.features.cols() == 6);
  CHECK(data.test.features.rows() == 20);
  CHECK(data.num_classes == 4);
  CHECK_FALSE(data.regression);
  CHECK(data.train.labels.minCoeff() >= 0);
  CHECK(data.train.labels.maxCoeff() < 4);
  CHECK(data.provenance.find("blobs") == 0);
}

TEST_CASE("class priors are uniform up to binomial noise") {
  const Eigen::Index n = 4000;
  const RawDataset data = gaussian_blobs(4, 2, 2.0, n, 1, 3);
  std::vector<int> counts(4, 0);
  for (Eigen::Index i = 0; i < n; ++i) ++counts[static_cast<std::size_t>(data.train.labels(i))];
  // Each frequency should sit within ~4.4 sigma of 1/4,
  // sigma = sqrt(p(1-p)/n) ~ 0.0068.
  for (int c : counts) CHECK(std::abs(static_cast<double>(c) / static_cast<double>(n) - 0.25) < 0.03);
}

TEST_CASE("well-separated blobs are learnable by a bare linear model") {
  const RawDataset raw = gaussian_blobs(3, 2, 50.0, 300, 150, 9);
  const DatasetBundle data = split_and_normalize(raw, 0, 11);
  const auto family = DistributionFamily::categorical(3);
  const EnsembleModel init = init_ensemble(mlp_spec(2, {}, 3), 1, family, 5);
  SgdConfig sgd;
  sgd.learning_rate = 0.5;
  sgd.batch_size = 50;
  TrainOptions options;
  options.epochs = 10;
  options.seed = 4;
  const TrainResult run = train_independent(init, data, sgd, options);
  CHECK(run.trace.epochs.back().ensemble_train_err < 0.01);
  CHECK(run.trace.epochs.back().ensemble_test_err < 0.01);
}

TEST_CASE("blob centers sit where the circle construction puts them") {
  // With separation s and K classes, class k is centered at
  // s*(cos, sin)(2*pi*k/K) in the first two dimensions; extra dimensions are
  // zero-mean noise. Class-conditional sample means should agree to ~5/sqrt(n).
  const double s = 6.0;
  const Eigen::Index n = 8000;
  const RawDataset data = gaussian_blobs(3, 3, s, n, 1, 13);
  for (int k = 0; k < 3; ++k) {
    Eigen::Vector3d sum = Eigen::Vector3d::Zero();
    int count = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (data.train.labels(i) != k) continue;
      sum += data.train.features.row(i).transpose();
      ++count;
    }
    REQUIRE(count > 100);
    const Eigen::Vector3d mean = sum / count;
    const double angle = 2.0 * std::numbers::pi * k / 3.0;
    CHECK(std::abs(mean(0) - s * std::cos(angle)) < 0.15);
    CHECK(std::abs(mean(1) - s * std::sin(angle)) < 0.15);
    CHECK(std::abs(mean(2)) < 0.15);
  }
}

TEST_CASE("noiseless sine targets equal the sine of their inputs exactly") {
  const RawDataset data = noisy_sine(200, 100, 0.0, 21);
  for (Eigen::Index i = 0; i < data.train.features.rows(); ++i) {
    const double x = data.train.features(i, 0);
    CHECK(x >= 0.0);
    CHECK(x < 1.0);
    CHECK(data.train.targets(i) == std::sin(2.0 * std::numbers::pi * x));
  }
}

TEST_CASE("sine noise has roughly the requested scale") {
  const double noise = 0.1;
  const Eigen::Index n = 5000;
  const RawDataset data = noisy_sine(n, 1, noise, 33);
  double ss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double resid =
        data.train.targets(i) - std::sin(2.0 * std::numbers::pi * data.train.features(i, 0));
    ss += resid * resid;
  }
  const double sd = std::sqrt(ss / static_cast<double>(n));
  CHECK(sd > 0.5 * noise);
  CHECK(sd < 2.0 * noise);
}

TEST_CASE("impossible generator requests are rejected up front") {
  CHECK_THROWS_AS(gaussian_blobs(1, 2, 1.0, 10, 10, 0), ConfigError);
  CHECK_THROWS_AS(gaussian_blobs(2, 0, 1.0, 10, 10, 0), ConfigError);
  CHECK_THROWS_AS(gaussian_blobs(3, 1, 1.0, 10, 10, 0), ConfigError);
  CHECK_THROWS_AS(gaussian_blobs(2, 2, -1.0, 10, 10, 0), ConfigError);
  CHECK_THROWS_AS(gaussian_blobs(2, 2, 1.0, 0, 10, 0), ConfigError);
  CHECK_THROWS_AS(gaussian_blobs(2, 2, 1.0, 10, 0, 0), ConfigError);
  CHECK_THROWS_AS(noisy_sine(0, 10, 0.1, 0), ConfigError);
  CHECK_THROWS_AS(noisy_sine(10, 10, -0.1, 0), ConfigError);
}
