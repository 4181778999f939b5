#pragma once

#include <Eigen/Dense>

#include <cstdint>

#include "jtens/dataset.hpp"

// Deterministic synthetic datasets for fast, reproducible experiments:
// gaussian blobs for classification and a noisy sine for regression.

namespace jtens {

// K unit-variance gaussian clusters with centers spaced evenly on a circle
// of radius `separation` in the first two feature dimensions; any further
// dimensions are pure noise. Class priors are uniform. With two classes a
// single dimension works (centers at +-separation); three or more classes
// need at least two dimensions to keep the centers apart.
RawDataset gaussian_blobs(Eigen::Index classes, Eigen::Index dim, double separation,
                          Eigen::Index train_count, Eigen::Index test_count,
                          std::uint64_t seed);

// x uniform on [0, 1], target sin(2*pi*x) plus gaussian noise of the given
// standard deviation. Single feature, real-valued target.
RawDataset noisy_sine(Eigen::Index train_count, Eigen::Index test_count, double noise,
                      std::uint64_t seed);

}  // namespace jtens
