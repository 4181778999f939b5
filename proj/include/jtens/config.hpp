#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "jtens/errors.hpp"
#include "jtens/net.hpp"

// Experiment configuration: one JSON document drives a whole sweep. Parsing
// applies defaults, rejects unknown keys (typo safety), and validates before
// any training starts; the canonical serialization is embedded verbatim in
// every run manifest so artifacts carry their own provenance.

namespace jtens {

struct DatasetConfig {
  std::string source = "blobs";  // blobs | sine | idx | csv
  Eigen::Index blob_classes = 2;
  Eigen::Index blob_dim = 2;
  double blob_separation = 2.0;
  double sine_noise = 0.1;
  Eigen::Index train_count = 512;
  Eigen::Index test_count = 512;
  std::string idx_train_images;
  std::string idx_train_labels;
  std::string idx_test_images;
  std::string idx_test_labels;
  std::string csv_train;
  std::string csv_test;
  std::string label_column = "label";
  Eigen::Index validation_count = 64;
  std::uint64_t data_seed = 0;
};

struct DiagnosticsConfig {
  int dominance_probe_epoch = 3;
  double dominance_threshold = 0.5;
  int robustness_repeats = 20;
  std::vector<Eigen::Index> keep_counts;  // empty means 1..M
};

struct ExperimentConfig {
  Eigen::Index members = 4;
  std::vector<Eigen::Index> hidden_sizes = {16};
  std::string family = "categorical";  // categorical | gaussian
  std::string trainer = "joint";       // joint | independent | bagging
  std::vector<double> lambdas = {0.0, 0.5, 1.0};
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  int epochs = 20;
  SgdConfig sgd;
  // Chosen per lambda by validation error; empty grid means "use sgd.learning_rate".
  std::vector<double> learning_rate_grid = {0.3, 0.1, 0.03, 0.01};
  DatasetConfig dataset;
  DiagnosticsConfig diagnostics;
  std::string output_dir = "runs";
  int parallelism = 1;
};

// Parses a JSON document over the defaults, then validates. Unknown keys are
// a ConfigError.
ExperimentConfig config_from_json(const std::string& text);

ExperimentConfig load_config(const std::string& path);

// Canonical serialization: fixed key order, every field present.
std::string config_to_json(const ExperimentConfig& config);

// Canonical serialization minus the execution-only knobs (output_dir,
// parallelism); two configs with equal identity describe the same sweep.
std::string config_identity(const ExperimentConfig& config);

void validate(const ExperimentConfig& config);

// FNV-1a, the hash behind sweep idempotence.
std::uint64_t fnv1a64(const std::string& text);

}  // namespace jtens
