#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "jtens/config.hpp"
#include "jtens/dataset.hpp"
#include "jtens/trainer.hpp"

// The experiment driver: builds the dataset a config describes, runs the
// (lambda x seed) grid with per-lambda learning-rate selection, and writes a
// self-describing artifact directory:
//
//   <output_dir>/sweep-<hash>/
//     config.json      full config, resolved defaults included
//     summary.csv      one row per lambda, mean and standard error over seeds
//     runs/l<i>-s<j>/  manifest.json, trace.csv, robustness.csv, ensemble.json
//
// The hash covers everything that defines the experiment (not output_dir or
// parallelism), so rerunning a completed sweep finds the finished summary and
// returns without training; partially finished sweeps resume, re-using every
// run whose manifest carries the same hash and an ok status. Failed runs are
// recorded in their manifests and counted in the summary's runs_failed
// column; aggregates skip them.

namespace jtens {

struct RunMetrics {
  double test_error = 0.0;
  double ensemble_kl = 0.0;
  double avg_member_kl = 0.0;
  double diversity = 0.0;
  double dominance_ratio = 1.0;
  bool dominance_flagged = false;
  double robustness_half_error = 0.0;  // mean error keeping ceil(M/2) members
  int best_epoch = 0;
  double chosen_lr = 0.0;
};

struct RunRecord {
  double lambda = 0.0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  std::string error_kind;  // "config" | "data" | "numeric" | "other" when !ok
  RunMetrics metrics;
  std::string dir;  // relative to the sweep directory
};

struct SummaryRow {
  double lambda = 0.0;
  double chosen_lr = 0.0;
  int runs_ok = 0;
  int runs_failed = 0;
  double mean_test_error = 0.0, stderr_test_error = 0.0;
  double mean_ensemble_kl = 0.0, stderr_ensemble_kl = 0.0;
  double mean_avg_member_kl = 0.0, stderr_avg_member_kl = 0.0;
  double mean_diversity = 0.0, stderr_diversity = 0.0;
  double dominance_flag_rate = 0.0;
  double mean_robustness_half_error = 0.0, stderr_robustness_half_error = 0.0;
};

struct SweepResult {
  std::string dir;
  std::vector<SummaryRow> rows;    // one per lambda, in config order
  std::vector<RunRecord> runs;     // lambda-major, seed-minor
  bool reused = false;             // completed sweep found; nothing written
};

SweepResult run_sweep(const ExperimentConfig& config);

// The dataset a config describes, already split and normalized.
DatasetBundle dataset_from_config(const ExperimentConfig& config);

// Canonical columns of summary.csv, also usable for parsing.
std::string summary_csv_header();

}  // namespace jtens
