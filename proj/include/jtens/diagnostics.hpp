#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <vector>

#include "jtens/trainer.hpp"

// Behavioral instruments for trained ensembles: the model-dominance early
// diagnostic (one member races ahead and suppresses the rest), the
// member-dropping robustness curve, and the per-epoch loss decomposition.

namespace jtens {

struct DominanceReport {
  int probe_epoch = 0;
  Eigen::VectorXd member_errors_at_probe;  // training error rates
  double dominance_ratio = 1.0;            // best/median, in [0, 1]
  bool flagged = false;
  Eigen::Index probe_best_member = 0;
  Eigen::Index end_of_training_best_member = 0;
};

// Flags dominance when min/median of the member training errors at the probe
// epoch falls below the threshold, and records whether the probe-epoch best
// member is still the best at the end of training (the effect the probe is
// meant to predict). A zero median (all members already perfect) counts as
// ratio 1: nobody dominates a solved problem. The threshold and probe epoch
// are tunable defaults, not universal constants.
DominanceReport detect_dominance(const TrainingTrace& trace, int probe_epoch = 3,
                                 double threshold = 0.5);

struct RobustnessCurve {
  std::vector<Eigen::Index> keep_counts;
  Eigen::VectorXd mean_error;  // across repeats, per keep count
  Eigen::VectorXd std_error;   // standard error across repeats
  int repeats = 0;
};

// Test error when only m randomly chosen members (fresh subset per test
// example, uniform without replacement) are combined at inference, averaged
// over `repeats` resamplings. Keeping all M members reproduces the full
// evaluation exactly. Deterministic: the subset stream is keyed by
// (seed, repeat, example).
RobustnessCurve robustness_curve(const EnsembleModel& model, const DataSplit& test,
                                 const std::vector<Eigen::Index>& keep_counts, int repeats = 20,
                                 std::uint64_t seed = 0);

// First `count` entries of a Fisher-Yates shuffle over [0, total): a uniform
// sample without replacement. The raw 64-bit stream is reduced by modulo;
// the bias is O(total / 2^64), invisible to any statistical test at these
// sizes, and the output is identical across standard libraries.
std::vector<Eigen::Index> sample_without_replacement(Eigen::Index total, Eigen::Index count,
                                                     std::mt19937_64& rng);

struct DecompositionSeries {
  Eigen::VectorXd ensemble_kl;
  Eigen::VectorXd avg_member_kl;
  Eigen::VectorXd diversity;
};

// Re-exposes the per-epoch decomposition columns of a trace, re-checking the
// identity ensemble = average - diversity (residual < 1e-8) and diversity
// >= -1e-12 at every epoch before returning.
DecompositionSeries decomposition_trace(const TrainingTrace& trace);

}  // namespace jtens
