// Fast acceptance gate: every closed-form identity the library rests on,
// checked against an independent numerical oracle at full instance counts,
// plus the exact training-equivalence guarantee at lambda = 0. One line per
// criterion; the process exits non-zero if any criterion fails. Runs in well
// under two minutes.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "jtens/analysis.hpp"
#include "jtens/joint_loss.hpp"
#include "jtens/trainer.hpp"

namespace {

using namespace jtens;

constexpr std::uint64_t kSeed = 20260816;

struct CriterionResult {
  std::string label;
  bool passed = false;
  double deviation = 0.0;
  std::string requirement;
};

// Folds a contiguous slice of identity checks into one criterion, reporting
// the sub-check that comes closest to (or crosses) its tolerance.
CriterionResult fold(const std::string& label, const std::vector<IdentityCheck>& checks,
                     std::size_t first, std::size_t count) {
  CriterionResult result;
  result.label = label;
  result.passed = true;
  double worst_ratio = -1.0;
  for (std::size_t i = first; i < first + count; ++i) {
    const IdentityCheck& check = checks.at(i);
    result.passed = result.passed && check.passed;
    const double ratio = check.deviation / check.tolerance;
    if (ratio > worst_ratio) {
      worst_ratio = ratio;
      result.deviation = check.deviation;
      char buf[64];
      std::snprintf(buf, sizeof(buf), "tolerance %.1e", check.tolerance);
      result.requirement = buf;
    }
  }
  return result;
}

// Tiny two-cluster classification set, deterministic in the seed.
DatasetBundle toy_data(Eigen::Index n_train, Eigen::Index n_test, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 0.6);
  const auto fill = [&](DataSplit& split, Eigen::Index n) {
    split.features.resize(n, 2);
    split.labels.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const int label = static_cast<int>(rng() % 2);
      split.features(i, 0) = (label == 0 ? -1.5 : 1.5) + noise(rng);
      split.features(i, 1) = (label == 0 ? -0.5 : 0.5) + noise(rng);
      split.labels(i) = label;
    }
  };
  DatasetBundle data;
  data.num_classes = 2;
  fill(data.train, n_train);
  fill(data.test, n_test);
  return data;
}

// Criterion 8: training the joint loss at lambda = 0 must be bit-identical
// to independent training at learning rate lr/M (M a power of two, so the
// scale factor is exact in floating point).
CriterionResult lambda_zero_equivalence() {
  CriterionResult result;
  result.label = "lambda 0 trains exactly like independent at lr/M";
  result.requirement = "bitwise equality over a 3-epoch run";

  const DatasetBundle data = toy_data(48, 24, 6);
  const auto family = DistributionFamily::categorical(2);
  const Eigen::Index m = 4;
  const EnsembleModel init = init_ensemble(mlp_spec(2, {4}, 2), m, family, 123);

  SgdConfig joint_sgd;
  joint_sgd.learning_rate = 0.2;
  joint_sgd.momentum = 0.9;
  joint_sgd.batch_size = 12;
  SgdConfig indep_sgd = joint_sgd;
  indep_sgd.learning_rate = joint_sgd.learning_rate / static_cast<double>(m);

  TrainOptions options;
  options.epochs = 3;
  options.seed = 11;

  const TrainResult joint_run = train(init, data, JointLossConfig(0.0, m), joint_sgd, options);
  const TrainResult indep_run = train_independent(init, data, indep_sgd, options);

  double worst = 0.0;
  for (std::size_t j = 0; j < static_cast<std::size_t>(m); ++j) {
    const Mlp& a = joint_run.model.members[j];
    const Mlp& b = indep_run.model.members[j];
    for (std::size_t l = 0; l < a.layers.size(); ++l) {
      worst = std::max(worst,
                       (a.layers[l].weights - b.layers[l].weights).cwiseAbs().maxCoeff());
      worst =
          std::max(worst, (a.layers[l].biases - b.layers[l].biases).cwiseAbs().maxCoeff());
    }
  }
  result.deviation = worst;
  result.passed = worst == 0.0;
  return result;
}

void print_result(int index, const CriterionResult& result) {
  std::printf("[%s] criterion %d: %-52s deviation %.3e (%s)\n",
              result.passed ? "PASS" : "FAIL", index, result.label.c_str(), result.deviation,
              result.requirement.c_str());
}

}  // namespace

int main() {
  const std::vector<IdentityCheck> checks = run_verification_suite(kSeed);
  if (checks.size() != 14) {
    std::printf("[FAIL] expected 14 identity checks, found %zu\n", checks.size());
    return 1;
  }

  std::vector<CriterionResult> results;
  results.push_back(fold("joint-loss convex and ambiguity forms agree", checks, 0, 2));
  results.push_back(fold("mean-logit combiner equals geometric mean", checks, 2, 1));
  results.push_back(fold("ambiguity decomposition, diversity non-negative", checks, 3, 2));
  results.push_back(fold("analytic gradients match finite differences", checks, 5, 2));
  results.push_back(fold("stationary spectrum, condition number, saddle", checks, 7, 4));
  results.push_back(fold("coupled losses equal with 1/M-scaled gradients", checks, 11, 2));
  results.push_back(fold("gaussian joint gradient equals the NCL form", checks, 13, 1));
  results.push_back(lambda_zero_equivalence());

  bool all_passed = true;
  for (std::size_t i = 0; i < results.size(); ++i) {
    print_result(static_cast<int>(i + 1), results[i]);
    all_passed = all_passed && results[i].passed;
  }
  std::printf("%zu/%zu criteria passed\n",
              static_cast<std::size_t>(
                  std::count_if(results.begin(), results.end(),
                                [](const CriterionResult& r) { return r.passed; })),
              results.size());
  return all_passed ? 0 : 1;
}
