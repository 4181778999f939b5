#include "jtens/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "jtens/rng.hpp"

namespace jtens {

namespace {

double median_of(Eigen::VectorXd values) {
  std::sort(values.data(), values.data() + values.size());
  const Eigen::Index n = values.size();
  return n % 2 == 1 ? values(n / 2) : 0.5 * (values(n / 2 - 1) + values(n / 2));
}

Eigen::Index argmin_of(const Eigen::VectorXd& values) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < values.size(); ++i)
    if (values(i) < values(best)) best = i;
  return best;
}

}  // namespace

std::vector<Eigen::Index> sample_without_replacement(Eigen::Index total, Eigen::Index count,
                                                     std::mt19937_64& rng) {
  if (count < 0 || count > total) throw ConfigError("sample: count outside [0, total]");
  std::vector<Eigen::Index> pool(static_cast<std::size_t>(total));
  for (Eigen::Index i = 0; i < total; ++i) pool[static_cast<std::size_t>(i)] = i;
  for (Eigen::Index t = 0; t < count; ++t) {
    const Eigen::Index pick =
        t + static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(total - t));
    std::swap(pool[static_cast<std::size_t>(t)], pool[static_cast<std::size_t>(pick)]);
  }
  pool.resize(static_cast<std::size_t>(count));
  return pool;
}

DominanceReport detect_dominance(const TrainingTrace& trace, int probe_epoch, double threshold) {
  if (trace.epochs.empty()) throw ConfigError("dominance: empty trace");
  const Eigen::Index m = trace.epochs.front().member_train_err.size();
  if (m < 2) throw ConfigError("dominance: undefined for fewer than two members");
  if (probe_epoch < 1 || static_cast<std::size_t>(probe_epoch) > trace.epochs.size())
    throw ConfigError("dominance: trace has " + std::to_string(trace.epochs.size()) +
                      " epochs, probe epoch " + std::to_string(probe_epoch) + " out of range");

  DominanceReport report;
  report.probe_epoch = probe_epoch;
  report.member_errors_at_probe =
      trace.epochs[static_cast<std::size_t>(probe_epoch - 1)].member_train_err;

  const double best = report.member_errors_at_probe.minCoeff();
  const double median = median_of(report.member_errors_at_probe);
  report.dominance_ratio = median <= 0.0 ? 1.0 : best / median;
  report.flagged = report.dominance_ratio < threshold;
  report.probe_best_member = argmin_of(report.member_errors_at_probe);
  report.end_of_training_best_member = argmin_of(trace.epochs.back().member_train_err);
  return report;
}

RobustnessCurve robustness_curve(const EnsembleModel& model, const DataSplit& test,
                                 const std::vector<Eigen::Index>& keep_counts, int repeats,
                                 std::uint64_t seed) {
  const Eigen::Index m = static_cast<Eigen::Index>(model.members.size());
  const bool regression = model.family.kind == FamilyKind::GaussianUnitVariance;
  if (keep_counts.empty()) throw ConfigError("robustness: empty keep-count list");
  for (const Eigen::Index k : keep_counts)
    if (k < 1 || k > m)
      throw ConfigError("robustness: keep count " + std::to_string(k) +
                        " outside [1, " + std::to_string(m) + "]");
  if (repeats < 1) throw ConfigError("robustness: repeats must be positive");
  if (test.size() == 0) throw DataError("robustness: empty test split");

  const std::vector<Eigen::MatrixXd> logits = member_logits_for_split(model, test);
  const Eigen::Index n = test.size();

  RobustnessCurve curve;
  curve.keep_counts = keep_counts;
  curve.repeats = repeats;
  curve.mean_error.resize(static_cast<Eigen::Index>(keep_counts.size()));
  curve.std_error.resize(static_cast<Eigen::Index>(keep_counts.size()));

  for (std::size_t ki = 0; ki < keep_counts.size(); ++ki) {
    const Eigen::Index keep = keep_counts[ki];
    Eigen::VectorXd per_repeat(repeats);
    for (int r = 0; r < repeats; ++r) {
      double err = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(r),
                                        static_cast<std::uint64_t>(i)));
        const auto kept = sample_without_replacement(m, keep, rng);
        Eigen::RowVectorXd eta_bar = logits[static_cast<std::size_t>(kept[0])].row(i);
        for (std::size_t j = 1; j < kept.size(); ++j)
          eta_bar += logits[static_cast<std::size_t>(kept[j])].row(i);
        eta_bar /= static_cast<double>(keep);
        if (regression) {
          const double d = eta_bar(0) - test.targets(i);
          err += 0.5 * d * d;
        } else {
          if (argmax_row(eta_bar) != test.labels(i)) err += 1.0;
        }
      }
      per_repeat(r) = err / static_cast<double>(n);
    }
    const double mean = per_repeat.mean();
    curve.mean_error(static_cast<Eigen::Index>(ki)) = mean;
    const double var = (per_repeat.array() - mean).square().sum() /
                       std::max(1.0, static_cast<double>(repeats - 1));
    curve.std_error(static_cast<Eigen::Index>(ki)) =
        std::sqrt(var / static_cast<double>(repeats));
  }
  return curve;
}

DecompositionSeries decomposition_trace(const TrainingTrace& trace) {
  const Eigen::Index n = static_cast<Eigen::Index>(trace.epochs.size());
  DecompositionSeries series;
  series.ensemble_kl.resize(n);
  series.avg_member_kl.resize(n);
  series.diversity.resize(n);
  for (Eigen::Index e = 0; e < n; ++e) {
    const EpochStats& stats = trace.epochs[static_cast<std::size_t>(e)];
    const double residual =
        std::abs(stats.ensemble_kl - (stats.avg_member_kl - stats.diversity));
    if (residual >= 1e-8)
      throw NumericError("decomposition: identity residual " + std::to_string(residual) +
                         " at epoch " + std::to_string(stats.epoch));
    if (stats.diversity < -1e-12)
      throw NumericError("decomposition: negative diversity at epoch " +
                         std::to_string(stats.epoch));
    series.ensemble_kl(e) = stats.ensemble_kl;
    series.avg_member_kl(e) = stats.avg_member_kl;
    series.diversity(e) = stats.diversity;
  }
  return series;
}

}  // namespace jtens
