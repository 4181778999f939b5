#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <vector>

#include "jtens/errors.hpp"

// Exponential-family plumbing shared by every training and analysis routine:
// link / inverse link, KL divergences, the logit-average / geometric-mean
// ensemble combiners, and the ambiguity decomposition of the ensemble KL.
//
// Conventions: natural parameters ("logits") are plain Eigen vectors; mean
// parameters are probability vectors (Categorical) or scalar means held in a
// length-1 vector (unit-variance Gaussian). Batched variants operate on
// matrices with one example per row.

namespace jtens {

enum class FamilyKind { Categorical, GaussianUnitVariance };

struct DistributionFamily {
  FamilyKind kind = FamilyKind::Categorical;
  Eigen::Index num_classes = 2;  // Categorical only

  static DistributionFamily categorical(Eigen::Index k) {
    if (k < 2) throw ConfigError("categorical family requires at least 2 classes");
    return DistributionFamily{FamilyKind::Categorical, k};
  }
  static DistributionFamily gaussian_unit_variance() {
    return DistributionFamily{FamilyKind::GaussianUnitVariance, 1};
  }

  // Length of the logit / mean vectors this family works with.
  Eigen::Index arity() const {
    return kind == FamilyKind::Categorical ? num_classes : 1;
  }
  bool categorical_kind() const { return kind == FamilyKind::Categorical; }
};

// ---------------------------------------------------------------------------
// Scalar-generic kernels. Shift-stabilized so any finite logits are safe.
// ---------------------------------------------------------------------------

template <typename Derived>
Eigen::Vector<typename Derived::Scalar, Eigen::Dynamic> softmax(
    const Eigen::MatrixBase<Derived>& eta) {
  using Scalar = typename Derived::Scalar;
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
  const Scalar shift = eta.maxCoeff();
  Array e = (eta.array() - shift).exp();
  return (e / e.sum()).matrix();
}

template <typename Derived>
Eigen::Vector<typename Derived::Scalar, Eigen::Dynamic> log_softmax(
    const Eigen::MatrixBase<Derived>& eta) {
  using Scalar = typename Derived::Scalar;
  const Scalar shift = eta.maxCoeff();
  const Scalar lse = shift + std::log((eta.array() - shift).exp().sum());
  return (eta.array() - lse).matrix();
}

// The row is materialized before the call so the batched kernels are
// bit-identical to the vector kernels (vectorized exp on a strided
// expression can differ from the contiguous path by an ulp).
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>
softmax_rows(const Eigen::MatrixBase<Derived>& eta) {
  using Mat = Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vec = Eigen::Vector<typename Derived::Scalar, Eigen::Dynamic>;
  Mat out(eta.rows(), eta.cols());
  for (Eigen::Index i = 0; i < eta.rows(); ++i) {
    const Vec row = eta.row(i).transpose();
    out.row(i) = softmax(row).transpose();
  }
  return out;
}

template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>
log_softmax_rows(const Eigen::MatrixBase<Derived>& eta) {
  using Mat = Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vec = Eigen::Vector<typename Derived::Scalar, Eigen::Dynamic>;
  Mat out(eta.rows(), eta.cols());
  for (Eigen::Index i = 0; i < eta.rows(); ++i) {
    const Vec row = eta.row(i).transpose();
    out.row(i) = log_softmax(row).transpose();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Link functions
// ---------------------------------------------------------------------------

// Natural parameters -> mean parameters. Categorical: stabilized softmax;
// Gaussian: identity. Rejects non-finite input.
inline Eigen::VectorXd inverse_link(const DistributionFamily& family,
                                    const Eigen::VectorXd& eta) {
  if (!eta.allFinite()) throw NumericError("inverse_link: non-finite natural parameters");
  if (family.kind == FamilyKind::GaussianUnitVariance) return eta;
  if (eta.size() != family.num_classes)
    throw NumericError("inverse_link: logit length does not match class count");
  return softmax(eta);
}

// Mean parameters -> natural parameters. The categorical representative is
// elementwise log p; logits are only meaningful modulo a per-vector shift.
inline Eigen::VectorXd link(const DistributionFamily& family,
                            const Eigen::VectorXd& mean) {
  if (!mean.allFinite()) throw NumericError("link: non-finite mean parameters");
  if (family.kind == FamilyKind::GaussianUnitVariance) return mean;
  if (mean.size() != family.num_classes)
    throw NumericError("link: probability length does not match class count");
  if ((mean.array() <= 0.0).any())
    throw NumericError("link: probabilities must be strictly positive");
  return mean.array().log().matrix();
}

// ---------------------------------------------------------------------------
// KL divergence
// ---------------------------------------------------------------------------

// Categorical: sum_k p_k log(p_k / q_k) with 0 log 0 = 0. A zero prediction
// mass under positive target mass yields +infinity (explicit, not an
// overflow). Gaussian (unit variance, constants dropped): (mu_p - mu_q)^2 / 2.
inline double kl_divergence(const DistributionFamily& family,
                            const Eigen::VectorXd& target,
                            const Eigen::VectorXd& prediction) {
  if (family.kind == FamilyKind::GaussianUnitVariance) {
    const double d = target(0) - prediction(0);
    return 0.5 * d * d;
  }
  if (target.size() != prediction.size())
    throw NumericError("kl_divergence: length mismatch");
  if ((target.array() < 0.0).any())
    throw NumericError("kl_divergence: negative target mass");
  double acc = 0.0;
  for (Eigen::Index k = 0; k < target.size(); ++k) {
    const double p = target(k);
    if (p == 0.0) continue;
    const double q = prediction(k);
    if (q <= 0.0) return std::numeric_limits<double>::infinity();
    acc += p * (std::log(p) - std::log(q));
  }
  return acc;
}

// Per-row KL between target rows and prediction log-prob rows. Targets may be
// one-hot (exact zeros allowed); log predictions must be finite or -inf.
inline Eigen::VectorXd categorical_kl_rows(const Eigen::MatrixXd& targets,
                                           const Eigen::MatrixXd& log_predictions) {
  Eigen::VectorXd out(targets.rows());
  for (Eigen::Index i = 0; i < targets.rows(); ++i) {
    double acc = 0.0;
    for (Eigen::Index k = 0; k < targets.cols(); ++k) {
      const double p = targets(i, k);
      if (p == 0.0) continue;
      acc += p * (std::log(p) - log_predictions(i, k));
    }
    out(i) = acc;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Ensemble combiners
// ---------------------------------------------------------------------------

// Elementwise arithmetic mean of member natural parameters. The ensemble
// prediction is inverse_link of the result.
inline Eigen::VectorXd combine_logits(const std::vector<Eigen::VectorXd>& member_logits) {
  if (member_logits.empty()) throw NumericError("combine_logits: empty member list");
  Eigen::VectorXd mean = member_logits.front();
  for (std::size_t j = 1; j < member_logits.size(); ++j) {
    if (member_logits[j].size() != mean.size())
      throw NumericError("combine_logits: member length mismatch");
    mean += member_logits[j];
  }
  return mean / static_cast<double>(member_logits.size());
}

inline Eigen::MatrixXd combine_logits_rows(const std::vector<Eigen::MatrixXd>& member_logits) {
  if (member_logits.empty()) throw NumericError("combine_logits: empty member list");
  Eigen::MatrixXd mean = member_logits.front();
  for (std::size_t j = 1; j < member_logits.size(); ++j) {
    if (member_logits[j].rows() != mean.rows() || member_logits[j].cols() != mean.cols())
      throw NumericError("combine_logits: member shape mismatch");
    mean += member_logits[j];
  }
  return mean / static_cast<double>(member_logits.size());
}

// Normalized geometric mean of member probability vectors, computed in log
// space: Z^-1 prod_j q_j^(1/M). Independent route to the same combination as
// softmax of averaged logits; kept separate so either can check the other.
inline Eigen::VectorXd geometric_mean_combine(const std::vector<Eigen::VectorXd>& member_probs) {
  if (member_probs.empty()) throw NumericError("geometric_mean_combine: empty member list");
  const Eigen::Index k = member_probs.front().size();
  Eigen::VectorXd mean_log = Eigen::VectorXd::Zero(k);
  for (const auto& q : member_probs) {
    if (q.size() != k) throw NumericError("geometric_mean_combine: member length mismatch");
    if ((q.array() <= 0.0).any())
      throw NumericError("geometric_mean_combine: members must be strictly positive");
    mean_log += q.array().log().matrix();
  }
  mean_log /= static_cast<double>(member_probs.size());
  return softmax(mean_log);
}

// ---------------------------------------------------------------------------
// Ambiguity decomposition
// ---------------------------------------------------------------------------

struct AmbiguityParts {
  double avg_kl = 0.0;       // (1/M) sum_j D(p || q_j)
  double diversity = 0.0;    // (1/M) sum_j D(qbar || q_j)
  double ensemble_kl = 0.0;  // D(p || qbar)
};

// Splits the ensemble KL into average member KL minus diversity. Each part is
// evaluated directly from its definition; ensemble_kl = avg_kl - diversity
// holds as an identity of the geometric-mean combiner, and diversity >= 0.
// Members are passed as natural parameters; the target as mean parameters
// (a probability vector, or a length-1 Gaussian mean).
inline AmbiguityParts ambiguity_decompose(const DistributionFamily& family,
                                          const Eigen::VectorXd& target,
                                          const std::vector<Eigen::VectorXd>& member_logits) {
  const double m = static_cast<double>(member_logits.size());
  const Eigen::VectorXd eta_bar = combine_logits(member_logits);
  const Eigen::VectorXd q_bar = inverse_link(family, eta_bar);
  AmbiguityParts parts;
  for (const auto& eta : member_logits) {
    const Eigen::VectorXd q = inverse_link(family, eta);
    parts.avg_kl += kl_divergence(family, target, q);
    parts.diversity += kl_divergence(family, q_bar, q);
  }
  parts.avg_kl /= m;
  parts.diversity /= m;
  parts.ensemble_kl = kl_divergence(family, target, q_bar);
  return parts;
}

// Batched decomposition, averaged over rows. Targets: one row per example
// (probability rows, or a single mean column for the Gaussian family).
inline AmbiguityParts ambiguity_decompose_rows(const DistributionFamily& family,
                                               const Eigen::MatrixXd& targets,
                                               const std::vector<Eigen::MatrixXd>& member_logits) {
  const double m = static_cast<double>(member_logits.size());
  const double n = static_cast<double>(targets.rows());
  const Eigen::MatrixXd eta_bar = combine_logits_rows(member_logits);
  AmbiguityParts parts;
  if (family.kind == FamilyKind::GaussianUnitVariance) {
    for (const auto& eta : member_logits) {
      parts.avg_kl += 0.5 * (targets - eta).squaredNorm();
      parts.diversity += 0.5 * (eta_bar - eta).squaredNorm();
    }
    parts.ensemble_kl = 0.5 * (targets - eta_bar).squaredNorm() / n;
  } else {
    const Eigen::MatrixXd log_q_bar = log_softmax_rows(eta_bar);
    const Eigen::MatrixXd q_bar = log_q_bar.array().exp();
    for (const auto& eta : member_logits) {
      const Eigen::MatrixXd log_q = log_softmax_rows(eta);
      parts.avg_kl += categorical_kl_rows(targets, log_q).sum();
      parts.diversity += categorical_kl_rows(q_bar, log_q).sum();
    }
    parts.ensemble_kl = categorical_kl_rows(targets, log_q_bar).sum() / n;
  }
  parts.avg_kl /= m * n;
  parts.diversity /= m * n;
  return parts;
}

}  // namespace jtens
