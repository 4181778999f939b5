#include "jtens/joint_loss.hpp"

#include <string>

namespace jtens {

namespace {

void check_inputs(const DistributionFamily& family, const Eigen::MatrixXd& targets,
                  const std::vector<Eigen::MatrixXd>& member_logits,
                  const JointLossConfig& config) {
  if (static_cast<Eigen::Index>(member_logits.size()) != config.members)
    throw NumericError("joint loss: got " + std::to_string(member_logits.size()) +
                       " member logit sets, config says " + std::to_string(config.members));
  if (targets.cols() != family.arity())
    throw NumericError("joint loss: target width does not match family arity");
  for (const auto& eta : member_logits)
    if (eta.rows() != targets.rows() || eta.cols() != targets.cols())
      throw NumericError("joint loss: member logit shape mismatch");
}

}  // namespace

double joint_loss(const DistributionFamily& family, const Eigen::MatrixXd& targets,
                  const std::vector<Eigen::MatrixXd>& member_logits,
                  const JointLossConfig& config) {
  check_inputs(family, targets, member_logits, config);
  const double m = static_cast<double>(config.members);
  const double n = static_cast<double>(targets.rows());
  const Eigen::MatrixXd eta_bar = combine_logits_rows(member_logits);

  double ensemble_term = 0.0;
  double member_term = 0.0;
  if (family.kind == FamilyKind::GaussianUnitVariance) {
    ensemble_term = 0.5 * (targets - eta_bar).squaredNorm();
    for (const auto& eta : member_logits) member_term += 0.5 * (targets - eta).squaredNorm();
  } else {
    ensemble_term = categorical_kl_rows(targets, log_softmax_rows(eta_bar)).sum();
    for (const auto& eta : member_logits)
      member_term += categorical_kl_rows(targets, log_softmax_rows(eta)).sum();
  }
  return (config.lambda * ensemble_term + (1.0 - config.lambda) * member_term / m) / n;
}

double joint_loss_ambiguity(const DistributionFamily& family, const Eigen::MatrixXd& targets,
                            const std::vector<Eigen::MatrixXd>& member_logits,
                            const JointLossConfig& config) {
  check_inputs(family, targets, member_logits, config);
  const double m = static_cast<double>(config.members);
  const double n = static_cast<double>(targets.rows());
  const Eigen::MatrixXd eta_bar = combine_logits_rows(member_logits);

  double member_term = 0.0;
  double diversity_term = 0.0;
  if (family.kind == FamilyKind::GaussianUnitVariance) {
    for (const auto& eta : member_logits) {
      member_term += 0.5 * (targets - eta).squaredNorm();
      diversity_term += 0.5 * (eta_bar - eta).squaredNorm();
    }
  } else {
    const Eigen::MatrixXd log_q_bar = log_softmax_rows(eta_bar);
    const Eigen::MatrixXd q_bar = log_q_bar.array().exp();
    for (const auto& eta : member_logits) {
      const Eigen::MatrixXd log_q = log_softmax_rows(eta);
      member_term += categorical_kl_rows(targets, log_q).sum();
      diversity_term += categorical_kl_rows(q_bar, log_q).sum();
    }
  }
  return (member_term / m - config.lambda * diversity_term / m) / n;
}

std::vector<Eigen::MatrixXd> joint_loss_grad_logits(
    const DistributionFamily& family, const Eigen::MatrixXd& targets,
    const std::vector<Eigen::MatrixXd>& member_logits, const JointLossConfig& config) {
  check_inputs(family, targets, member_logits, config);
  const double scale =
      1.0 / (static_cast<double>(config.members) * static_cast<double>(targets.rows()));
  const Eigen::MatrixXd eta_bar = combine_logits_rows(member_logits);

  std::vector<Eigen::MatrixXd> grads;
  grads.reserve(member_logits.size());
  if (family.kind == FamilyKind::GaussianUnitVariance) {
    for (const auto& eta : member_logits)
      grads.push_back(((1.0 - config.lambda) * eta + config.lambda * eta_bar - targets) * scale);
  } else {
    const Eigen::MatrixXd q_bar = softmax_rows(eta_bar);
    for (const auto& eta : member_logits) {
      const Eigen::MatrixXd q = softmax_rows(eta);
      grads.push_back(((1.0 - config.lambda) * q + config.lambda * q_bar - targets) * scale);
    }
  }
  return grads;
}

}  // namespace jtens
