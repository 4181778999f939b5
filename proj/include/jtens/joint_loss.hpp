#pragma once

#include <Eigen/Dense>

#include <vector>

#include "jtens/expfam.hpp"

// The joint training loss over an ensemble of M predictors,
//
//   L_lambda = lambda * D(p || qbar) + (1 - lambda) * (1/M) sum_j D(p || q_j),
//
// averaged over a batch. lambda = 0 trains members independently (up to a
// 1/M learning-rate scale); lambda = 1 trains the combined prediction qbar
// as one system. The equivalent ambiguity form subtracts a lambda-weighted
// diversity term from the average member loss.

namespace jtens {

struct JointLossConfig {
  double lambda = 0.0;
  Eigen::Index members = 1;

  JointLossConfig(double lambda_, Eigen::Index members_) : lambda(lambda_), members(members_) {
    if (!(lambda >= 0.0 && lambda <= 1.0))
      throw ConfigError("joint loss: lambda must lie in [0, 1]; beyond 1 every stationary "
                        "point is a saddle and members diverge");
    if (members < 1) throw ConfigError("joint loss: need at least one member");
  }
};

// Convex-combination form. targets: n x K probability rows (one-hot allowed)
// or n x 1 Gaussian means; member_logits: M matrices of n x K natural
// parameters.
double joint_loss(const DistributionFamily& family, const Eigen::MatrixXd& targets,
                  const std::vector<Eigen::MatrixXd>& member_logits,
                  const JointLossConfig& config);

// Ambiguity form: (1/M) sum_j D(p||q_j) - (lambda/M) sum_j D(qbar||q_j).
// Agrees with joint_loss to ~1e-10 on any input; the two are kept as fully
// separate evaluation routes.
double joint_loss_ambiguity(const DistributionFamily& family, const Eigen::MatrixXd& targets,
                            const std::vector<Eigen::MatrixXd>& member_logits,
                            const JointLossConfig& config);

// Gradient of the batch-mean loss at each member's natural parameters:
//   (1/(M n)) * ((1 - lambda) q_j + lambda qbar - p)   per example row,
// with q_j, qbar, p in mean parameters. This is the closed form of
// d D(p||q) / d eta = q - p pushed through the convex combination.
std::vector<Eigen::MatrixXd> joint_loss_grad_logits(
    const DistributionFamily& family, const Eigen::MatrixXd& targets,
    const std::vector<Eigen::MatrixXd>& member_logits, const JointLossConfig& config);

}  // namespace jtens
