#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "jtens/expfam.hpp"

// Closed-form results about the joint loss, each paired with an independent
// numerical route so one can check the other: the stationary-point Hessian
// over member parameters and its spectrum, the log-likelihood / softmax
// coupled-loss equivalence, and the negative-correlation-learning form of
// the Gaussian gradient.

namespace jtens {

// Finite-difference step sizes (64-bit, balancing truncation and round-off).
inline constexpr double kHessianFdStep = 1e-4;
inline constexpr double kGradientFdStep = 1e-5;

// Hessian of the joint loss over the M member parameters at a stationary
// point where every member emits the same prediction. curvature is the
// common second derivative c = g'(eta) there; lambda may exceed 1 here (and
// only here) to study the saddle regime.
struct StationaryHessianSpec {
  Eigen::Index members;
  double lambda;
  double curvature;

  StationaryHessianSpec(Eigen::Index members_, double lambda_, double curvature_)
      : members(members_), lambda(lambda_), curvature(curvature_) {
    if (members < 2) throw ConfigError("hessian spec: need at least two members");
    if (!(curvature > 0.0)) throw ConfigError("hessian spec: curvature must be positive");
  }
};

// H = r J + (q - r) I with diagonal q = (c/M)(1 - lambda (1 - 1/M)) and
// off-diagonal r = lambda c / M^2.
Eigen::MatrixXd stationary_hessian(const StationaryHessianSpec& spec);

// Spectrum of that matrix in closed form: omega1 = c/M along the consensus
// direction (all members move together), and omega2 = (c/M)(1 - lambda) with
// multiplicity M-1 across the disagreement directions. omega2 hits zero at
// lambda = 1 and turns negative beyond it: every stationary point becomes a
// saddle.
struct HessianSpectrum {
  double omega1 = 0.0;
  double omega2 = 0.0;
  Eigen::Index omega2_multiplicity = 0;
};

HessianSpectrum hessian_eigenvalues(const StationaryHessianSpec& spec);

// kappa(H) = omega1/omega2 = 1/(1 - lambda) on [0, 1); +infinity at 1.
double condition_number(double lambda);

// Central finite differences of the single-example Gaussian joint loss over
// the M member means (step kHessianFdStep). Accepts any lambda, matching the
// closed form above with c = 1 when all means equal the target.
Eigen::MatrixXd numeric_hessian_of_joint_loss(const Eigen::VectorXd& member_etas, double target,
                                              double lambda);

// The two coupled ensemble losses over normalized member log-probabilities:
// ll is the mean of member cross-entropies; sm is the cross-entropy of the
// un-normalized exp of the averaged log-probabilities. They are equal, and
// both reduce to independent training with a 1/M learning-rate scale.
double ll_loss(const std::vector<Eigen::VectorXd>& member_log_probs,
               const Eigen::VectorXd& target);
double sm_loss(const std::vector<Eigen::VectorXd>& member_log_probs,
               const Eigen::VectorXd& target);

// Negative-correlation-learning gradient for Gaussian members:
// (1/M)((yhat_j - y) - lambda (yhat_j - ybar)). Algebraically identical to
// the Gaussian joint-loss gradient via
// (1 - lambda) yhat_j + lambda ybar - y = (yhat_j - y) - lambda (yhat_j - ybar).
Eigen::VectorXd ncl_gradient(const Eigen::VectorXd& member_means, double target, double lambda);

struct NclEquivalenceReport {
  double max_abs_deviation = 0.0;
  double tolerance = 1e-14;
  bool equivalent = false;
};

// Evaluates both gradient routes on the same inputs and compares elementwise.
NclEquivalenceReport verify_ncl_equivalence(const Eigen::VectorXd& member_means, double target,
                                            double lambda);

// One named identity check: pass iff deviation < tolerance.
struct IdentityCheck {
  std::string name;
  double deviation = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

// Runs every closed-form identity against its numerical oracle at full
// acceptance counts (randomized with the given seed) and returns one entry
// per check. Pure computation; no files, no training.
std::vector<IdentityCheck> run_verification_suite(std::uint64_t seed);

}  // namespace jtens
