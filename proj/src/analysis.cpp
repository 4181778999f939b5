#include "jtens/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "jtens/joint_loss.hpp"
#include "jtens/net.hpp"

namespace jtens {

namespace {

// Single-example Gaussian joint loss as a plain function of the M member
// means. Identical to joint_loss on a one-row batch for lambda in [0, 1],
// but evaluable at any lambda, which the saddle analysis needs.
double gaussian_joint_loss_scalar(const Eigen::VectorXd& etas, double y, double lambda) {
  const double m = static_cast<double>(etas.size());
  const double ybar = etas.mean();
  double member = 0.0;
  for (Eigen::Index j = 0; j < etas.size(); ++j)
    member += 0.5 * (etas(j) - y) * (etas(j) - y);
  return lambda * 0.5 * (ybar - y) * (ybar - y) + (1.0 - lambda) * member / m;
}

}  // namespace

Eigen::MatrixXd stationary_hessian(const StationaryHessianSpec& spec) {
  const double m = static_cast<double>(spec.members);
  const double q = (spec.curvature / m) * (1.0 - spec.lambda * (1.0 - 1.0 / m));
  const double r = spec.lambda * spec.curvature / (m * m);
  Eigen::MatrixXd h = Eigen::MatrixXd::Constant(spec.members, spec.members, r);
  h.diagonal().setConstant(q);
  return h;
}

HessianSpectrum hessian_eigenvalues(const StationaryHessianSpec& spec) {
  HessianSpectrum s;
  s.omega1 = spec.curvature / static_cast<double>(spec.members);
  s.omega2 = s.omega1 * (1.0 - spec.lambda);
  s.omega2_multiplicity = spec.members - 1;
  return s;
}

double condition_number(double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0))
    throw ConfigError("condition number: lambda must lie in [0, 1]");
  if (lambda == 1.0) return std::numeric_limits<double>::infinity();
  return 1.0 / (1.0 - lambda);
}

Eigen::MatrixXd numeric_hessian_of_joint_loss(const Eigen::VectorXd& member_etas, double target,
                                              double lambda) {
  const Eigen::Index m = member_etas.size();
  if (m < 2) throw ConfigError("numeric hessian: need at least two members");
  const double h = kHessianFdStep;
  Eigen::MatrixXd out(m, m);
  Eigen::VectorXd etas = member_etas;
  const auto probe = [&](Eigen::Index i, double di, Eigen::Index j, double dj) {
    etas = member_etas;
    etas(i) += di;
    etas(j) += dj;
    return gaussian_joint_loss_scalar(etas, target, lambda);
  };
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double v = (probe(i, h, j, h) - probe(i, h, j, -h) - probe(i, -h, j, h) +
                        probe(i, -h, j, -h)) /
                       (4.0 * h * h);
      out(i, j) = v;
      out(j, i) = v;
    }
  return out;
}

double ll_loss(const std::vector<Eigen::VectorXd>& member_log_probs,
               const Eigen::VectorXd& target) {
  if (member_log_probs.empty()) throw NumericError("ll loss: empty member list");
  double acc = 0.0;
  for (const auto& lq : member_log_probs) {
    if (lq.size() != target.size()) throw NumericError("ll loss: length mismatch");
    acc += -(target.array() * lq.array()).sum();
  }
  return acc / static_cast<double>(member_log_probs.size());
}

double sm_loss(const std::vector<Eigen::VectorXd>& member_log_probs,
               const Eigen::VectorXd& target) {
  if (member_log_probs.empty()) throw NumericError("sm loss: empty member list");
  const Eigen::Index k = target.size();
  Eigen::VectorXd mean_log = Eigen::VectorXd::Zero(k);
  for (const auto& lq : member_log_probs) {
    if (lq.size() != k) throw NumericError("sm loss: length mismatch");
    mean_log += lq;
  }
  mean_log /= static_cast<double>(member_log_probs.size());
  // Deliberately materialized: s is un-normalized, and the loss is the
  // cross-entropy against log(s), not against a renormalized distribution.
  const Eigen::VectorXd s = mean_log.array().exp();
  return -(target.array() * s.array().log()).sum();
}

Eigen::VectorXd ncl_gradient(const Eigen::VectorXd& member_means, double target, double lambda) {
  const double m = static_cast<double>(member_means.size());
  if (member_means.size() < 1) throw NumericError("ncl gradient: empty member list");
  const double ybar = member_means.mean();
  Eigen::VectorXd grad(member_means.size());
  for (Eigen::Index j = 0; j < member_means.size(); ++j)
    grad(j) = ((member_means(j) - target) - lambda * (member_means(j) - ybar)) / m;
  return grad;
}

NclEquivalenceReport verify_ncl_equivalence(const Eigen::VectorXd& member_means, double target,
                                            double lambda) {
  const Eigen::Index m = member_means.size();
  const Eigen::VectorXd ncl = ncl_gradient(member_means, target, lambda);

  const auto gauss = DistributionFamily::gaussian_unit_variance();
  std::vector<Eigen::MatrixXd> etas;
  etas.reserve(static_cast<std::size_t>(m));
  for (Eigen::Index j = 0; j < m; ++j)
    etas.push_back(Eigen::MatrixXd::Constant(1, 1, member_means(j)));
  const Eigen::MatrixXd y = Eigen::MatrixXd::Constant(1, 1, target);
  const auto joint = joint_loss_grad_logits(gauss, y, etas, JointLossConfig(lambda, m));

  NclEquivalenceReport report;
  for (Eigen::Index j = 0; j < m; ++j)
    report.max_abs_deviation =
        std::max(report.max_abs_deviation,
                 std::abs(ncl(j) - joint[static_cast<std::size_t>(j)](0, 0)));
  report.equivalent = report.max_abs_deviation < report.tolerance;
  return report;
}

namespace {

Eigen::MatrixXd random_matrix(std::mt19937_64& rng, Eigen::Index n, Eigen::Index k,
                              double scale) {
  std::uniform_real_distribution<double> dist(-scale, scale);
  Eigen::MatrixXd out(n, k);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < k; ++j) out(i, j) = dist(rng);
  return out;
}

IdentityCheck make_check(std::string name, double deviation, double tolerance) {
  IdentityCheck check;
  check.name = std::move(name);
  check.deviation = deviation;
  check.tolerance = tolerance;
  check.passed = deviation < tolerance;
  return check;
}

double loss_form_deviation(std::mt19937_64& rng, FamilyKind kind, int instances) {
  const Eigen::Index lambdas_members[4] = {1, 2, 8, 16};
  const double lambdas[4] = {0.0, 0.3, 0.95, 1.0};
  double worst = 0.0;
  for (int t = 0; t < instances; ++t) {
    const Eigen::Index m = lambdas_members[t % 4];
    const double lambda = lambdas[(t / 4) % 4];
    const JointLossConfig cfg(lambda, m);
    const Eigen::Index n = 4;
    if (kind == FamilyKind::Categorical) {
      const auto family = DistributionFamily::categorical(5);
      std::vector<Eigen::MatrixXd> logits;
      for (Eigen::Index j = 0; j < m; ++j) logits.push_back(random_matrix(rng, n, 5, 8.0));
      const Eigen::MatrixXd targets = softmax_rows(random_matrix(rng, n, 5, 2.0));
      worst = std::max(worst, std::abs(joint_loss(family, targets, logits, cfg) -
                                       joint_loss_ambiguity(family, targets, logits, cfg)));
    } else {
      const auto gauss = DistributionFamily::gaussian_unit_variance();
      std::vector<Eigen::MatrixXd> mus;
      for (Eigen::Index j = 0; j < m; ++j) mus.push_back(random_matrix(rng, n, 1, 3.0));
      const Eigen::MatrixXd y = random_matrix(rng, n, 1, 3.0);
      worst = std::max(worst, std::abs(joint_loss(gauss, y, mus, cfg) -
                                       joint_loss_ambiguity(gauss, y, mus, cfg)));
    }
  }
  return worst;
}

double combiner_deviation(std::mt19937_64& rng, int instances) {
  double worst = 0.0;
  for (int t = 0; t < instances; ++t) {
    const Eigen::Index m = 1 + static_cast<Eigen::Index>(rng() % 8);
    const Eigen::Index k = 2 + static_cast<Eigen::Index>(rng() % 9);
    std::vector<Eigen::VectorXd> logits;
    std::vector<Eigen::VectorXd> probs;
    for (Eigen::Index j = 0; j < m; ++j) {
      logits.push_back(random_matrix(rng, k, 1, 10.0).col(0));
      probs.push_back(softmax(logits.back()));
    }
    const Eigen::VectorXd a = softmax(combine_logits(logits));
    const Eigen::VectorXd b = geometric_mean_combine(probs);
    worst = std::max(worst, (a - b).cwiseAbs().maxCoeff());
  }
  return worst;
}

void ambiguity_deviation(std::mt19937_64& rng, int instances, double* residual,
                         double* min_diversity) {
  *residual = 0.0;
  *min_diversity = std::numeric_limits<double>::infinity();
  for (int t = 0; t < instances; ++t) {
    const Eigen::Index m = 2 + static_cast<Eigen::Index>(rng() % 7);
    const Eigen::Index k = 2 + static_cast<Eigen::Index>(rng() % 5);
    const auto family = DistributionFamily::categorical(k);
    std::vector<Eigen::VectorXd> logits;
    for (Eigen::Index j = 0; j < m; ++j) logits.push_back(random_matrix(rng, k, 1, 6.0).col(0));
    const Eigen::VectorXd target = softmax(random_matrix(rng, k, 1, 2.0).col(0));
    const AmbiguityParts parts = ambiguity_decompose(family, target, logits);
    *residual =
        std::max(*residual, std::abs(parts.ensemble_kl - (parts.avg_kl - parts.diversity)));
    *min_diversity = std::min(*min_diversity, parts.diversity);
  }
}

double logit_gradient_fd_deviation(std::mt19937_64& rng, int instances) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double h = kGradientFdStep;
  double worst = 0.0;
  for (int t = 0; t < instances; ++t) {
    const Eigen::Index m = 1 + static_cast<Eigen::Index>(rng() % 4);
    const double lambda = unit(rng);
    const JointLossConfig cfg(lambda, m);
    const bool categorical = t % 2 == 0;
    const Eigen::Index k = categorical ? 3 : 1;
    const auto family = categorical ? DistributionFamily::categorical(3)
                                    : DistributionFamily::gaussian_unit_variance();
    const Eigen::Index n = 3;
    std::vector<Eigen::MatrixXd> logits;
    for (Eigen::Index j = 0; j < m; ++j) logits.push_back(random_matrix(rng, n, k, 3.0));
    const Eigen::MatrixXd targets =
        categorical ? softmax_rows(random_matrix(rng, n, k, 2.0)).eval()
                    : random_matrix(rng, n, 1, 3.0).eval();
    const auto grads = joint_loss_grad_logits(family, targets, logits, cfg);
    for (Eigen::Index j = 0; j < m; ++j)
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index c = 0; c < k; ++c) {
          auto& entry = logits[static_cast<std::size_t>(j)](i, c);
          const double saved = entry;
          entry = saved + h;
          const double up = joint_loss(family, targets, logits, cfg);
          entry = saved - h;
          const double down = joint_loss(family, targets, logits, cfg);
          entry = saved;
          const double fd = (up - down) / (2.0 * h);
          const double rel = std::abs(fd - grads[static_cast<std::size_t>(j)](i, c)) /
                             std::max(1.0, std::abs(fd));
          worst = std::max(worst, rel);
        }
  }
  return worst;
}

double backprop_fd_deviation(std::mt19937_64& rng, int instances) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double h = kGradientFdStep;
  const auto family = DistributionFamily::categorical(3);
  double worst = 0.0;
  for (int t = 0; t < instances; ++t) {
    const Eigen::Index m = 2;
    const double lambda = unit(rng);
    const JointLossConfig cfg(lambda, m);
    std::vector<Mlp> members;
    for (Eigen::Index j = 0; j < m; ++j)
      members.push_back(init_mlp(mlp_spec(3, {4}, 3), rng()));
    const Eigen::MatrixXd x = random_matrix(rng, 3, 3, 1.0);
    const Eigen::MatrixXd targets = softmax_rows(random_matrix(rng, 3, 3, 2.0));

    const auto loss_now = [&]() {
      std::vector<Eigen::MatrixXd> logits;
      for (const auto& net : members) logits.push_back(forward(net, x));
      return joint_loss(family, targets, logits, cfg);
    };

    std::vector<ForwardCache> caches(static_cast<std::size_t>(m));
    std::vector<Eigen::MatrixXd> logits;
    for (Eigen::Index j = 0; j < m; ++j)
      logits.push_back(forward(members[static_cast<std::size_t>(j)], x,
                               &caches[static_cast<std::size_t>(j)]));
    const auto dlogits = joint_loss_grad_logits(family, targets, logits, cfg);

    for (Eigen::Index j = 0; j < m; ++j) {
      Mlp& net = members[static_cast<std::size_t>(j)];
      const Gradients grads = backward(net, caches[static_cast<std::size_t>(j)],
                                       dlogits[static_cast<std::size_t>(j)]);
      for (std::size_t l = 0; l < net.layers.size(); ++l) {
        for (Eigen::Index r = 0; r < net.layers[l].weights.rows(); ++r)
          for (Eigen::Index c = 0; c < net.layers[l].weights.cols(); ++c) {
            const double saved = net.layers[l].weights(r, c);
            net.layers[l].weights(r, c) = saved + h;
            const double up = loss_now();
            net.layers[l].weights(r, c) = saved - h;
            const double down = loss_now();
            net.layers[l].weights(r, c) = saved;
            const double fd = (up - down) / (2.0 * h);
            worst = std::max(worst, std::abs(fd - grads[l].weights(r, c)) /
                                        std::max(1.0, std::abs(fd)));
          }
        for (Eigen::Index r = 0; r < net.layers[l].biases.size(); ++r) {
          const double saved = net.layers[l].biases(r);
          net.layers[l].biases(r) = saved + h;
          const double up = loss_now();
          net.layers[l].biases(r) = saved - h;
          const double down = loss_now();
          net.layers[l].biases(r) = saved;
          const double fd = (up - down) / (2.0 * h);
          worst =
              std::max(worst, std::abs(fd - grads[l].biases(r)) / std::max(1.0, std::abs(fd)));
        }
      }
    }
  }
  return worst;
}

double eigen_grid_deviation() {
  double worst = 0.0;
  for (const Eigen::Index m : {2, 4, 8, 16})
    for (const double lambda : {0.0, 0.5, 0.9, 0.99, 1.0, 1.5})
      for (const double c : {0.25, 1.0, 4.0}) {
        const StationaryHessianSpec spec(m, lambda, c);
        const HessianSpectrum closed = hessian_eigenvalues(spec);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(stationary_hessian(spec));
        Eigen::VectorXd expected(m);
        expected.head(m - 1).setConstant(closed.omega2);
        expected(m - 1) = closed.omega1;
        std::sort(expected.data(), expected.data() + m);
        const Eigen::VectorXd numeric = solver.eigenvalues();  // already ascending
        worst = std::max(worst, (numeric - expected).cwiseAbs().maxCoeff());
      }
  return worst;
}

double condition_number_deviation() {
  double worst = std::abs(condition_number(0.0) - 1.0);
  worst = std::max(worst, std::abs(condition_number(0.5) - 2.0));
  worst = std::max(worst, std::abs(condition_number(0.9) - 10.0));
  return worst;
}

double numeric_hessian_deviation() {
  double worst = 0.0;
  for (const Eigen::Index m : {2, 3, 4})
    for (const double lambda : {0.0, 0.5, 0.7, 1.0, 1.5}) {
      const double y = 0.5;
      const Eigen::VectorXd etas = Eigen::VectorXd::Constant(m, y);
      const Eigen::MatrixXd numeric = numeric_hessian_of_joint_loss(etas, y, lambda);
      const Eigen::MatrixXd closed = stationary_hessian(StationaryHessianSpec(m, lambda, 1.0));
      worst = std::max(worst, (numeric - closed).cwiseAbs().maxCoeff());
    }
  return worst;
}

double saddle_sign_deviation() {
  const Eigen::Index m = 4;
  const Eigen::VectorXd etas = Eigen::VectorXd::Constant(m, 0.5);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(
      numeric_hessian_of_joint_loss(etas, 0.5, 1.5));
  const double lo = solver.eigenvalues().minCoeff();
  const double hi = solver.eigenvalues().maxCoeff();
  const HessianSpectrum closed = hessian_eigenvalues(StationaryHessianSpec(m, 1.5, 1.0));
  const bool mixed = lo < 0.0 && hi > 0.0 && closed.omega2 < 0.0 && closed.omega1 > 0.0;
  return mixed ? 0.0 : 1.0;
}

void coupled_loss_deviation(std::mt19937_64& rng, int instances, double* value_dev,
                            double* grad_dev) {
  *value_dev = 0.0;
  *grad_dev = 0.0;
  const double h = kGradientFdStep;
  for (int t = 0; t < instances; ++t) {
    const Eigen::Index k = t % 2 == 0 ? 2 : 10;
    const Eigen::Index m = t % 4 < 2 ? 2 : 8;
    std::vector<Eigen::VectorXd> log_probs;
    for (Eigen::Index j = 0; j < m; ++j)
      log_probs.push_back(log_softmax(random_matrix(rng, k, 1, 4.0).col(0).eval()));
    const Eigen::VectorXd target = softmax(random_matrix(rng, k, 1, 2.0).col(0).eval());

    *value_dev = std::max(*value_dev,
                          std::abs(ll_loss(log_probs, target) - sm_loss(log_probs, target)));

    // Both gradients w.r.t. each member's log-probs must equal -p/M, i.e.
    // 1/M times the gradient of a single cross-entropy.
    const double dm = static_cast<double>(m);
    for (Eigen::Index j = 0; j < m; ++j)
      for (Eigen::Index c = 0; c < k; ++c) {
        auto& entry = log_probs[static_cast<std::size_t>(j)](c);
        const double saved = entry;
        entry = saved + h;
        const double ll_up = ll_loss(log_probs, target);
        const double sm_up = sm_loss(log_probs, target);
        entry = saved - h;
        const double ll_down = ll_loss(log_probs, target);
        const double sm_down = sm_loss(log_probs, target);
        entry = saved;
        const double want = -target(c) / dm;
        *grad_dev = std::max(*grad_dev, std::abs((ll_up - ll_down) / (2.0 * h) - want));
        *grad_dev = std::max(*grad_dev, std::abs((sm_up - sm_down) / (2.0 * h) - want));
      }
  }
}

double ncl_deviation(std::mt19937_64& rng, int instances) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double worst = 0.0;
  for (int t = 0; t < instances; ++t) {
    const Eigen::Index m = 2 + static_cast<Eigen::Index>(rng() % 15);
    const Eigen::VectorXd means = random_matrix(rng, m, 1, 5.0).col(0);
    const double y = 10.0 * (unit(rng) - 0.5);
    const NclEquivalenceReport report = verify_ncl_equivalence(means, y, unit(rng));
    worst = std::max(worst, report.max_abs_deviation);
  }
  return worst;
}

}  // namespace

std::vector<IdentityCheck> run_verification_suite(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<IdentityCheck> checks;

  checks.push_back(make_check("loss forms agree (categorical)",
                              loss_form_deviation(rng, FamilyKind::Categorical, 1000), 1e-10));
  checks.push_back(make_check("loss forms agree (gaussian)",
                              loss_form_deviation(rng, FamilyKind::GaussianUnitVariance, 1000),
                              1e-10));
  checks.push_back(
      make_check("combiner: mean logits vs geometric mean", combiner_deviation(rng, 1000), 1e-12));

  double residual = 0.0, min_diversity = 0.0;
  ambiguity_deviation(rng, 1000, &residual, &min_diversity);
  checks.push_back(make_check("ambiguity identity residual", residual, 1e-10));
  checks.push_back(
      make_check("diversity non-negative", std::max(0.0, -min_diversity), 1e-12));

  checks.push_back(make_check("logit gradient vs finite differences",
                              logit_gradient_fd_deviation(rng, 100), 1e-6));
  checks.push_back(
      make_check("backprop vs finite differences", backprop_fd_deviation(rng, 100), 1e-6));

  checks.push_back(
      make_check("hessian eigenvalues: closed form vs eigensolver", eigen_grid_deviation(),
                 1e-10));
  checks.push_back(
      make_check("condition numbers at 0, 0.5, 0.9", condition_number_deviation(), 1e-12));
  checks.push_back(
      make_check("numeric hessian at stationary points", numeric_hessian_deviation(), 1e-6));
  checks.push_back(
      make_check("mixed-sign eigenvalues beyond lambda 1", saddle_sign_deviation(), 0.5));

  double value_dev = 0.0, grad_dev = 0.0;
  coupled_loss_deviation(rng, 100, &value_dev, &grad_dev);
  checks.push_back(make_check("coupled losses agree (ll vs sm)", value_dev, 1e-12));
  checks.push_back(
      make_check("coupled loss gradients are scaled independent gradients", grad_dev, 1e-6));

  checks.push_back(
      make_check("ncl gradient equals joint gradient", ncl_deviation(rng, 1000), 1e-14));

  return checks;
}

}  // namespace jtens
