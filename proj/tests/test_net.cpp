#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "jtens/net.hpp"

using namespace jtens;

namespace {

// Scalar test loss: L = 0.5 * ||f(x)||^2 summed over the batch, so
// dL/dlogits = logits. Simple enough to differentiate numerically.
double sq_loss(const Mlp& mlp, const Eigen::MatrixXd& x) {
  return 0.5 * forward(mlp, x).squaredNorm();
}

Eigen::MatrixXd random_batch(std::mt19937_64& rng, Eigen::Index n, Eigen::Index d) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Eigen::MatrixXd x(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) x(i, j) = dist(rng);
  return x;
}

}  // namespace

TEST_CASE("init produces the declared shapes, zero biases, and fan-in bounds") {
  const auto specs = mlp_spec(7, {5, 3}, 2);
  const Mlp mlp = init_mlp(specs, 42);
  REQUIRE(mlp.layers.size() == 3);
  CHECK(mlp.layers[0].weights.rows() == 5);
  CHECK(mlp.layers[0].weights.cols() == 7);
  CHECK(mlp.layers[1].weights.rows() == 3);
  CHECK(mlp.layers[2].weights.rows() == 2);
  CHECK(mlp.input_dim() == 7);
  CHECK(mlp.output_dim() == 2);
  for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
    CHECK(mlp.layers[l].biases.isZero(0.0));
    const double bound = std::sqrt(6.0 / static_cast<double>(mlp.spec[l].input_dim));
    CHECK(mlp.layers[l].weights.cwiseAbs().maxCoeff() <= bound);
    CHECK(mlp.layers[l].weights.cwiseAbs().maxCoeff() > 0.0);
  }
}

TEST_CASE("init is a pure function of the seed") {
  const auto specs = mlp_spec(4, {6}, 3);
  const Mlp a = init_mlp(specs, 7);
  const Mlp b = init_mlp(specs, 7);
  const Mlp c = init_mlp(specs, 8);
  for (std::size_t l = 0; l < a.layers.size(); ++l)
    CHECK((a.layers[l].weights - b.layers[l].weights).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.layers[0].weights - c.layers[0].weights).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("init rejects a broken layer chain") {
  CHECK_THROWS_AS((void)init_mlp({{3, 4, Activation::ReLU}, {5, 2, Activation::Identity}}, 1),
                  ConfigError);
  CHECK_THROWS_AS((void)init_mlp({{0, 4, Activation::ReLU}}, 1), ConfigError);
}

TEST_CASE("forward hand value on a single affine layer") {
  Mlp mlp;
  mlp.spec = {{2, 2, Activation::Identity}};
  Layer layer;
  layer.weights.resize(2, 2);
  layer.weights << 1.0, 2.0, 3.0, 4.0;
  layer.biases.resize(2);
  layer.biases << 0.5, -0.5;
  mlp.layers.push_back(layer);

  Eigen::MatrixXd x(1, 2);
  x << 1.0, 1.0;
  const Eigen::MatrixXd y = forward(mlp, x);
  CHECK(y(0, 0) == doctest::Approx(3.5).epsilon(1e-15));
  CHECK(y(0, 1) == doctest::Approx(6.5).epsilon(1e-15));
}

TEST_CASE("ReLU zeroes negative preactivations and keeps positive ones") {
  Mlp mlp;
  mlp.spec = {{1, 2, Activation::ReLU}};
  Layer layer;
  layer.weights.resize(2, 1);
  layer.weights << 1.0, -1.0;
  layer.biases = Eigen::VectorXd::Zero(2);
  mlp.layers.push_back(layer);

  Eigen::MatrixXd x(1, 1);
  x << 3.0;
  const Eigen::MatrixXd y = forward(mlp, x);
  CHECK(y(0, 0) == 3.0);
  CHECK(y(0, 1) == 0.0);
}

TEST_CASE("batched forward equals per-row forward") {
  std::mt19937_64 rng(3);
  const Mlp mlp = init_mlp(mlp_spec(5, {8}, 3), 21);
  const Eigen::MatrixXd x = random_batch(rng, 6, 5);
  const Eigen::MatrixXd batched = forward(mlp, x);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const Eigen::MatrixXd single = forward(mlp, x.row(i));
    CHECK((batched.row(i) - single.row(0)).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("forward rejects mismatched input width and empty nets") {
  const Mlp mlp = init_mlp(mlp_spec(5, {4}, 2), 1);
  CHECK_THROWS_AS((void)forward(mlp, Eigen::MatrixXd::Zero(3, 4)), NumericError);
  CHECK_THROWS_AS((void)forward(Mlp{}, Eigen::MatrixXd::Zero(3, 4)), ConfigError);
}

TEST_CASE("forward flags non-finite activations with the layer index") {
  Mlp mlp = init_mlp(mlp_spec(2, {2}, 1), 5);
  mlp.layers[1].weights.setConstant(std::numeric_limits<double>::infinity());
  Eigen::MatrixXd x(1, 2);
  x << 1.0, 1.0;
  CHECK_THROWS_WITH_AS((void)forward(mlp, x),
                       doctest::Contains("layer 1"), NumericError);
}

TEST_CASE("backward matches central finite differences") {
  std::mt19937_64 rng(9);
  Mlp mlp = init_mlp(mlp_spec(3, {4}, 2), 77);
  const Eigen::MatrixXd x = random_batch(rng, 5, 3);

  ForwardCache cache;
  const Eigen::MatrixXd logits = forward(mlp, x, &cache);
  const Gradients grads = backward(mlp, cache, logits);  // dL/dlogits = logits

  const double h = 1e-6;
  for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
    for (Eigen::Index r = 0; r < mlp.layers[l].weights.rows(); ++r)
      for (Eigen::Index c = 0; c < mlp.layers[l].weights.cols(); ++c) {
        const double saved = mlp.layers[l].weights(r, c);
        mlp.layers[l].weights(r, c) = saved + h;
        const double up = sq_loss(mlp, x);
        mlp.layers[l].weights(r, c) = saved - h;
        const double down = sq_loss(mlp, x);
        mlp.layers[l].weights(r, c) = saved;
        const double fd = (up - down) / (2.0 * h);
        CHECK(std::abs(fd - grads[l].weights(r, c)) <
              1e-6 * std::max(1.0, std::abs(fd)));
      }
    for (Eigen::Index r = 0; r < mlp.layers[l].biases.size(); ++r) {
      const double saved = mlp.layers[l].biases(r);
      mlp.layers[l].biases(r) = saved + h;
      const double up = sq_loss(mlp, x);
      mlp.layers[l].biases(r) = saved - h;
      const double down = sq_loss(mlp, x);
      mlp.layers[l].biases(r) = saved;
      const double fd = (up - down) / (2.0 * h);
      CHECK(std::abs(fd - grads[l].biases(r)) < 1e-6 * std::max(1.0, std::abs(fd)));
    }
  }
}

TEST_CASE("one SGD step with momentum and weight decay, computed by hand") {
  Mlp mlp;
  mlp.spec = {{1, 1, Activation::Identity}};
  Layer layer;
  layer.weights = Eigen::MatrixXd::Constant(1, 1, 1.0);
  layer.biases = Eigen::VectorXd::Zero(1);
  mlp.layers.push_back(layer);

  Gradients grads = zero_gradients(mlp);
  grads[0].weights(0, 0) = 0.5;
  grads[0].biases(0) = 0.25;

  SgdConfig cfg;
  cfg.learning_rate = 0.1;
  cfg.momentum = 0.9;
  cfg.weight_decay = 0.01;

  MomentumState state;
  sgd_step(mlp, grads, state, cfg);
  // v_w = 0.5 + 0.01*1 = 0.51 -> w = 1 - 0.051 = 0.949
  // v_b = 0.25            -> b = -0.025  (no decay on biases)
  CHECK(mlp.layers[0].weights(0, 0) == doctest::Approx(0.949).epsilon(1e-15));
  CHECK(mlp.layers[0].biases(0) == doctest::Approx(-0.025).epsilon(1e-15));

  Gradients zero = zero_gradients(mlp);
  sgd_step(mlp, zero, state, cfg);
  // v_w = 0.9*0.51 + 0.01*0.949 = 0.46849 -> w = 0.949 - 0.046849 = 0.902151
  // v_b = 0.9*0.25 = 0.225               -> b = -0.025 - 0.0225 = -0.0475
  CHECK(mlp.layers[0].weights(0, 0) == doctest::Approx(0.902151).epsilon(1e-12));
  CHECK(mlp.layers[0].biases(0) == doctest::Approx(-0.0475).epsilon(1e-12));
}

TEST_CASE("weight decay never touches biases") {
  Mlp mlp = init_mlp(mlp_spec(3, {4}, 2), 11);
  mlp.layers[0].biases.setConstant(0.7);
  const Eigen::VectorXd before = mlp.layers[0].biases;
  SgdConfig cfg;
  cfg.learning_rate = 0.5;
  cfg.weight_decay = 0.3;
  MomentumState state;
  sgd_step(mlp, zero_gradients(mlp), state, cfg);
  CHECK((mlp.layers[0].biases - before).cwiseAbs().maxCoeff() == 0.0);
  CHECK((mlp.layers[0].weights.cwiseAbs().maxCoeff() > 0.0));
}

TEST_CASE("sgd_step rejects mismatched gradient shapes") {
  Mlp mlp = init_mlp(mlp_spec(3, {4}, 2), 12);
  MomentumState state;
  Gradients wrong = zero_gradients(mlp);
  wrong[0].weights.resize(1, 1);
  CHECK_THROWS_AS(sgd_step(mlp, wrong, state, SgdConfig{}), NumericError);
  Gradients too_few(1);
  CHECK_THROWS_AS(sgd_step(mlp, too_few, state, SgdConfig{}), NumericError);
}

TEST_CASE("param_count counts weights plus biases") {
  const auto specs = mlp_spec(784, {1024}, 10);
  CHECK(param_count(specs) == 814090);  // 784*1024 + 1024 + 1024*10 + 10
  CHECK(param_count(init_mlp(mlp_spec(3, {4}, 2), 1)) == 3 * 4 + 4 + 4 * 2 + 2);
  CHECK(param_count(mlp_spec(784, {4}, 10)) == 3190);
}

TEST_CASE("mlp_spec builds ReLU hiddens with an identity head") {
  const auto specs = mlp_spec(10, {8, 6}, 4);
  REQUIRE(specs.size() == 3);
  CHECK(specs[0].activation == Activation::ReLU);
  CHECK(specs[1].activation == Activation::ReLU);
  CHECK(specs[2].activation == Activation::Identity);
  CHECK(specs[0].input_dim == 10);
  CHECK(specs[1].input_dim == 8);
  CHECK(specs[2].output_dim == 4);
}
