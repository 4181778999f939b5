#include "jtens/net.hpp"

#include <cmath>
#include <random>
#include <string>

namespace jtens {

namespace {

void check_chain(const std::vector<LayerSpec>& specs) {
  for (std::size_t l = 0; l < specs.size(); ++l) {
    if (specs[l].input_dim < 1 || specs[l].output_dim < 1)
      throw ConfigError("layer " + std::to_string(l) + ": dimensions must be positive");
    if (l > 0 && specs[l].input_dim != specs[l - 1].output_dim)
      throw ConfigError("layer " + std::to_string(l) + ": input dim " +
                        std::to_string(specs[l].input_dim) + " does not chain from " +
                        std::to_string(specs[l - 1].output_dim));
  }
}

}  // namespace

Mlp init_mlp(const std::vector<LayerSpec>& specs, std::uint64_t seed) {
  check_chain(specs);
  std::mt19937_64 rng(seed);
  Mlp mlp;
  mlp.spec = specs;
  mlp.layers.reserve(specs.size());
  for (const auto& s : specs) {
    const double bound = std::sqrt(6.0 / static_cast<double>(s.input_dim));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Layer layer;
    layer.weights.resize(s.output_dim, s.input_dim);
    for (Eigen::Index r = 0; r < s.output_dim; ++r)
      for (Eigen::Index c = 0; c < s.input_dim; ++c) layer.weights(r, c) = dist(rng);
    layer.biases = Eigen::VectorXd::Zero(s.output_dim);
    mlp.layers.push_back(std::move(layer));
  }
  return mlp;
}

Eigen::MatrixXd forward(const Mlp& mlp, const Eigen::MatrixXd& batch, ForwardCache* cache) {
  if (mlp.spec.empty()) throw ConfigError("forward: empty network");
  if (batch.cols() != mlp.input_dim())
    throw NumericError("forward: batch width " + std::to_string(batch.cols()) +
                       " != input dim " + std::to_string(mlp.input_dim()));
  if (cache) {
    cache->inputs.clear();
    cache->preactivations.clear();
    cache->inputs.reserve(mlp.layers.size());
    cache->preactivations.reserve(mlp.layers.size());
  }
  Eigen::MatrixXd x = batch;
  for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
    if (cache) cache->inputs.push_back(x);
    Eigen::MatrixXd z = x * mlp.layers[l].weights.transpose();
    z.rowwise() += mlp.layers[l].biases.transpose();
    if (!z.allFinite())
      throw NumericError("forward: non-finite activations in layer " + std::to_string(l));
    if (cache) cache->preactivations.push_back(z);
    if (mlp.spec[l].activation == Activation::ReLU)
      x = z.cwiseMax(0.0);
    else
      x = std::move(z);
  }
  return x;
}

Gradients backward(const Mlp& mlp, const ForwardCache& cache,
                   const Eigen::MatrixXd& dloss_dlogits) {
  if (cache.inputs.size() != mlp.layers.size())
    throw NumericError("backward: cache does not match network");
  if (dloss_dlogits.cols() != mlp.output_dim())
    throw NumericError("backward: logit gradient width mismatch");

  Gradients grads(mlp.layers.size());
  Eigen::MatrixXd delta = dloss_dlogits;
  for (std::size_t l = mlp.layers.size(); l-- > 0;) {
    if (mlp.spec[l].activation == Activation::ReLU)
      delta = delta.cwiseProduct((cache.preactivations[l].array() > 0.0).cast<double>().matrix());
    grads[l].weights.noalias() = delta.transpose() * cache.inputs[l];
    grads[l].biases = delta.colwise().sum().transpose();
    if (l > 0) delta = delta * mlp.layers[l].weights;
  }
  return grads;
}

void sgd_step(Mlp& mlp, const Gradients& grads, MomentumState& state, const SgdConfig& config) {
  if (grads.size() != mlp.layers.size()) throw NumericError("sgd_step: gradient shape mismatch");
  if (state.velocity.empty()) {
    state.velocity.resize(mlp.layers.size());
    for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
      state.velocity[l].weights = Eigen::MatrixXd::Zero(mlp.layers[l].weights.rows(),
                                                        mlp.layers[l].weights.cols());
      state.velocity[l].biases = Eigen::VectorXd::Zero(mlp.layers[l].biases.size());
    }
  }
  for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
    if (grads[l].weights.rows() != mlp.layers[l].weights.rows() ||
        grads[l].weights.cols() != mlp.layers[l].weights.cols())
      throw NumericError("sgd_step: gradient shape mismatch at layer " + std::to_string(l));
    Layer& v = state.velocity[l];
    v.weights = config.momentum * v.weights + grads[l].weights +
                config.weight_decay * mlp.layers[l].weights;
    v.biases = config.momentum * v.biases + grads[l].biases;
    mlp.layers[l].weights -= config.learning_rate * v.weights;
    mlp.layers[l].biases -= config.learning_rate * v.biases;
    if (!mlp.layers[l].weights.allFinite() || !mlp.layers[l].biases.allFinite())
      throw NumericError("sgd_step: non-finite parameters after update in layer " +
                         std::to_string(l));
  }
}

Gradients zero_gradients(const Mlp& mlp) {
  Gradients grads(mlp.layers.size());
  for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
    grads[l].weights =
        Eigen::MatrixXd::Zero(mlp.layers[l].weights.rows(), mlp.layers[l].weights.cols());
    grads[l].biases = Eigen::VectorXd::Zero(mlp.layers[l].biases.size());
  }
  return grads;
}

std::int64_t param_count(const Mlp& mlp) {
  std::int64_t n = 0;
  for (const auto& layer : mlp.layers)
    n += static_cast<std::int64_t>(layer.weights.size()) + layer.biases.size();
  return n;
}

std::int64_t param_count(const std::vector<LayerSpec>& specs) {
  std::int64_t n = 0;
  for (const auto& s : specs)
    n += static_cast<std::int64_t>(s.input_dim) * s.output_dim + s.output_dim;
  return n;
}

std::vector<LayerSpec> mlp_spec(Eigen::Index input_dim,
                                const std::vector<Eigen::Index>& hidden_dims,
                                Eigen::Index output_dim) {
  std::vector<LayerSpec> specs;
  Eigen::Index in = input_dim;
  for (Eigen::Index h : hidden_dims) {
    specs.push_back({in, h, Activation::ReLU});
    in = h;
  }
  specs.push_back({in, output_dim, Activation::Identity});
  return specs;
}

}  // namespace jtens
