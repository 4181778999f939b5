#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include "jtens/errors.hpp"

// Minimal dense network engine: affine + ReLU stacks, exact backprop, SGD
// with momentum and L2 weight decay. Everything is double precision and
// deterministic under a fixed seed.

namespace jtens {

enum class Activation { ReLU, Identity };

struct LayerSpec {
  Eigen::Index input_dim = 0;
  Eigen::Index output_dim = 0;
  Activation activation = Activation::Identity;
};

// Weights are output_dim x input_dim; a batch row vector x maps to W x + b.
struct Layer {
  Eigen::MatrixXd weights;
  Eigen::VectorXd biases;
};

struct Mlp {
  std::vector<LayerSpec> spec;
  std::vector<Layer> layers;

  Eigen::Index input_dim() const { return spec.empty() ? 0 : spec.front().input_dim; }
  Eigen::Index output_dim() const { return spec.empty() ? 0 : spec.back().output_dim; }
};

struct SgdConfig {
  double learning_rate = 0.1;
  double momentum = 0.0;      // in [0, 1)
  double weight_decay = 0.0;  // L2 on weights only, added to the gradient
  Eigen::Index batch_size = 100;
};

// Per-layer gradient / velocity storage, same shapes as the parameters.
using Gradients = std::vector<Layer>;

struct MomentumState {
  std::vector<Layer> velocity;
};

// Post-activation inputs per layer plus pre-activations, as needed by backward.
struct ForwardCache {
  std::vector<Eigen::MatrixXd> inputs;          // inputs[l]: batch into layer l
  std::vector<Eigen::MatrixXd> preactivations;  // z[l] = inputs[l] W_l^T + b_l
};

// Fan-in-scaled uniform init, bound sqrt(6 / fan_in); biases zero. Fully
// determined by the seed.
Mlp init_mlp(const std::vector<LayerSpec>& specs, std::uint64_t seed);

// Batch rows are examples. Throws NumericError naming the layer if any
// activation goes non-finite.
Eigen::MatrixXd forward(const Mlp& mlp, const Eigen::MatrixXd& batch, ForwardCache* cache);

inline Eigen::MatrixXd forward(const Mlp& mlp, const Eigen::MatrixXd& batch) {
  return forward(mlp, batch, nullptr);
}

// Exact gradients of the scalar loss whose logit-gradient is supplied.
Gradients backward(const Mlp& mlp, const ForwardCache& cache,
                   const Eigen::MatrixXd& dloss_dlogits);

// Classical momentum: v <- mu v + g + wd * theta ; theta <- theta - lr * v.
// Weight decay touches weights only, never biases. State is created lazily on
// first use and must keep matching shapes afterwards.
void sgd_step(Mlp& mlp, const Gradients& grads, MomentumState& state, const SgdConfig& config);

Gradients zero_gradients(const Mlp& mlp);

std::int64_t param_count(const Mlp& mlp);
std::int64_t param_count(const std::vector<LayerSpec>& specs);

// Single hidden layer (ReLU) classifier spec, the workhorse configuration.
std::vector<LayerSpec> mlp_spec(Eigen::Index input_dim,
                                const std::vector<Eigen::Index>& hidden_dims,
                                Eigen::Index output_dim);

}  // namespace jtens
