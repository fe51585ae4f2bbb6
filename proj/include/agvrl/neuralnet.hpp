#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

namespace agvrl::nn {

struct ShapeMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct LengthMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Layer widths [input, hidden..., output]. Hidden layers use ReLU, the
/// output layer is linear.
struct LayerSpec {
  std::vector<int> sizes;

  int input_width() const { return sizes.front(); }
  int output_width() const { return sizes.back(); }
  int layer_count() const { return static_cast<int>(sizes.size()) - 1; }

  /// Total parameter count d = sum over layers of (n_in + 1) * n_out.
  Eigen::Index param_count() const;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

void validate(const LayerSpec& spec);

/// Dense network parameters; weights[l] is (n_out x n_in), biases[l] n_out.
struct NetworkParams {
  LayerSpec spec;
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
};

/// Glorot-uniform weights, zero biases; deterministic per seed.
NetworkParams init_network(const LayerSpec& spec, std::uint64_t seed);

NetworkParams zero_network(const LayerSpec& spec);

Eigen::VectorXd forward(const NetworkParams& params, const Eigen::VectorXd& input);

/// Column-per-sample batched forward pass; returns (output_width x B).
Eigen::MatrixXd forward_batch(const NetworkParams& params, const Eigen::MatrixXd& inputs);

struct BatchSample {
  Eigen::VectorXd input;
  int action = 0;
  double target = 0.0;
};

/// Gradient of L = 1/2 sum_i (Q(s_i, a_i) - y_i)^2, flattened in canonical
/// order. Non-selected outputs carry zero gradient at the output layer.
Eigen::VectorXd grad_loss(const NetworkParams& params, std::span<const BatchSample> batch);

/// Same backward pass but also reports the loss value.
std::pair<Eigen::VectorXd, double> loss_and_grad(const NetworkParams& params,
                                                 std::span<const BatchSample> batch);

/// theta' = theta - lr * gradient.
NetworkParams sgd_step(const NetworkParams& params, const Eigen::VectorXd& gradient, double lr);

/// Canonical order: layer 0 weights row-major, layer 0 biases, layer 1, ...
Eigen::VectorXd flatten(const NetworkParams& params);
NetworkParams unflatten(const LayerSpec& spec, const Eigen::VectorXd& flat);

/// Gradient of the single scalar Q(input, action) with respect to all
/// parameters, flattened.
Eigen::VectorXd grad_q_theta(const NetworkParams& params, const Eigen::VectorXd& input,
                             int action);

/// Checkpoint files are JSON: {"sizes": [...], "params": [...]}.
void save_checkpoint(const NetworkParams& params, const std::filesystem::path& file);
NetworkParams load_checkpoint(const std::filesystem::path& file);

}  // namespace agvrl::nn
