#include "agvrl/neuralnet.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "agvrl/rng.hpp"

namespace agvrl::nn {

Eigen::Index LayerSpec::param_count() const {
  Eigen::Index d = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l)
    d += static_cast<Eigen::Index>(sizes[l] + 1) * sizes[l + 1];
  return d;
}

void validate(const LayerSpec& spec) {
  if (spec.sizes.size() < 2) throw ShapeMismatch("layer spec needs at least input and output");
  for (int w : spec.sizes)
    if (w < 1) throw ShapeMismatch("layer width must be >= 1");
}

NetworkParams init_network(const LayerSpec& spec, std::uint64_t seed) {
  validate(spec);
  RandomStream stream(seed);
  NetworkParams p;
  p.spec = spec;
  for (int l = 0; l < spec.layer_count(); ++l) {
    const int n_in = spec.sizes[static_cast<std::size_t>(l)];
    const int n_out = spec.sizes[static_cast<std::size_t>(l) + 1];
    const double bound = std::sqrt(6.0 / (n_in + n_out));
    Eigen::MatrixXd w(n_out, n_in);
    for (int r = 0; r < n_out; ++r)
      for (int c = 0; c < n_in; ++c) w(r, c) = stream.uniform(-bound, bound);
    p.weights.push_back(std::move(w));
    p.biases.push_back(Eigen::VectorXd::Zero(n_out));
  }
  return p;
}

NetworkParams zero_network(const LayerSpec& spec) {
  validate(spec);
  NetworkParams p;
  p.spec = spec;
  for (int l = 0; l < spec.layer_count(); ++l) {
    p.weights.push_back(
        Eigen::MatrixXd::Zero(spec.sizes[static_cast<std::size_t>(l) + 1],
                              spec.sizes[static_cast<std::size_t>(l)]));
    p.biases.push_back(Eigen::VectorXd::Zero(spec.sizes[static_cast<std::size_t>(l) + 1]));
  }
  return p;
}

Eigen::VectorXd forward(const NetworkParams& params, const Eigen::VectorXd& input) {
  return forward_batch(params, input);
}

Eigen::MatrixXd forward_batch(const NetworkParams& params, const Eigen::MatrixXd& inputs) {
  if (inputs.rows() != params.spec.input_width())
    throw ShapeMismatch("input width does not match network spec");
  Eigen::MatrixXd a = inputs;
  const int layers = params.spec.layer_count();
  for (int l = 0; l < layers; ++l) {
    Eigen::MatrixXd z = (params.weights[static_cast<std::size_t>(l)] * a).colwise() +
                        params.biases[static_cast<std::size_t>(l)];
    a = (l + 1 < layers) ? z.cwiseMax(0.0).eval() : std::move(z);
  }
  return a;
}

namespace {

/// Shared backward pass. `output_seed` is (n_out x B): the gradient of the
/// scalar objective with respect to each network output. Returns the
/// flattened parameter gradient.
Eigen::VectorXd backward(const NetworkParams& params, const Eigen::MatrixXd& inputs,
                         Eigen::MatrixXd output_seed) {
  const int layers = params.spec.layer_count();

  // Forward, keeping pre-activations for the ReLU masks.
  std::vector<Eigen::MatrixXd> acts;  // acts[l] = input of layer l
  acts.reserve(static_cast<std::size_t>(layers));
  Eigen::MatrixXd a = inputs;
  std::vector<Eigen::MatrixXd> preacts(static_cast<std::size_t>(layers));
  for (int l = 0; l < layers; ++l) {
    acts.push_back(a);
    preacts[static_cast<std::size_t>(l)] =
        (params.weights[static_cast<std::size_t>(l)] * a).colwise() +
        params.biases[static_cast<std::size_t>(l)];
    a = (l + 1 < layers) ? preacts[static_cast<std::size_t>(l)].cwiseMax(0.0).eval()
                         : preacts[static_cast<std::size_t>(l)];
  }

  Eigen::VectorXd grad(params.spec.param_count());
  Eigen::Index tail = grad.size();
  Eigen::MatrixXd delta = std::move(output_seed);
  for (int l = layers - 1; l >= 0; --l) {
    const Eigen::MatrixXd& a_in = acts[static_cast<std::size_t>(l)];
    Eigen::MatrixXd gw = delta * a_in.transpose();
    Eigen::VectorXd gb = delta.rowwise().sum();
    tail -= gb.size();
    grad.segment(tail, gb.size()) = gb;
    tail -= gw.size();
    // Row-major copy to match the canonical flatten order.
    for (Eigen::Index r = 0; r < gw.rows(); ++r)
      grad.segment(tail + r * gw.cols(), gw.cols()) = gw.row(r).transpose();
    if (l > 0) {
      // ReLU subgradient at exactly 0 is 0.
      const Eigen::MatrixXd mask =
          (preacts[static_cast<std::size_t>(l - 1)].array() > 0.0).cast<double>();
      delta = (params.weights[static_cast<std::size_t>(l)].transpose() * delta)
                  .cwiseProduct(mask);
    }
  }
  return grad;
}

Eigen::MatrixXd stack_inputs(const NetworkParams& params, std::span<const BatchSample> batch) {
  Eigen::MatrixXd inputs(params.spec.input_width(), static_cast<Eigen::Index>(batch.size()));
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (batch[i].input.size() != params.spec.input_width())
      throw ShapeMismatch("batch sample input width mismatch");
    if (batch[i].action < 0 || batch[i].action >= params.spec.output_width())
      throw ShapeMismatch("batch sample action index out of range");
    inputs.col(static_cast<Eigen::Index>(i)) = batch[i].input;
  }
  return inputs;
}

}  // namespace

std::pair<Eigen::VectorXd, double> loss_and_grad(const NetworkParams& params,
                                                 std::span<const BatchSample> batch) {
  if (batch.empty()) throw ShapeMismatch("empty batch");
  const Eigen::MatrixXd inputs = stack_inputs(params, batch);
  const Eigen::MatrixXd q = forward_batch(params, inputs);

  Eigen::MatrixXd seed = Eigen::MatrixXd::Zero(q.rows(), q.cols());
  double loss = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto col = static_cast<Eigen::Index>(i);
    const double residual = q(batch[i].action, col) - batch[i].target;
    seed(batch[i].action, col) = residual;
    loss += 0.5 * residual * residual;
  }
  return {backward(params, inputs, std::move(seed)), loss};
}

Eigen::VectorXd grad_loss(const NetworkParams& params, std::span<const BatchSample> batch) {
  return loss_and_grad(params, batch).first;
}

NetworkParams sgd_step(const NetworkParams& params, const Eigen::VectorXd& gradient, double lr) {
  if (gradient.size() != params.spec.param_count())
    throw ShapeMismatch("gradient length does not match parameter count");
  NetworkParams out = params;
  Eigen::Index offset = 0;
  for (std::size_t l = 0; l < out.weights.size(); ++l) {
    Eigen::MatrixXd& w = out.weights[l];
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      w.row(r) -= lr * gradient.segment(offset, w.cols()).transpose();
      offset += w.cols();
    }
    out.biases[l] -= lr * gradient.segment(offset, out.biases[l].size());
    offset += out.biases[l].size();
  }
  return out;
}

Eigen::VectorXd flatten(const NetworkParams& params) {
  Eigen::VectorXd flat(params.spec.param_count());
  Eigen::Index offset = 0;
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    const Eigen::MatrixXd& w = params.weights[l];
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      flat.segment(offset, w.cols()) = w.row(r).transpose();
      offset += w.cols();
    }
    flat.segment(offset, params.biases[l].size()) = params.biases[l];
    offset += params.biases[l].size();
  }
  return flat;
}

NetworkParams unflatten(const LayerSpec& spec, const Eigen::VectorXd& flat) {
  validate(spec);
  if (flat.size() != spec.param_count())
    throw LengthMismatch("flat vector length does not match spec parameter count");
  NetworkParams p;
  p.spec = spec;
  Eigen::Index offset = 0;
  for (int l = 0; l < spec.layer_count(); ++l) {
    const int n_in = spec.sizes[static_cast<std::size_t>(l)];
    const int n_out = spec.sizes[static_cast<std::size_t>(l) + 1];
    Eigen::MatrixXd w(n_out, n_in);
    for (int r = 0; r < n_out; ++r) {
      w.row(r) = flat.segment(offset, n_in).transpose();
      offset += n_in;
    }
    p.weights.push_back(std::move(w));
    p.biases.push_back(flat.segment(offset, n_out));
    offset += n_out;
  }
  return p;
}

Eigen::VectorXd grad_q_theta(const NetworkParams& params, const Eigen::VectorXd& input,
                             int action) {
  if (input.size() != params.spec.input_width())
    throw ShapeMismatch("input width does not match network spec");
  if (action < 0 || action >= params.spec.output_width())
    throw ShapeMismatch("action index out of range");
  Eigen::MatrixXd seed = Eigen::MatrixXd::Zero(params.spec.output_width(), 1);
  seed(action, 0) = 1.0;
  return backward(params, input, std::move(seed));
}

void save_checkpoint(const NetworkParams& params, const std::filesystem::path& file) {
  nlohmann::json j;
  j["sizes"] = params.spec.sizes;
  const Eigen::VectorXd flat = flatten(params);
  j["params"] = std::vector<double>(flat.data(), flat.data() + flat.size());
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + file.string());
  out << j.dump();
}

NetworkParams load_checkpoint(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot read checkpoint: " + file.string());
  nlohmann::json j;
  in >> j;
  LayerSpec spec{j.at("sizes").get<std::vector<int>>()};
  const auto values = j.at("params").get<std::vector<double>>();
  Eigen::VectorXd flat = Eigen::Map<const Eigen::VectorXd>(
      values.data(), static_cast<Eigen::Index>(values.size()));
  return unflatten(spec, flat);
}

}  // namespace agvrl::nn
