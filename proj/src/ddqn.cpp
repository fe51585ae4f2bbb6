#include "agvrl/ddqn.hpp"

#include <algorithm>
#include <cmath>

namespace agvrl::ddqn {

AgentNets make_agent(const nn::LayerSpec& spec, std::uint64_t seed) {
  AgentNets nets;
  nets.online = nn::init_network(spec, seed);
  nets.target = nets.online;
  return nets;
}

double EpsilonSchedule::at(int episode) const {
  return std::max(floor, initial * std::pow(decay, episode));
}

namespace {

Eigen::Index argmax_lowest(const Eigen::VectorXd& q) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < q.size(); ++i)
    if (q[i] > q[best]) best = i;
  return best;
}

}  // namespace

grid::Action select_action(const AgentNets& nets, const Eigen::VectorXd& obs, double epsilon,
                           RandomStream& stream) {
  if (epsilon < 0.0 || epsilon > 1.0) throw std::invalid_argument("epsilon outside [0, 1]");
  if (epsilon > 0.0 && stream.uniform() < epsilon) {
    const auto n = static_cast<std::size_t>(nets.online.spec.output_width());
    return static_cast<grid::Action>(stream.uniform_index(n));
  }
  return static_cast<grid::Action>(argmax_lowest(nn::forward(nets.online, obs)));
}

std::vector<double> compute_targets(const AgentNets& nets,
                                    std::span<const replay::Transition> batch, double gamma,
                                    TargetRule rule) {
  if (gamma < 0.0 || gamma >= 1.0) throw std::invalid_argument("gamma outside [0, 1)");
  std::vector<double> targets;
  targets.reserve(batch.size());
  for (const auto& t : batch) {
    if (t.done) {
      targets.push_back(t.reward);
      continue;
    }
    const Eigen::VectorXd q_target = nn::forward(nets.target, t.next_obs);
    double bootstrap;
    if (rule == TargetRule::Double) {
      const Eigen::VectorXd q_online = nn::forward(nets.online, t.next_obs);
      bootstrap = q_target[argmax_lowest(q_online)];
    } else {
      bootstrap = q_target.maxCoeff();
    }
    targets.push_back(t.reward + gamma * bootstrap);
  }
  return targets;
}

double train_step(AgentNets& nets, std::span<const replay::Transition> batch, double gamma,
                  double lr, TargetRule rule) {
  if (batch.empty()) throw nn::ShapeMismatch("empty training batch");
  const std::vector<double> targets = compute_targets(nets, batch, gamma, rule);
  std::vector<nn::BatchSample> samples(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    samples[i].input = batch[i].obs;
    samples[i].action = static_cast<int>(batch[i].action);
    samples[i].target = targets[i];
  }
  auto [grad, loss] = nn::loss_and_grad(nets.online, samples);
  nets.online = nn::sgd_step(nets.online, grad, lr);
  return loss;
}

void sync_target(AgentNets& nets) { nets.target = nets.online; }

}  // namespace agvrl::ddqn
