#pragma once

#include <span>
#include <vector>

#include "agvrl/neuralnet.hpp"
#include "agvrl/replay.hpp"
#include "agvrl/rng.hpp"

namespace agvrl::ddqn {

/// Online network theta and periodically synchronized target copy.
struct AgentNets {
  nn::NetworkParams online;
  nn::NetworkParams target;
};

AgentNets make_agent(const nn::LayerSpec& spec, std::uint64_t seed);

/// Target bootstrap rule: Double uses the online argmax valued by the target
/// net; Max is the plain max over the target net (kept for ablation).
enum class TargetRule { Double, Max };

struct EpsilonSchedule {
  double initial = 1.0;
  double decay = 0.9995;  // multiplicative, per episode
  double floor = 0.001;

  double at(int episode) const;
};

/// Epsilon-greedy over the online Q-values; greedy ties break to the lowest
/// action index. With epsilon == 0 no randomness is consumed.
grid::Action select_action(const AgentNets& nets, const Eigen::VectorXd& obs, double epsilon,
                           RandomStream& stream);

std::vector<double> compute_targets(const AgentNets& nets,
                                    std::span<const replay::Transition> batch, double gamma,
                                    TargetRule rule = TargetRule::Double);

/// One SGD step on the TD loss; mutates only the online network, returns the
/// loss value before the update.
double train_step(AgentNets& nets, std::span<const replay::Transition> batch, double gamma,
                  double lr, TargetRule rule = TargetRule::Double);

void sync_target(AgentNets& nets);

}  // namespace agvrl::ddqn
