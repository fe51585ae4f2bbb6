#include "agvrl/trainers.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>

#include "agvrl/replay.hpp"

namespace agvrl::train {

std::string_view algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::DDQN: return "ddqn";
    case Algorithm::PFDDQN: return "pf-ddqn";
    case Algorithm::EKFDDQN: return "ekf-ddqn";
  }
  return "?";
}

std::optional<Algorithm> algorithm_from_name(std::string_view name) {
  if (name == "ddqn") return Algorithm::DDQN;
  if (name == "pf-ddqn") return Algorithm::PFDDQN;
  if (name == "ekf-ddqn") return Algorithm::EKFDDQN;
  return std::nullopt;
}

void validate(const TrainConfig& cfg) {
  if (cfg.memory_size == 0 || cfg.batch_size == 0) throw std::invalid_argument("zero-sized memory or batch");
  if (cfg.batch_size > cfg.memory_size) throw std::invalid_argument("batch larger than memory");
  if (cfg.gamma < 0.0 || cfg.gamma >= 1.0) throw std::invalid_argument("gamma outside [0, 1)");
  if (cfg.learning_rate <= 0.0) throw std::invalid_argument("learning rate must be positive");
  if (cfg.target_sync_every < 1 || cfg.train_every < 1 || cfg.filter_every < 1)
    throw std::invalid_argument("schedule counters must be >= 1");
  if (cfg.episodes < 1) throw std::invalid_argument("need at least one episode");
  if (cfg.eps_initial < 0.0 || cfg.eps_initial > 1.0 || cfg.eps_decay <= 0.0 ||
      cfg.eps_decay > 1.0 || cfg.eps_floor < 0.0)
    throw std::invalid_argument("bad epsilon schedule");
  for (int h : cfg.hidden)
    if (h < 1) throw std::invalid_argument("hidden width must be >= 1");
}

namespace {

using Clock = std::chrono::steady_clock;

nn::LayerSpec make_spec(const TrainConfig& cfg) {
  std::vector<int> sizes;
  sizes.push_back(grid::kObservationDim);
  sizes.insert(sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
  sizes.push_back(grid::kActionCount);
  return nn::LayerSpec{std::move(sizes)};
}

/// TD targets for the sampled batch; these are the filter observations Z.
Eigen::VectorXd observation_targets(const ddqn::AgentNets& nets,
                                    std::span<const replay::Transition> batch, double gamma,
                                    ddqn::TargetRule rule) {
  const std::vector<double> ys = ddqn::compute_targets(nets, batch, gamma, rule);
  return Eigen::Map<const Eigen::VectorXd>(ys.data(), static_cast<Eigen::Index>(ys.size()));
}

/// Q(s_j, a_j; theta) for every batch item under one flattened weight vector.
Eigen::VectorXd batch_q_values(const nn::LayerSpec& spec, const Eigen::VectorXd& theta,
                               const Eigen::MatrixXd& inputs, const std::vector<int>& actions) {
  const nn::NetworkParams params = nn::unflatten(spec, theta);
  const Eigen::MatrixXd q = nn::forward_batch(params, inputs);
  Eigen::VectorXd out(q.cols());
  for (Eigen::Index j = 0; j < q.cols(); ++j) out[j] = q(actions[static_cast<std::size_t>(j)], j);
  return out;
}

/// Filter correction applied right after each SGD step. theta_prev is the
/// online weight vector before the step.
using FilterCorrection = std::function<void(ddqn::AgentNets& nets,
                                            std::span<const replay::Transition> batch,
                                            const Eigen::VectorXd& theta_prev,
                                            RandomStream& stream)>;

RunResult run_core(const grid::GridMap& map, const TrainConfig& cfg,
                   const FilterCorrection& filter, const TrainHooks* hooks,
                   ddqn::AgentNets nets) {
  validate(cfg);
  grid::validate(map);
  const int m = map.agent_count();
  const int max_steps = cfg.max_steps > 0 ? cfg.max_steps : grid::default_max_steps(map);
  const std::size_t learn_start = std::max(cfg.learn_start, cfg.batch_size);

  RandomStream env_stream(derive_seed(cfg.seed, 1));
  RandomStream replay_stream(derive_seed(cfg.seed, 2));
  RandomStream filter_stream(derive_seed(cfg.seed, 3));

  replay::ReplayBuffer buffer(cfg.memory_size);
  const ddqn::EpsilonSchedule schedule{cfg.eps_initial, cfg.eps_decay, cfg.eps_floor};

  RunResult result;
  result.records.reserve(static_cast<std::size_t>(cfg.episodes));
  long train_steps = 0;
  long env_steps = 0;

  std::vector<Eigen::VectorXd> obs(static_cast<std::size_t>(m));
  std::vector<grid::Action> actions(static_cast<std::size_t>(m));

  for (int episode = 0; episode < cfg.episodes; ++episode) {
    const double eps = schedule.at(episode);
    grid::WorldState state = grid::reset(map);
    const auto t0 = Clock::now();
    double episode_reward = 0.0;
    grid::Cause cause = grid::Cause::Running;

    while (true) {
      for (int i = 0; i < m; ++i) {
        if (state.reached[static_cast<std::size_t>(i)]) {
          actions[static_cast<std::size_t>(i)] = grid::Action::Stay;
          continue;
        }
        obs[static_cast<std::size_t>(i)] = grid::observe(map, state, i);
        actions[static_cast<std::size_t>(i)] =
            ddqn::select_action(nets, obs[static_cast<std::size_t>(i)], eps, env_stream);
      }

      auto [next_state, outcome] = grid::step(map, state, actions, max_steps);

      for (int i = 0; i < m; ++i) {
        if (state.reached[static_cast<std::size_t>(i)]) continue;
        replay::Transition t;
        t.obs = obs[static_cast<std::size_t>(i)];
        t.action = actions[static_cast<std::size_t>(i)];
        t.reward = outcome.rewards[static_cast<std::size_t>(i)];
        t.next_obs = grid::observe(map, next_state, i);
        t.done = outcome.terminal || outcome.events[static_cast<std::size_t>(i)].reached_target;
        buffer.push(std::move(t));
      }
      episode_reward +=
          std::accumulate(outcome.rewards.begin(), outcome.rewards.end(), 0.0);
      state = std::move(next_state);
      ++env_steps;

      if (buffer.size() >= learn_start && env_steps % cfg.train_every == 0) {
        const std::vector<replay::Transition> batch =
            buffer.sample(cfg.batch_size, replay_stream);
        const Eigen::VectorXd theta_prev = filter ? nn::flatten(nets.online) : Eigen::VectorXd();
        ddqn::train_step(nets, batch, cfg.gamma, cfg.learning_rate, cfg.target_rule);
        ++train_steps;
        if (filter && train_steps % cfg.filter_every == 0)
          filter(nets, batch, theta_prev, filter_stream);
        if (train_steps % cfg.target_sync_every == 0) ddqn::sync_target(nets);
        if (hooks && hooks->on_train_step) hooks->on_train_step(static_cast<int>(train_steps), nets);
      }

      if (outcome.terminal) {
        cause = outcome.cause;
        break;
      }
    }

    EpisodeRecord rec;
    rec.episode = episode;
    rec.total_reward = episode_reward;
    rec.steps = state.step;
    rec.outcome = cause;
    rec.reached = state.reached;
    rec.epsilon = eps;
    rec.wall_ms = cfg.measure_time
                      ? std::chrono::duration<double, std::milli>(Clock::now() - t0).count()
                      : 0.0;
    result.records.push_back(std::move(rec));

    if (hooks && hooks->stop_early && hooks->stop_early(result.records)) break;
  }

  RunSummary& s = result.summary;
  s.episodes = static_cast<int>(result.records.size());
  for (const EpisodeRecord& r : result.records) {
    switch (r.outcome) {
      case grid::Cause::AllReached: ++s.target_hit; break;
      case grid::Cause::ObstacleCollision: ++s.obstacle_hit; break;
      case grid::Cause::AgentCollision: ++s.agent_collision; break;
      case grid::Cause::Timeout: ++s.timeout; break;
      case grid::Cause::Running: break;
    }
    s.wall_ms_total += r.wall_ms;
  }
  s.solution_episode = solution_episode(result.records);

  const GreedyEval eval = evaluate_greedy(nets, map, max_steps);
  s.final_success = eval.success;
  for (const paths::Path& p : eval.paths) {
    s.final_path_moves.push_back(paths::move_count(p));
    s.final_path_lengths.push_back(paths::path_length(p));
  }
  result.final_paths = eval.paths;
  result.nets = std::move(nets);
  return result;
}

ddqn::AgentNets seed_agent(const grid::GridMap&, const TrainConfig& cfg) {
  return ddqn::make_agent(make_spec(cfg), derive_seed(cfg.seed, 0));
}

}  // namespace

RunResult run_ddqn(const grid::GridMap& map, const TrainConfig& cfg, const TrainHooks* hooks) {
  return run_core(map, cfg, nullptr, hooks, seed_agent(map, cfg));
}

RunResult run_pf_ddqn(const grid::GridMap& map, const TrainConfig& cfg, const pf::PFConfig& pf_cfg,
                      const TrainHooks* hooks) {
  pf::validate(pf_cfg);
  ddqn::AgentNets nets = seed_agent(map, cfg);
  const nn::LayerSpec spec = nets.online.spec;

  RandomStream init_stream(derive_seed(cfg.seed, 4));
  pf::ParticleSet particles = pf::init_particles(nn::flatten(nets.online), pf_cfg, init_stream);

  FilterCorrection correction = [&, spec, pf_cfg](ddqn::AgentNets& agent,
                                                  std::span<const replay::Transition> batch,
                                                  const Eigen::VectorXd& theta_prev,
                                                  RandomStream& stream) {
    const Eigen::VectorXd theta_sgd = nn::flatten(agent.online);
    const Eigen::VectorXd z = observation_targets(agent, batch, cfg.gamma, cfg.target_rule);

    Eigen::MatrixXd inputs(spec.input_width(), static_cast<Eigen::Index>(batch.size()));
    std::vector<int> acts(batch.size());
    for (std::size_t j = 0; j < batch.size(); ++j) {
      inputs.col(static_cast<Eigen::Index>(j)) = batch[j].obs;
      acts[j] = static_cast<int>(batch[j].action);
    }

    // The SGD increment enters the state equation as the control input, so
    // the particle cloud tracks the optimizer trajectory and the filter only
    // has to model the residual weight error.
    pf::shift(particles, theta_sgd - theta_prev);
    pf::predict(particles, pf_cfg, stream);
    pf::update_weights(
        particles, z,
        [&](const Eigen::VectorXd& theta) { return batch_q_values(spec, theta, inputs, acts); },
        pf_cfg);
    if (pf::ess(particles) < pf_cfg.ess_threshold) pf::systematic_resample(particles, stream);

    agent.online = nn::unflatten(spec, pf::estimate(particles));
    if (cfg.inject_sgd_particle)
      particles.particles.col(pf::lowest_weight_index(particles)) = theta_sgd;
  };

  return run_core(map, cfg, correction, hooks, std::move(nets));
}

RunResult run_ekf_ddqn(const grid::GridMap& map, const TrainConfig& cfg,
                       const ekf::EKFConfig& ekf_cfg, const TrainHooks* hooks) {
  ddqn::AgentNets nets = seed_agent(map, cfg);
  const nn::LayerSpec spec = nets.online.spec;
  ekf::EKFState state = ekf::make_state(nn::flatten(nets.online), ekf_cfg);

  FilterCorrection correction = [&, spec](ddqn::AgentNets& agent,
                                          std::span<const replay::Transition> batch,
                                          const Eigen::VectorXd& /*theta_prev*/,
                                          RandomStream& /*stream*/) {
    const Eigen::VectorXd z = observation_targets(agent, batch, cfg.gamma, cfg.target_rule);
    // Re-seed the estimate from the SGD-updated weights; P carries over.
    state.theta_hat = nn::flatten(agent.online);
    ekf::ekf_batch_update(
        state, z,
        [&](const Eigen::VectorXd& theta, Eigen::Index j) {
          const nn::NetworkParams params = nn::unflatten(spec, theta);
          const auto& t = batch[static_cast<std::size_t>(j)];
          const int action = static_cast<int>(t.action);
          const double h = nn::forward(params, t.obs)[action];
          return std::make_pair(h, nn::grad_q_theta(params, t.obs, action));
        });
    agent.online = nn::unflatten(spec, state.theta_hat);
  };

  return run_core(map, cfg, correction, hooks, std::move(nets));
}

GreedyEval evaluate_greedy(const ddqn::AgentNets& nets, const grid::GridMap& map, int max_steps) {
  const int m = map.agent_count();
  RandomStream dummy(0);  // epsilon = 0 never consumes randomness
  grid::WorldState state = grid::reset(map);

  GreedyEval eval;
  eval.paths.assign(static_cast<std::size_t>(m), {});
  for (int i = 0; i < m; ++i) eval.paths[static_cast<std::size_t>(i)].push_back(state.positions[static_cast<std::size_t>(i)]);

  std::vector<grid::Action> actions(static_cast<std::size_t>(m));
  while (true) {
    for (int i = 0; i < m; ++i) {
      actions[static_cast<std::size_t>(i)] =
          state.reached[static_cast<std::size_t>(i)]
              ? grid::Action::Stay
              : ddqn::select_action(nets, grid::observe(map, state, i), 0.0, dummy);
    }
    auto [next_state, outcome] = grid::step(map, state, actions, max_steps);
    state = std::move(next_state);
    for (int i = 0; i < m; ++i)
      eval.paths[static_cast<std::size_t>(i)].push_back(state.positions[static_cast<std::size_t>(i)]);
    if (outcome.terminal) {
      eval.success = outcome.cause == grid::Cause::AllReached;
      break;
    }
  }
  return eval;
}

std::optional<int> solution_episode(std::span<const EpisodeRecord> records, int window,
                                    double threshold) {
  if (static_cast<int>(records.size()) < window) return std::nullopt;
  int successes = 0;
  for (int e = 0; e < static_cast<int>(records.size()); ++e) {
    if (records[static_cast<std::size_t>(e)].outcome == grid::Cause::AllReached) ++successes;
    if (e >= window &&
        records[static_cast<std::size_t>(e - window)].outcome == grid::Cause::AllReached)
      --successes;
    if (e >= window - 1 && successes >= threshold * window) return e;
  }
  return std::nullopt;
}

}  // namespace agvrl::train
