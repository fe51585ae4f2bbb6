#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "agvrl/ddqn.hpp"
#include "agvrl/neuralnet.hpp"
#include "agvrl/rng.hpp"

using namespace agvrl;
using nn::LayerSpec;
using nn::NetworkParams;

namespace {

/// Central finite differences on the batch loss; the independent oracle for
/// every analytic gradient below.
Eigen::VectorXd fd_grad_loss(const NetworkParams& params,
                             std::span<const nn::BatchSample> batch, double eps = 1e-5) {
  const Eigen::VectorXd theta = nn::flatten(params);
  Eigen::VectorXd grad(theta.size());
  const auto loss_at = [&](const Eigen::VectorXd& t) {
    const NetworkParams p = nn::unflatten(params.spec, t);
    double loss = 0.0;
    for (const auto& s : batch) {
      const double r = nn::forward(p, s.input)[s.action] - s.target;
      loss += 0.5 * r * r;
    }
    return loss;
  };
  for (Eigen::Index k = 0; k < theta.size(); ++k) {
    Eigen::VectorXd hi = theta, lo = theta;
    hi[k] += eps;
    lo[k] -= eps;
    grad[k] = (loss_at(hi) - loss_at(lo)) / (2 * eps);
  }
  return grad;
}

std::vector<nn::BatchSample> random_batch(const LayerSpec& spec, int n, RandomStream& stream) {
  std::vector<nn::BatchSample> batch(static_cast<std::size_t>(n));
  for (auto& s : batch) {
    s.input = Eigen::VectorXd::Zero(spec.input_width());
    for (Eigen::Index k = 0; k < s.input.size(); ++k) s.input[k] = stream.uniform(-1.0, 1.0);
    s.action = static_cast<int>(stream.uniform_index(static_cast<std::size_t>(spec.output_width())));
    s.target = stream.uniform(-2.0, 2.0);
  }
  return batch;
}

double rel_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return (a - b).norm() / std::max(1e-12, b.norm());
}

}  // namespace

TEST_CASE("init_network: determinism, zero biases, Glorot bound") {
  const LayerSpec spec{{14, 32, 9}};
  const NetworkParams a = nn::init_network(spec, 7);
  const NetworkParams b = nn::init_network(spec, 7);
  CHECK(nn::flatten(a) == nn::flatten(b));
  const NetworkParams c = nn::init_network(spec, 8);
  CHECK(nn::flatten(a) != nn::flatten(c));

  for (const auto& bias : a.biases)
    CHECK(bias.cwiseAbs().maxCoeff() == 0.0);

  const double bound = std::sqrt(6.0 / 46.0);
  CHECK(bound == doctest::Approx(0.3612).epsilon(1e-3));
  CHECK(a.weights[0].cwiseAbs().maxCoeff() <= bound);
  CHECK(a.weights[0].cwiseAbs().maxCoeff() > 0.5 * bound);  // actually spread out
}

TEST_CASE("forward: zero net, identity net, hand-computed case") {
  const LayerSpec tiny{{3, 2}};
  const NetworkParams zeros = nn::zero_network(tiny);
  const Eigen::VectorXd out = nn::forward(zeros, Eigen::Vector3d{1.0, -2.0, 3.0});
  CHECK(out.cwiseAbs().maxCoeff() == 0.0);

  NetworkParams identity = nn::zero_network(LayerSpec{{1, 1}});
  identity.weights[0](0, 0) = 1.0;
  CHECK(nn::forward(identity, Eigen::VectorXd::Constant(1, 4.25))[0] == 4.25);

  // 2 -> 2 -> 1 with hand-set weights, evaluated by hand.
  NetworkParams p = nn::zero_network(LayerSpec{{2, 2, 1}});
  p.weights[0] << 1.0, 2.0, 3.0, 4.0;
  p.biases[0] << 0.5, -1.0;
  p.weights[1] << 1.0, -1.0;
  p.biases[1] << 0.25;
  // input (2,1): hidden pre = (4.5, 9), relu keeps both, out = 4.5 - 9 + 0.25
  CHECK(nn::forward(p, Eigen::Vector2d{2.0, 1.0})[0] == doctest::Approx(-4.25).epsilon(1e-12));
  // input (1,-2): hidden pre = (-2.5, -6) -> relu zeroes both, out = 0.25
  CHECK(nn::forward(p, Eigen::Vector2d{1.0, -2.0})[0] == doctest::Approx(0.25).epsilon(1e-12));

  CHECK_THROWS_AS(nn::forward(p, Eigen::Vector3d{1, 2, 3}), nn::ShapeMismatch);
}

TEST_CASE("grad_loss: residual zero, hand case, finite differences") {
  NetworkParams lin = nn::zero_network(LayerSpec{{1, 1}});
  lin.weights[0](0, 0) = 1.0;

  std::vector<nn::BatchSample> fitted(1);
  fitted[0] = {Eigen::VectorXd::Constant(1, 2.0), 0, 2.0};
  CHECK(nn::grad_loss(lin, fitted).cwiseAbs().maxCoeff() == 0.0);

  // s = 2, y = 0: residual 2, dL/dw = 4, dL/db = 2.
  std::vector<nn::BatchSample> off(1);
  off[0] = {Eigen::VectorXd::Constant(1, 2.0), 0, 0.0};
  const Eigen::VectorXd g = nn::grad_loss(lin, off);
  CHECK(g[0] == doctest::Approx(4.0));
  CHECK(g[1] == doctest::Approx(2.0));

  RandomStream stream(11);
  for (const auto& sizes : {std::vector<int>{2, 3, 2}, {4, 8, 8, 3}, {14, 32, 32, 9}}) {
    const LayerSpec spec{sizes};
    const NetworkParams p = nn::init_network(spec, stream.next_u64());
    const auto batch = random_batch(spec, 5, stream);
    CHECK(rel_error(nn::grad_loss(p, batch), fd_grad_loss(p, batch)) < 1e-4);
  }
}

TEST_CASE("grad_loss: empty batch and bad shapes throw") {
  const NetworkParams p = nn::init_network(LayerSpec{{2, 2}}, 1);
  CHECK_THROWS_AS(nn::grad_loss(p, std::span<const nn::BatchSample>{}), nn::ShapeMismatch);
  std::vector<nn::BatchSample> bad(1);
  bad[0] = {Eigen::Vector2d{1, 2}, 7, 0.0};  // action out of range
  CHECK_THROWS_AS(nn::grad_loss(p, bad), nn::ShapeMismatch);
}

TEST_CASE("relu subgradient at exactly zero is zero") {
  // Pre-activation is exactly 0 at the hidden unit; its incoming weight must
  // receive no gradient.
  NetworkParams p = nn::zero_network(LayerSpec{{1, 1, 1}});
  p.weights[0](0, 0) = 1.0;
  p.biases[0](0) = -1.0;  // input 1 -> pre-activation exactly 0
  p.weights[1](0, 0) = 5.0;
  std::vector<nn::BatchSample> batch(1);
  batch[0] = {Eigen::VectorXd::Constant(1, 1.0), 0, 1.0};
  const Eigen::VectorXd g = nn::grad_loss(p, batch);
  CHECK(g[0] == 0.0);  // first-layer weight
  CHECK(g[1] == 0.0);  // first-layer bias
}

TEST_CASE("sgd_step") {
  NetworkParams p = nn::zero_network(LayerSpec{{1, 1}});
  p.weights[0](0, 0) = 1.0;
  p.biases[0](0) = 1.0;

  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(2);
  CHECK(nn::flatten(nn::sgd_step(p, zero, 0.1)) == nn::flatten(p));

  Eigen::VectorXd g(2);
  g << 2.0, -4.0;
  CHECK(nn::flatten(nn::sgd_step(p, g, 0.0)) == nn::flatten(p));
  const Eigen::VectorXd updated = nn::flatten(nn::sgd_step(p, g, 0.1));
  CHECK(updated[0] == doctest::Approx(0.8));
  CHECK(updated[1] == doctest::Approx(1.4));

  CHECK_THROWS_AS(nn::sgd_step(p, Eigen::VectorXd::Zero(5), 0.1), nn::ShapeMismatch);
}

TEST_CASE("flatten/unflatten: round trip, count, single-index coupling") {
  const LayerSpec spec{{14, 32, 9}};
  CHECK(spec.param_count() == 777);
  CHECK(LayerSpec{{14, 32, 32, 9}}.param_count() == 1833);

  const NetworkParams p = nn::init_network(spec, 3);
  const Eigen::VectorXd flat = nn::flatten(p);
  const NetworkParams q = nn::unflatten(spec, flat);
  CHECK(nn::flatten(q) == flat);

  CHECK_THROWS_AS(nn::unflatten(spec, Eigen::VectorXd::Zero(776)), nn::LengthMismatch);

  // Perturbing one flat index changes exactly one parameter.
  RandomStream stream(5);
  for (int trial = 0; trial < 20; ++trial) {
    const auto k = static_cast<Eigen::Index>(stream.uniform_index(777));
    Eigen::VectorXd bumped = flat;
    bumped[k] += 1.0;
    const NetworkParams r = nn::unflatten(spec, bumped);
    int changed = 0;
    for (std::size_t l = 0; l < p.weights.size(); ++l) {
      changed += static_cast<int>((r.weights[l].array() != p.weights[l].array()).count());
      changed += static_cast<int>((r.biases[l].array() != p.biases[l].array()).count());
    }
    CHECK(changed == 1);
  }
}

TEST_CASE("grad_q_theta: hand case, zero input, finite differences, grad_loss cross-check") {
  NetworkParams lin = nn::zero_network(LayerSpec{{1, 1}});
  lin.weights[0](0, 0) = 2.0;
  const Eigen::VectorXd g = nn::grad_q_theta(lin, Eigen::VectorXd::Constant(1, 3.0), 0);
  CHECK(g[0] == doctest::Approx(3.0));  // dQ/dw = s
  CHECK(g[1] == doctest::Approx(1.0));  // dQ/db = 1

  // Zero input on a bias-free net: no gradient reaches first-layer weights.
  NetworkParams p = nn::init_network(LayerSpec{{3, 4, 2}}, 9);
  const Eigen::VectorXd gz = nn::grad_q_theta(p, Eigen::Vector3d::Zero(), 1);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 3; ++c) CHECK(gz[r * 3 + c] == 0.0);

  // Finite differences on the scalar Q.
  RandomStream stream(21);
  const LayerSpec spec{{4, 6, 3}};
  const NetworkParams q = nn::init_network(spec, 31);
  Eigen::VectorXd input(4);
  for (int k = 0; k < 4; ++k) input[k] = stream.uniform(-1, 1);
  const int action = 2;
  const Eigen::VectorXd analytic = nn::grad_q_theta(q, input, action);
  const Eigen::VectorXd theta = nn::flatten(q);
  Eigen::VectorXd fd(theta.size());
  const double eps = 1e-5;
  for (Eigen::Index k = 0; k < theta.size(); ++k) {
    Eigen::VectorXd hi = theta, lo = theta;
    hi[k] += eps;
    lo[k] -= eps;
    fd[k] = (nn::forward(nn::unflatten(spec, hi), input)[action] -
             nn::forward(nn::unflatten(spec, lo), input)[action]) /
            (2 * eps);
  }
  CHECK(rel_error(analytic, fd) < 1e-4);

  // grad_q_theta equals grad_loss on a one-sample batch with residual 1.
  std::vector<nn::BatchSample> one(1);
  one[0] = {input, action, nn::forward(q, input)[action] - 1.0};
  CHECK((nn::grad_loss(q, one) - analytic).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("checkpoint round trip") {
  const auto file = std::filesystem::temp_directory_path() / "agvrl_ckpt_test.json";
  const NetworkParams p = nn::init_network(LayerSpec{{5, 7, 3}}, 77);
  nn::save_checkpoint(p, file);
  const NetworkParams q = nn::load_checkpoint(file);
  CHECK(q.spec == p.spec);
  CHECK(nn::flatten(q) == nn::flatten(p));
  std::filesystem::remove(file);
}

// ---------------------------------------------------------------------------
// ddqn

namespace {

/// Zero network whose outputs are fixed by the last-layer biases.
ddqn::AgentNets nets_with_outputs(const Eigen::VectorXd& online_q,
                                  const Eigen::VectorXd& target_q) {
  const LayerSpec spec{{2, static_cast<int>(online_q.size())}};
  ddqn::AgentNets nets;
  nets.online = nn::zero_network(spec);
  nets.online.biases[0] = online_q;
  nets.target = nn::zero_network(spec);
  nets.target.biases[0] = target_q;
  return nets;
}

}  // namespace

TEST_CASE("select_action: greedy argmax and tie-breaking") {
  Eigen::VectorXd q = Eigen::VectorXd::Zero(9);
  q[5] = 3.0;
  const auto nets = nets_with_outputs(q, q);
  RandomStream stream(1);
  const Eigen::VectorXd obs = Eigen::Vector2d{0.0, 0.0};
  CHECK(ddqn::select_action(nets, obs, 0.0, stream) == static_cast<grid::Action>(5));

  const auto flat = nets_with_outputs(Eigen::VectorXd::Zero(9), Eigen::VectorXd::Zero(9));
  CHECK(ddqn::select_action(flat, obs, 0.0, stream) == static_cast<grid::Action>(0));
}

TEST_CASE("select_action: epsilon = 1 is uniform over the 9 actions") {
  const auto nets = nets_with_outputs(Eigen::VectorXd::Zero(9), Eigen::VectorXd::Zero(9));
  RandomStream stream(42);
  const Eigen::VectorXd obs = Eigen::Vector2d{0.0, 0.0};
  std::vector<int> counts(9, 0);
  const int n = 100000;
  for (int i = 0; i < n; ++i)
    ++counts[static_cast<int>(ddqn::select_action(nets, obs, 1.0, stream))];
  const double expected = n / 9.0;
  const double sigma = std::sqrt(n * (1.0 / 9) * (8.0 / 9));
  for (int c : counts) CHECK(std::abs(c - expected) < 3 * sigma);
}

TEST_CASE("compute_targets") {
  replay::Transition done_t;
  done_t.obs = Eigen::Vector2d{0, 0};
  done_t.next_obs = Eigen::Vector2d{0, 0};
  done_t.reward = -20.0;
  done_t.done = true;

  Eigen::VectorXd online_q(9), target_q(9);
  online_q << 0.2, 0.5, -1, -1, -1, -1, -1, -1, -1;
  target_q << 1.0, 2.0, -9, -9, -9, -9, -9, -9, -9;
  const auto nets = nets_with_outputs(online_q, target_q);

  SUBCASE("done transitions pass the reward through") {
    const auto ys = ddqn::compute_targets(nets, std::vector{done_t}, 0.95);
    CHECK(ys[0] == -20.0);
  }
  SUBCASE("gamma 0 reduces to the reward") {
    replay::Transition t = done_t;
    t.done = false;
    t.reward = 1.5;
    const auto ys = ddqn::compute_targets(nets, std::vector{t}, 0.0);
    CHECK(ys[0] == doctest::Approx(1.5));
  }
  SUBCASE("double estimator: target value at the online argmax") {
    replay::Transition t = done_t;
    t.done = false;
    t.reward = 1.0;
    const auto ys = ddqn::compute_targets(nets, std::vector{t}, 0.95);
    CHECK(ys[0] == doctest::Approx(1.0 + 0.95 * 2.0));  // a* = 1 from online
  }
  SUBCASE("constructed divergence separates the two rules") {
    // Target prefers action 0, online prefers action 1; the double estimator
    // must take the target's value at the online argmax, not its max.
    Eigen::VectorXd online2(9), target2(9);
    online2 << 0.0, 5.0, 0, 0, 0, 0, 0, 0, 0;
    target2 << 7.0, 2.0, 0, 0, 0, 0, 0, 0, 0;
    const auto diverged = nets_with_outputs(online2, target2);
    replay::Transition t = done_t;
    t.done = false;
    t.reward = 0.0;
    const auto d = ddqn::compute_targets(diverged, std::vector{t}, 1.0 - 1e-12);
    CHECK(d[0] == doctest::Approx(2.0));  // not 7
    const auto m = ddqn::compute_targets(diverged, std::vector{t}, 1.0 - 1e-12,
                                         ddqn::TargetRule::Max);
    CHECK(m[0] == doctest::Approx(7.0));
  }
  SUBCASE("equal nets make both rules agree") {
    const auto same = nets_with_outputs(target_q, target_q);
    replay::Transition t = done_t;
    t.done = false;
    t.reward = 0.5;
    const auto d = ddqn::compute_targets(same, std::vector{t}, 0.9);
    const auto m = ddqn::compute_targets(same, std::vector{t}, 0.9, ddqn::TargetRule::Max);
    CHECK(d[0] == m[0]);
  }
}

TEST_CASE("train_step: fitted batch, descent, target untouched") {
  const LayerSpec spec{{2, 8, 3}};
  ddqn::AgentNets nets = ddqn::make_agent(spec, 17);

  // Batch of done transitions whose targets already match Q.
  std::vector<replay::Transition> fitted(4);
  RandomStream stream(3);
  for (auto& t : fitted) {
    t.obs = Eigen::Vector2d{stream.uniform(-1, 1), stream.uniform(-1, 1)};
    t.next_obs = t.obs;
    t.action = static_cast<grid::Action>(stream.uniform_index(3));
    t.done = true;
    t.reward = nn::forward(nets.online, t.obs)[static_cast<int>(t.action)];
  }
  const Eigen::VectorXd before = nn::flatten(nets.online);
  const double loss0 = ddqn::train_step(nets, fitted, 0.9, 1e-3);
  CHECK(loss0 == doctest::Approx(0.0));
  CHECK(nn::flatten(nets.online) == before);

  // Repeated steps on one fixed batch do not increase the loss.
  std::vector<replay::Transition> batch(8);
  for (auto& t : batch) {
    t.obs = Eigen::Vector2d{stream.uniform(-1, 1), stream.uniform(-1, 1)};
    t.next_obs = t.obs;
    t.action = static_cast<grid::Action>(stream.uniform_index(3));
    t.done = true;
    t.reward = stream.uniform(-1, 1);
  }
  const Eigen::VectorXd target_before = nn::flatten(nets.target);
  double prev = ddqn::train_step(nets, batch, 0.9, 1e-4);
  for (int i = 0; i < 100; ++i) {
    const double loss = ddqn::train_step(nets, batch, 0.9, 1e-4);
    CHECK(loss <= prev + 1e-12);
    prev = loss;
  }
  CHECK(nn::flatten(nets.target) == target_before);  // bit-identical
}

TEST_CASE("sync_target is exact and idempotent") {
  ddqn::AgentNets nets = ddqn::make_agent(LayerSpec{{2, 4, 3}}, 5);
  std::vector<replay::Transition> batch(2);
  for (auto& t : batch) {
    t.obs = Eigen::Vector2d{0.5, -0.5};
    t.next_obs = t.obs;
    t.action = grid::Action::North;
    t.done = true;
    t.reward = 1.0;
  }
  ddqn::train_step(nets, batch, 0.9, 1e-2);
  CHECK(nn::flatten(nets.target) != nn::flatten(nets.online));
  ddqn::sync_target(nets);
  CHECK(nn::flatten(nets.target) == nn::flatten(nets.online));
  ddqn::sync_target(nets);
  CHECK(nn::flatten(nets.target) == nn::flatten(nets.online));
}

TEST_CASE("epsilon schedule bounds and monotonicity") {
  const ddqn::EpsilonSchedule sched{1.0, 0.9995, 0.001};
  CHECK(sched.at(0) == 1.0);
  double prev = 1.0;
  for (int e = 1; e < 20000; e += 37) {
    const double eps = sched.at(e);
    CHECK(eps <= prev);
    CHECK(eps >= sched.floor);
    CHECK(eps <= 1.0);
    prev = eps;
  }
  CHECK(sched.at(20000) == doctest::Approx(0.001));  // floor reached
}
