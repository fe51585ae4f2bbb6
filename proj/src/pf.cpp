#include "agvrl/pf.hpp"

#include <cmath>
#include <limits>

namespace agvrl::pf {

void validate(const PFConfig& cfg) {
  if (cfg.num_particles < 2) throw std::invalid_argument("need at least 2 particles");
  if (cfg.process_sigma < 0.0 || cfg.init_sigma < 0.0)
    throw std::invalid_argument("noise scales must be non-negative");
  if (cfg.obs_sigma <= 0.0) throw std::invalid_argument("obs_sigma must be positive");
  if (cfg.ess_threshold < 1.0 || cfg.ess_threshold > cfg.num_particles)
    throw std::invalid_argument("ess_threshold outside [1, N]");
}

ParticleSet init_particles(const Eigen::VectorXd& theta0, const PFConfig& cfg,
                           RandomStream& stream) {
  validate(cfg);
  ParticleSet ps;
  ps.particles.resize(theta0.size(), cfg.num_particles);
  for (int i = 0; i < cfg.num_particles; ++i) {
    for (Eigen::Index k = 0; k < theta0.size(); ++k)
      ps.particles(k, i) = theta0[k] + cfg.init_sigma * stream.normal();
  }
  ps.weights = Eigen::VectorXd::Constant(cfg.num_particles, 1.0 / cfg.num_particles);
  return ps;
}

void predict(ParticleSet& ps, const PFConfig& cfg, RandomStream& stream) {
  for (int i = 0; i < ps.count(); ++i)
    for (Eigen::Index k = 0; k < ps.dim(); ++k)
      ps.particles(k, i) += cfg.process_sigma * stream.normal();
}

void shift(ParticleSet& ps, const Eigen::VectorXd& delta) {
  ps.particles.colwise() += delta;
}

void update_weights(ParticleSet& ps, const Eigen::VectorXd& z, const ObservationFn& predict_obs,
                    const PFConfig& cfg) {
  if (z.size() == 0) throw std::invalid_argument("empty observation batch");
  const auto batch = static_cast<double>(z.size());
  const double denom = 2.0 * cfg.obs_sigma * cfg.obs_sigma * batch;

  Eigen::VectorXd logw(ps.count());
  for (int i = 0; i < ps.count(); ++i) {
    const Eigen::VectorXd q = predict_obs(ps.particles.col(i));
    if (q.size() != z.size()) throw std::invalid_argument("observation function size mismatch");
    logw[i] = std::log(ps.weights[i]) - (z - q).squaredNorm() / denom;
  }
  const double top = logw.maxCoeff();
  if (!std::isfinite(top))
    throw DegenerateWeights("all particle log-likelihoods are -inf");
  Eigen::VectorXd w = (logw.array() - top).exp();
  ps.weights = w / w.sum();
}

double ess(const ParticleSet& ps) { return 1.0 / ps.weights.squaredNorm(); }

void systematic_resample(ParticleSet& ps, RandomStream& stream) {
  const int n = ps.count();
  if (std::abs(ps.weights.sum() - 1.0) > 1e-9)
    throw UnnormalizedWeights("weights must sum to 1 before resampling");

  const double u0 = stream.uniform() / n;
  Eigen::MatrixXd offspring(ps.dim(), n);
  int src = 0;
  double cumulative = ps.weights[0];
  for (int k = 0; k < n; ++k) {
    const double point = u0 + static_cast<double>(k) / n;
    while (cumulative < point && src + 1 < n) {
      ++src;
      cumulative += ps.weights[src];
    }
    offspring.col(k) = ps.particles.col(src);
  }
  ps.particles = std::move(offspring);
  ps.weights = Eigen::VectorXd::Constant(n, 1.0 / n);
}

Eigen::VectorXd estimate(const ParticleSet& ps) {
  return (ps.particles * ps.weights) / ps.weights.sum();
}

int lowest_weight_index(const ParticleSet& ps) {
  int best = 0;
  for (int i = 1; i < ps.count(); ++i)
    if (ps.weights[i] < ps.weights[best]) best = i;
  return best;
}

}  // namespace agvrl::pf
