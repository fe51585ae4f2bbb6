#pragma once

#include <functional>
#include <stdexcept>

#include <Eigen/Core>

#include "agvrl/rng.hpp"

namespace agvrl::pf {

struct PFConfig {
  int num_particles = 50;
  double process_sigma = 1e-3;  // per-dimension random-walk noise std
  double obs_sigma = 1.0;       // observation noise std
  double ess_threshold = 25.0;  // resample when ESS drops below this
  double init_sigma = 1e-2;     // prior spread around theta_0
};

/// process_sigma and init_sigma may be zero (degenerate filter); obs_sigma
/// must stay positive.
void validate(const PFConfig& cfg);

/// Weight-vector hypotheses: column i of `particles` is theta^(i).
struct ParticleSet {
  Eigen::MatrixXd particles;  // d x N
  Eigen::VectorXd weights;    // N, normalized to sum 1

  int count() const { return static_cast<int>(particles.cols()); }
  Eigen::Index dim() const { return particles.rows(); }
};

struct DegenerateWeights : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UnnormalizedWeights : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Maps a particle (flat weight vector) to its predicted observation for
/// every item of the current batch.
using ObservationFn = std::function<Eigen::VectorXd(const Eigen::VectorXd& theta)>;

/// Particles drawn from N(theta0, init_sigma^2 I), uniform weights.
ParticleSet init_particles(const Eigen::VectorXd& theta0, const PFConfig& cfg,
                           RandomStream& stream);

/// Random-walk prediction: adds N(0, process_sigma^2 I) to every particle.
/// Weights are untouched.
void predict(ParticleSet& ps, const PFConfig& cfg, RandomStream& stream);

/// Translates every particle by delta. Used by the trainer fusion to carry
/// the SGD increment into the filter as the state-equation control input.
void shift(ParticleSet& ps, const Eigen::VectorXd& delta);

/// Multiplies weights by the Gaussian likelihood of the observed targets z
/// under each particle's predictions, averaged over the batch:
///   w_i *= exp(-|z - q_i|^2 / (2 obs_sigma^2 B)).
/// Computed in log space with max subtraction, then renormalized.
void update_weights(ParticleSet& ps, const Eigen::VectorXd& z, const ObservationFn& predict_obs,
                    const PFConfig& cfg);

/// Effective sample size 1 / sum w_i^2.
double ess(const ParticleSet& ps);

/// Systematic resampling from one uniform draw; offspring weights reset to
/// 1/N. Realized offspring counts are within floor/ceil of N * w_i.
void systematic_resample(ParticleSet& ps, RandomStream& stream);

/// Posterior mean sum_i w_i theta^(i) (normalized by the realized weight sum).
Eigen::VectorXd estimate(const ParticleSet& ps);

/// Index of the smallest weight, ties to the lowest index.
int lowest_weight_index(const ParticleSet& ps);

}  // namespace agvrl::pf
