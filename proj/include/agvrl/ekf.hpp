#pragma once

#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace agvrl::ekf {

enum class CovarianceMode { Full, Diagonal };

struct EKFConfig {
  double p0 = 1e-2;     // initial covariance P0 = p0 * I
  double q_proc = 1e-6; // process noise variance (times identity)
  double r_obs = 1.0;   // scalar measurement noise variance
  // Full covariance up to this parameter count, diagonal beyond it.
  Eigen::Index full_mode_limit = 2000;
};

struct NonPositiveInnovationVariance : std::logic_error {
  using std::logic_error::logic_error;
};

/// Weight estimate with error covariance. The random-walk state model has
/// F = I, so prediction only inflates the covariance.
struct EKFState {
  Eigen::VectorXd theta_hat;
  CovarianceMode mode = CovarianceMode::Full;
  Eigen::MatrixXd P;       // full mode
  Eigen::VectorXd P_diag;  // diagonal mode
  double q_proc = 1e-6;
  double r_obs = 1.0;

  Eigen::Index dim() const { return theta_hat.size(); }
};

EKFState make_state(const Eigen::VectorXd& theta0, const EKFConfig& cfg);

/// theta unchanged; P += q_proc * I.
void ekf_predict(EKFState& state);

/// One scalar measurement update with measurement value z, model prediction
/// h_val and measurement Jacobian H (length d). Full mode symmetrizes P.
void ekf_update_scalar(EKFState& state, double z, double h_val, const Eigen::VectorXd& H);

/// Evaluates the measurement model for batch item `index` at theta:
/// returns (h(theta), dh/dtheta).
using MeasurementModel =
    std::function<std::pair<double, Eigen::VectorXd>(const Eigen::VectorXd& theta,
                                                     Eigen::Index index)>;

/// One predict followed by sequential scalar updates over the measurement
/// batch, relinearizing at the current estimate before each update.
void ekf_batch_update(EKFState& state, const Eigen::VectorXd& z, const MeasurementModel& model);

/// Exact linear Kalman recursion for scalar measurements z_t = H_t' theta + v
/// (test oracle; independent of the EKF code path above).
std::vector<std::pair<Eigen::VectorXd, Eigen::MatrixXd>> kf_oracle(
    const std::vector<std::pair<double, Eigen::VectorXd>>& measurements, double q, double r,
    const Eigen::MatrixXd& P0, const Eigen::VectorXd& theta0);

}  // namespace agvrl::ekf
