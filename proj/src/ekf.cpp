#include "agvrl/ekf.hpp"

namespace agvrl::ekf {

EKFState make_state(const Eigen::VectorXd& theta0, const EKFConfig& cfg) {
  if (cfg.p0 <= 0.0 || cfg.r_obs <= 0.0) throw std::invalid_argument("p0 and r_obs must be positive");
  if (cfg.q_proc < 0.0) throw std::invalid_argument("q_proc must be non-negative");
  EKFState s;
  s.theta_hat = theta0;
  s.q_proc = cfg.q_proc;
  s.r_obs = cfg.r_obs;
  s.mode = theta0.size() > cfg.full_mode_limit ? CovarianceMode::Diagonal : CovarianceMode::Full;
  if (s.mode == CovarianceMode::Full)
    s.P = cfg.p0 * Eigen::MatrixXd::Identity(theta0.size(), theta0.size());
  else
    s.P_diag = Eigen::VectorXd::Constant(theta0.size(), cfg.p0);
  return s;
}

void ekf_predict(EKFState& state) {
  if (state.mode == CovarianceMode::Full)
    state.P.diagonal().array() += state.q_proc;
  else
    state.P_diag.array() += state.q_proc;
}

void ekf_update_scalar(EKFState& state, double z, double h_val, const Eigen::VectorXd& H) {
  if (H.size() != state.dim()) throw std::invalid_argument("Jacobian length mismatch");
  const double innovation = z - h_val;

  if (state.mode == CovarianceMode::Full) {
    const Eigen::VectorXd ph = state.P * H;        // P^- H'
    const double s = H.dot(ph) + state.r_obs;      // innovation variance
    if (s <= 0.0) throw NonPositiveInnovationVariance("innovation variance <= 0");
    const Eigen::VectorXd gain = ph / s;
    state.theta_hat += gain * innovation;
    state.P -= gain * ph.transpose();              // (I - K H) P^-
    state.P = ((state.P + state.P.transpose()) / 2.0).eval();
  } else {
    const Eigen::VectorXd ph = state.P_diag.cwiseProduct(H);
    const double s = H.dot(ph) + state.r_obs;
    if (s <= 0.0) throw NonPositiveInnovationVariance("innovation variance <= 0");
    const Eigen::VectorXd gain = ph / s;
    state.theta_hat += gain * innovation;
    // diag((I - K H) P) for diagonal P.
    state.P_diag.array() *= (1.0 - gain.array() * H.array());
  }
}

void ekf_batch_update(EKFState& state, const Eigen::VectorXd& z, const MeasurementModel& model) {
  if (z.size() == 0) throw std::invalid_argument("empty measurement batch");
  ekf_predict(state);
  for (Eigen::Index j = 0; j < z.size(); ++j) {
    auto [h_val, jac] = model(state.theta_hat, j);
    ekf_update_scalar(state, z[j], h_val, jac);
  }
}

std::vector<std::pair<Eigen::VectorXd, Eigen::MatrixXd>> kf_oracle(
    const std::vector<std::pair<double, Eigen::VectorXd>>& measurements, double q, double r,
    const Eigen::MatrixXd& P0, const Eigen::VectorXd& theta0) {
  const Eigen::Index d = theta0.size();
  std::vector<std::pair<Eigen::VectorXd, Eigen::MatrixXd>> trace;
  trace.reserve(measurements.size());
  Eigen::VectorXd theta = theta0;
  Eigen::MatrixXd p = P0;
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(d, d);
  for (const auto& [z, h] : measurements) {
    p += q * eye;
    const double s = h.dot(p * h) + r;
    const Eigen::VectorXd k = p * h / s;
    theta = theta + k * (z - h.dot(theta));
    p = (eye - k * h.transpose()) * p;
    trace.emplace_back(theta, p);
  }
  return trace;
}

}  // namespace agvrl::ekf
