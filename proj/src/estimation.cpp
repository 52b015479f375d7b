#include "rsoc/estimation.hpp"

#include <cmath>
#include <string>

namespace rsoc {

namespace {

// Measurement-noise part of the innovation covariance, floored so the gain
// solve stays well posed when the configured measurement noise is near zero.
Mat floored_measurement_term(const StageDynamics& dyn, const NoiseModel& noise, bool* floored) {
  Mat ddt = dyn.D * noise.measurement_cov * dyn.D.transpose();
  ddt = 0.5 * (ddt + ddt.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> eig(ddt);
  if (floored) *floored = false;
  if (eig.eigenvalues().minCoeff() < 1e-12) {
    ddt += 1e-12 * Mat::Identity(ddt.rows(), ddt.cols());
    if (floored) *floored = true;
  }
  return ddt;
}

Mat propagate_error_cov(const StageDynamics& dyn, const NoiseModel& noise, const Mat& sigma,
                        const Mat& gain, const Mat& ddt) {
  const Mat closed = dyn.A - gain * dyn.F;
  Mat next = closed * sigma * closed.transpose() + gain * ddt * gain.transpose() +
             dyn.C * noise.process_cov * dyn.C.transpose();
  return 0.5 * (next + next.transpose());
}

}  // namespace

EstimatorPass ekf_forward(const StagePlan& plan, const NoiseModel& noise,
                          const Mat& initial_error_cov) {
  const int N = static_cast<int>(plan.dynamics.size());
  EstimatorPass pass;
  pass.gains.reserve(N);
  pass.error_covs.reserve(N + 1);

  Mat sigma = 0.5 * (initial_error_cov + initial_error_cov.transpose());
  pass.error_covs.push_back(sigma);

  int floored_count = 0;
  int first_floored = -1;
  for (int k = 0; k < N; ++k) {
    const StageDynamics& dyn = plan.dynamics[k];
    bool floored = false;
    const Mat ddt = floored_measurement_term(dyn, noise, &floored);
    if (floored) {
      ++floored_count;
      if (first_floored < 0) first_floored = k;
    }

    Mat innovation = dyn.F * sigma * dyn.F.transpose() + ddt;
    innovation = 0.5 * (innovation + innovation.transpose());
    if (!innovation.allFinite())
      throw SolverError("innovation covariance non-finite at step " + std::to_string(k));
    Eigen::SelfAdjointEigenSolver<Mat> eig(innovation);
    // Condition guard: with the absolute floor in place this only fires when
    // the innovation is singular relative to its own scale.
    if (eig.eigenvalues().minCoeff() < 1e-12 * innovation.trace())
      throw SolverError("innovation covariance singular at step " + std::to_string(k) +
                        "; raise the measurement noise floor");

    Eigen::LDLT<Mat> ldlt(innovation);
    if (ldlt.info() != Eigen::Success)
      throw SolverError("innovation covariance factorization failed at step " +
                        std::to_string(k) + "; raise the measurement noise floor");
    // K = A Sigma F' inv(innovation)
    const Mat rhs = dyn.F * sigma * dyn.A.transpose();
    const Mat gain = ldlt.solve(rhs).transpose();
    if (!gain.allFinite())
      throw SolverError("filter gain non-finite at step " + std::to_string(k));

    sigma = propagate_error_cov(dyn, noise, sigma, gain, ddt);
    pass.gains.push_back(gain);
    pass.error_covs.push_back(sigma);
  }
  if (floored_count > 0)
    pass.warnings.push_back("measurement noise floor applied at " +
                            std::to_string(floored_count) + " steps (first at step " +
                            std::to_string(first_floored) + ")");
  return pass;
}

double ekf_gain_optimality_check(const StagePlan& plan, const NoiseModel& noise,
                                 const EstimatorPass& pass, int k, const Mat& gain_perturbation) {
  if (k < 0 || k >= static_cast<int>(pass.gains.size()))
    throw ConfigError("gain optimality check index out of range");
  const StageDynamics& dyn = plan.dynamics[k];
  const Mat ddt = floored_measurement_term(dyn, noise, nullptr);
  const Mat& sigma = pass.error_covs[k];
  const Mat base = propagate_error_cov(dyn, noise, sigma, pass.gains[k], ddt);
  const Mat perturbed =
      propagate_error_cov(dyn, noise, sigma, pass.gains[k] + gain_perturbation, ddt);
  return perturbed.trace() - base.trace();
}

Vec online_filter_step(const StageDynamics& stage, const Mat& gain, const Vec& estimate_deviation,
                       const Vec& control_deviation, const Vec& measurement_deviation) {
  const Vec innovation =
      measurement_deviation - stage.F * estimate_deviation - stage.E * control_deviation;
  return stage.A * estimate_deviation + stage.B * control_deviation + gain * innovation;
}

}  // namespace rsoc
