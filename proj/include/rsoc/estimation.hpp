#pragma once

#include "rsoc/linearize.hpp"
#include "rsoc/types.hpp"

namespace rsoc {

// Filter gains and error covariances along a nominal plan. gains has one
// entry per stage; error_covs additionally holds the covariance after the
// final stage (N+1 entries).
struct EstimatorPass {
  std::vector<Mat> gains;       // K_k, n x p
  std::vector<Mat> error_covs;  // Sigma_k, n x n
  std::vector<std::string> warnings;
};

// Innovation covariance gets a 1e-12 diagonal floor on the measurement-noise
// part when it is near singular (recorded as a warning, not an error).
EstimatorPass ekf_forward(const StagePlan& plan, const NoiseModel& noise,
                          const Mat& initial_error_cov);

// Difference in trace of the one-step-ahead error covariance when the gain at
// step k is perturbed: trace(Sigma_{k+1}(K_k + dK)) - trace(Sigma_{k+1}(K_k)).
// Nonnegative for all dK iff K_k minimizes the predicted error covariance.
double ekf_gain_optimality_check(const StagePlan& plan, const NoiseModel& noise,
                                 const EstimatorPass& pass, int k, const Mat& gain_perturbation);

// One filter update in deviation coordinates, one-step-predictor form:
//   dxh_{k+1} = A dxh + B du + K (dy - F dxh - E du)
Vec online_filter_step(const StageDynamics& stage, const Mat& gain, const Vec& estimate_deviation,
                       const Vec& control_deviation, const Vec& measurement_deviation);

}  // namespace rsoc
