#pragma once

#include "rsoc/estimation.hpp"
#include "rsoc/linearize.hpp"
#include "rsoc/types.hpp"

namespace rsoc {

// Quadratic value model over the joint (true-state, estimate) deviation:
//   V(dx, dxh) = 1/2 [dx;dxh]' [[Sx, Sxh],[Sxh', Sh]] [dx;dxh]
//                + sx'dx + sh'dxh + s0
struct ValueExpansion {
  Mat Sx, Sxh, Sh;
  Vec sx, sh;
  double s0 = 0.0;
};

double predicted_value(const ValueExpansion& v, const Vec& dx, const Vec& dxh);

// Control-dependent part of the one-step value model:
//   1/2 du'H du + du'(g + Gx dx + Gh dxh)
struct ControlStageTerms {
  Mat H, Gx, Gh;
  Vec g;
};

ControlStageTerms control_stage_terms(const StageDynamics& dyn, const StageCost& cost,
                                      const Mat& gain, const ValueExpansion& next,
                                      const NoiseModel& noise, double sigma);

// Affine policy on the estimate deviation: du_k = l_k + L_k dxh_k.
struct ControlLaw {
  std::vector<Vec> feedforward;  // l_k
  std::vector<Mat> feedback;     // L_k, m x n
};

struct BackwardPassResult {
  ControlLaw law;
  std::vector<ValueExpansion> expansions;  // N+1 entries, index 0 = initial time
};

// Risk-sensitive backward sweep over the joint control/estimation system.
// H + lambda*I is used wherever the control Hessian appears; throws
// RegularizationNeeded when it is not positive definite at this lambda.
BackwardPassResult backward_recursion(const StagePlan& plan, const EstimatorPass& estimator,
                                      const NoiseModel& noise, double sigma, double lambda);

}  // namespace rsoc
