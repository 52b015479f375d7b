#include "rsoc/backward_pass.hpp"

#include <cmath>
#include <string>

namespace rsoc {

namespace {

void require_finite_block(const Mat& m, const char* name, int k) {
  if (!m.allFinite())
    throw SolverError(std::string("backward pass produced non-finite block ") + name +
                      " at step " + std::to_string(k));
}

void require_finite_block(const Vec& v, const char* name, int k) {
  if (!v.allFinite())
    throw SolverError(std::string("backward pass produced non-finite block ") + name +
                      " at step " + std::to_string(k));
}

}  // namespace

double predicted_value(const ValueExpansion& v, const Vec& dx, const Vec& dxh) {
  return 0.5 * dx.dot(v.Sx * dx) + dx.dot(v.Sxh * dxh) + 0.5 * dxh.dot(v.Sh * dxh) +
         v.sx.dot(dx) + v.sh.dot(dxh) + v.s0;
}

// Control-dependent terms of the one-step lookahead. Noise enters twice: the
// expected quadratic value over the next-step covariance, and the sigma-scaled
// outer products of the value gradient against the process and filtered
// measurement noise channels (evaluated at the predicted next deviation, which
// is what makes these terms control-dependent).
ControlStageTerms control_stage_terms(const StageDynamics& dyn, const StageCost& cost,
                                      const Mat& gain, const ValueExpansion& next,
                                      const NoiseModel& noise, double sigma) {
  const Mat& A = dyn.A;
  const Mat& B = dyn.B;
  const Mat KF = gain * dyn.F;
  const Mat Acl = A - KF;

  const Mat W = dyn.C * noise.process_cov * dyn.C.transpose();           // process channel
  const Mat KD = gain * dyn.D;
  const Mat V = KD * noise.measurement_cov * KD.transpose();             // filtered channel

  const Mat& Sx = next.Sx;
  const Mat& Sh = next.Sh;
  const Mat& Sxh = next.Sxh;
  const Mat Shx = Sxh.transpose();

  const Mat SxW = (Sx + Sxh).transpose() * W;        // (Sx + Sxh)' W
  const Mat ShV = (Shx + Sh).transpose() * V;        // (Shx + Sh)' V

  ControlStageTerms terms;
  Mat H = cost.R + B.transpose() * (Sx + Sh + Sxh + Shx) * B +
          sigma * B.transpose() * SxW * (Sx + Sxh) * B +
          sigma * B.transpose() * ShV * (Shx + Sh) * B;
  terms.H = 0.5 * (H + H.transpose());
  terms.g = cost.ru + B.transpose() * (next.sx + next.sh) +
            sigma * B.transpose() * SxW * next.sx + sigma * B.transpose() * ShV * next.sh;
  terms.Gx = cost.P.transpose() + B.transpose() * (Sx + Shx) * A +
             B.transpose() * (Sh + Sxh) * KF +
             sigma * B.transpose() * SxW * (Sx * A + Sxh * KF) +
             sigma * B.transpose() * ShV * (Shx * A + Sh * KF);
  terms.Gh = B.transpose() * (Sh + Sxh) * Acl +
             sigma * B.transpose() * SxW * (Sxh * Acl) +
             sigma * B.transpose() * ShV * (Sh * Acl);
  return terms;
}

BackwardPassResult backward_recursion(const StagePlan& plan, const EstimatorPass& estimator,
                                      const NoiseModel& noise, double sigma, double lambda) {
  const int N = static_cast<int>(plan.dynamics.size());
  if (static_cast<int>(estimator.gains.size()) != N)
    throw ConfigError("estimator pass does not match the plan length");

  BackwardPassResult out;
  out.expansions.resize(N + 1);
  out.law.feedforward.resize(N);
  out.law.feedback.resize(N);

  ValueExpansion& terminal = out.expansions[N];
  const int n = static_cast<int>(plan.terminal.Q.rows());
  terminal.Sx = plan.terminal.Q;
  terminal.Sxh = Mat::Zero(n, n);
  terminal.Sh = Mat::Zero(n, n);
  terminal.sx = plan.terminal.qx;
  terminal.sh = Vec::Zero(n);
  terminal.s0 = plan.terminal.q0;

  // At sigma exactly zero the stationarity condition of the enlarged recursion
  // reduces to the certainty-equivalent Riccati pair below (the error blocks
  // cancel against the cross blocks). The full form computes the same gains
  // only up to a catastrophic cancellation between the large true-state and
  // error blocks, which on stiff problems injects filter-dependent noise into
  // nominally filter-independent gains. So for sigma 0 the gains come from the
  // reduced pair; the enlarged blocks are still propagated for the value
  // expansion.
  const bool risk_neutral = sigma == 0.0;
  Mat Sce;
  Vec sce;
  if (risk_neutral) {
    Sce = plan.terminal.Q;
    sce = plan.terminal.qx;
  }

  for (int k = N - 1; k >= 0; --k) {
    const StageDynamics& dyn = plan.dynamics[k];
    const StageCost& cost = plan.costs[k];
    const Mat& gain = estimator.gains[k];
    const ValueExpansion& next = out.expansions[k + 1];

    ControlStageTerms terms = control_stage_terms(dyn, cost, gain, next, noise, sigma);
    Mat Hgain = terms.H;
    Mat Ggain = terms.Gx + terms.Gh;
    Vec ggain = terms.g;
    if (risk_neutral) {
      Hgain = cost.R + dyn.B.transpose() * Sce * dyn.B;
      Hgain = 0.5 * (Hgain + Hgain.transpose()).eval();
      Ggain = cost.P.transpose() + dyn.B.transpose() * Sce * dyn.A;
      ggain = cost.ru + dyn.B.transpose() * sce;
    }
    const int m = static_cast<int>(Hgain.rows());
    const Mat Hreg = Hgain + lambda * Mat::Identity(m, m);
    Eigen::LLT<Mat> llt(Hreg);
    if (llt.info() != Eigen::Success || !Hreg.allFinite())
      throw RegularizationNeeded("control Hessian not positive definite at step " +
                                 std::to_string(k) + " (lambda " + std::to_string(lambda) + ")");

    const Vec l = -llt.solve(ggain);
    const Mat L = -llt.solve(Ggain);
    require_finite_block(l, "feedforward", k);
    require_finite_block(L, "feedback", k);

    if (risk_neutral) {
      Mat Snew = cost.Q + dyn.A.transpose() * Sce * dyn.A + Ggain.transpose() * L;
      Sce = 0.5 * (Snew + Snew.transpose());
      sce = cost.qx + dyn.A.transpose() * sce + Ggain.transpose() * l;
    }

    const Mat& A = dyn.A;
    const Mat KF = gain * dyn.F;
    const Mat Acl = A - KF;
    const Mat W = dyn.C * noise.process_cov * dyn.C.transpose();
    const Mat KD = gain * dyn.D;
    const Mat V = KD * noise.measurement_cov * KD.transpose();

    const Mat& Sx1 = next.Sx;
    const Mat& Sh1 = next.Sh;
    const Mat& Sxh1 = next.Sxh;
    const Mat Shx1 = Sxh1.transpose();

    // Gradient-propagation factors shared by several blocks: value slope along
    // the true-state channel and along the estimate channel.
    const Mat Px = Sx1 * A + Sxh1 * KF;   // d(next dx value slope)/d(dx)
    const Mat Ph = Shx1 * A + Sh1 * KF;   // estimate-channel counterpart
    const Mat PxhW = Sxh1 * Acl;
    const Mat PhV = Sh1 * Acl;

    ValueExpansion cur;
    Mat SxK = cost.Q + A.transpose() * Sx1 * A +
              (dyn.F.transpose() * gain.transpose() * Sh1 + 2.0 * A.transpose() * Sxh1) * KF +
              sigma * Px.transpose() * W * Px + sigma * Ph.transpose() * V * Ph;
    cur.Sx = 0.5 * (SxK + SxK.transpose());

    Mat ShK = Acl.transpose() * Sh1 * Acl + L.transpose() * Hreg * L +
              terms.Gh.transpose() * L + L.transpose() * terms.Gh +
              sigma * PxhW.transpose() * W * PxhW + sigma * PhV.transpose() * V * PhV;
    cur.Sh = 0.5 * (ShK + ShK.transpose());

    cur.Sxh = (A.transpose() * Sxh1 + dyn.F.transpose() * gain.transpose() * Sh1) * Acl +
              terms.Gx.transpose() * L + sigma * Px.transpose() * W * PxhW +
              sigma * Ph.transpose() * V * PhV;

    cur.sx = cost.qx + A.transpose() * next.sx +
             dyn.F.transpose() * gain.transpose() * next.sh + terms.Gx.transpose() * l +
             sigma * Px.transpose() * W * next.sx + sigma * Ph.transpose() * V * next.sh;

    cur.sh = Acl.transpose() * next.sh + L.transpose() * Hreg.transpose() * l +
             L.transpose() * terms.g + terms.Gh.transpose() * l +
             sigma * PxhW.transpose() * W * next.sx + sigma * PhV.transpose() * V * next.sh;

    cur.s0 = next.s0 + cost.q0 + 0.5 * l.dot(Hreg * l) + l.dot(terms.g) +
             0.5 * (Sx1 * W).trace() + 0.5 * (Sh1 * V).trace() +
             0.5 * sigma * next.sx.dot(W * next.sx) + 0.5 * sigma * next.sh.dot(V * next.sh);

    require_finite_block(cur.Sx, "Sx", k);
    require_finite_block(cur.Sh, "Sh", k);
    require_finite_block(cur.Sxh, "Sxh", k);
    require_finite_block(cur.sx, "sx", k);
    require_finite_block(cur.sh, "sh", k);
    if (!std::isfinite(cur.s0))
      throw SolverError("backward pass produced non-finite block s0 at step " +
                        std::to_string(k));

    out.expansions[k] = std::move(cur);
    out.law.feedforward[k] = l;
    out.law.feedback[k] = L;
  }
  return out;
}

}  // namespace rsoc
