#pragma once

#include "rsoc/types.hpp"

namespace rsoc {

// Discrete-time local model around one nominal point, in deviation
// coordinates:
//   dx_{k+1} = A dx_k + B du_k + C w_k,   w_k ~ N(0, Omega)
//   dy_k     = F dx_k + E du_k + D v_k,   v_k ~ N(0, Gamma)
// built from the continuous model as A = I + dt*dm/dx, B = dt*dm/du,
// C = sqrt(dt)*M, F = dt*dn/dx, E = dt*dn/du, D = sqrt(dt)*N.
struct StageDynamics {
  Mat A, B, C, F, E, D;
};

// Second-order cost model around one nominal point, already scaled by dt for
// running stages:
//   l(dx,du) = q0 + qx'dx + ru'du + 1/2 dx'Q dx + dx'P du + 1/2 du'R du
// The terminal stage carries only q0, qx, Q (control blocks sized zero).
struct StageCost {
  double q0 = 0.0;
  Vec qx, ru;
  Mat Q, P, R;
};

struct FdOptions {
  double fd_epsilon = 1e-5;          // step scaled per-coordinate by max(1,|z_i|)
  bool project_state_hessian = false;  // clamp Q eigenvalues at zero
};

StageDynamics linearize_stage(const ContinuousProblem& problem, const Vec& x, const Vec& u,
                              double t, double dt, const FdOptions& opts = {});

StageCost quadratize_stage(const ContinuousProblem& problem, const Vec& x, const Vec& u, double t,
                           double dt, const FdOptions& opts = {});

StageCost quadratize_terminal(const ContinuousProblem& problem, const Vec& x,
                              const FdOptions& opts = {});

// Local models for every stage of a nominal trajectory.
struct StagePlan {
  Trajectory nominal;
  std::vector<StageDynamics> dynamics;  // N entries
  std::vector<StageCost> costs;         // N entries
  StageCost terminal;
  std::vector<std::string> warnings;
};

StagePlan build_plan(const ContinuousProblem& problem, const Trajectory& nominal,
                     const SolverConfig& config);

}  // namespace rsoc
