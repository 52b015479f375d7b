#pragma once

#include "rsoc/types.hpp"

namespace rsoc {

// Structural and numerical sanity checks: dimensions, covariance symmetry and
// positive semidefiniteness, callback outputs at the first trajectory point.
// Returns a list of violations; empty means valid.
std::vector<std::string> validate_problem(const ContinuousProblem& problem,
                                          const NoiseModel& noise,
                                          const Trajectory& traj);

// Single RK4 step of the drift through dt.
Vec rk4_step(const ContinuousProblem& problem, const Vec& x, const Vec& u, double t, double dt);

// Deterministic rollout of a control sequence (noise suppressed), one RK4
// step per dt. Throws DivergenceError naming the offending step when a state
// goes non-finite.
Trajectory zero_noise_rollout(const ContinuousProblem& problem, const std::vector<Vec>& controls,
                              const Vec& x0, double dt);

// Left-endpoint quadrature of the running cost plus the terminal cost.
// Throws DivergenceError naming the offending step on non-finite values.
double evaluate_deterministic_cost(const ContinuousProblem& problem, const Trajectory& traj);

}  // namespace rsoc
