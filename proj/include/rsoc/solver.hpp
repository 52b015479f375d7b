#pragma once

#include "rsoc/backward_pass.hpp"
#include "rsoc/estimation.hpp"
#include "rsoc/linearize.hpp"
#include "rsoc/problem.hpp"
#include "rsoc/types.hpp"

namespace rsoc {

enum class Termination {
  converged,
  max_iterations,
  line_search_failed,
  regularization_ceiling,
};

const char* to_string(Termination t);

struct SolveResult {
  Trajectory nominal;
  ControlLaw law;                          // paired with `nominal`
  std::vector<ValueExpansion> expansions;  // around `nominal`
  EstimatorPass estimator;                 // around `nominal`
  std::vector<double> cost_history;        // deterministic cost per accepted step
  int iterations = 0;
  Termination termination = Termination::max_iterations;
  double regularization_final = 0.0;
};

// Iterative local solver: rollout, local models, filter pass, backward pass,
// backtracking line search on the feedforward term. The returned law and
// expansions are recomputed around the final nominal trajectory.
SolveResult solve(const ContinuousProblem& problem, const NoiseModel& noise, const Vec& x0,
                  const std::vector<Vec>& initial_controls, const SolverConfig& config);

}  // namespace rsoc
