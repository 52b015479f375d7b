#include "rsoc/solver.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace rsoc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Deterministic closed-loop re-integration of the policy around a nominal
// trajectory with the feedforward scaled by alpha. Returns +inf cost when the
// rollout or the cost goes non-finite (the candidate is then skipped).
std::pair<Trajectory, double> policy_rollout(const ContinuousProblem& problem,
                                             const Trajectory& nominal, const ControlLaw& law,
                                             double alpha) {
  Trajectory traj;
  traj.dt = nominal.dt;
  const int N = nominal.steps();
  traj.states.reserve(N + 1);
  traj.controls.reserve(N);
  traj.states.push_back(nominal.states.front());
  double cost = 0.0;
  for (int k = 0; k < N; ++k) {
    const Vec& x = traj.states.back();
    const Vec u = nominal.controls[k] + alpha * law.feedforward[k] +
                  law.feedback[k] * (x - nominal.states[k]);
    if (!u.allFinite()) return {Trajectory{}, kInf};
    const double l = problem.running_cost(x, u, nominal.time(k));
    if (!std::isfinite(l)) return {Trajectory{}, kInf};
    cost += l * traj.dt;
    Vec next = rk4_step(problem, x, u, nominal.time(k), traj.dt);
    if (!next.allFinite()) return {Trajectory{}, kInf};
    traj.controls.push_back(u);
    traj.states.push_back(std::move(next));
  }
  const double lf = problem.terminal_cost(traj.states.back());
  if (!std::isfinite(lf)) return {Trajectory{}, kInf};
  return {std::move(traj), cost + lf};
}

Mat resolve_initial_error_cov(const SolverConfig& config, int n) {
  if (config.initial_error_cov.size() == 0) return 1e-2 * Mat::Identity(n, n);
  if (config.initial_error_cov.rows() != n)
    throw ConfigError("initial_error_cov dimension does not match the state dimension");
  return config.initial_error_cov;
}

}  // namespace

const char* to_string(Termination t) {
  switch (t) {
    case Termination::converged: return "converged";
    case Termination::max_iterations: return "max_iterations";
    case Termination::line_search_failed: return "line_search_failed";
    case Termination::regularization_ceiling: return "regularization_ceiling";
  }
  return "unknown";
}

namespace {

SolveResult solve_single(const ContinuousProblem& problem, const NoiseModel& noise, const Vec& x0,
                         const std::vector<Vec>& initial_controls, const SolverConfig& config_in) {
  SolverConfig config = config_in;
  if (config.line_search_alphas.empty()) config.line_search_alphas = default_alphas();
  check_solver_config(config);
  if (initial_controls.empty()) throw ConfigError("initial control sequence is empty");
  const int N = static_cast<int>(initial_controls.size());
  const double dt = problem.horizon / N;

  Trajectory traj = zero_noise_rollout(problem, initial_controls, x0, dt);
  {
    auto violations = validate_problem(problem, noise, traj);
    if (!violations.empty()) {
      std::string msg = "invalid problem:";
      for (const auto& v : violations) msg += "\n  - " + v;
      throw ConfigError(msg);
    }
  }
  const Mat sigma0 = resolve_initial_error_cov(config, problem.state_dim);

  double cost = evaluate_deterministic_cost(problem, traj);
  SolveResult result;
  result.cost_history.push_back(cost);

  double lambda = config.regularization_init;
  int ceiling_strikes = 0;
  bool last_failure_was_pd = false;
  Termination term = Termination::max_iterations;
  int iterations = 0;
  bool done = false;

  while (iterations < config.max_iterations && !done) {
    ++iterations;
    const StagePlan plan = build_plan(problem, traj, config);
    const EstimatorPass estimator = ekf_forward(plan, noise, sigma0);

    bool accepted = false;
    while (!accepted) {
      bool backward_ok = true;
      BackwardPassResult bp;
      try {
        bp = backward_recursion(plan, estimator, noise, config.sigma, lambda);
      } catch (const RegularizationNeeded&) {
        backward_ok = false;
      }

      double best_finite = kInf;
      if (backward_ok) {
        for (double alpha : config.line_search_alphas) {
          auto [candidate, candidate_cost] = policy_rollout(problem, traj, bp.law, alpha);
          if (!std::isfinite(candidate_cost)) continue;
          best_finite = std::min(best_finite, candidate_cost);
          if (candidate_cost < cost) {
            traj = std::move(candidate);
            const double prev = cost;
            cost = candidate_cost;
            result.cost_history.push_back(cost);
            lambda = std::max(lambda / config.regularization_factor, config.regularization_min);
            ceiling_strikes = 0;
            accepted = true;
            if (std::abs(prev - cost) <= config.cost_tolerance * std::max(1.0, std::abs(prev))) {
              term = Termination::converged;
              done = true;
            }
            break;
          }
        }
      }
      if (accepted) break;

      // No step improved. If the best candidate is within tolerance of the
      // current cost there is nothing left to gain: converged.
      if (backward_ok && std::isfinite(best_finite) &&
          std::abs(best_finite - cost) <= config.cost_tolerance * std::max(1.0, std::abs(cost))) {
        term = Termination::converged;
        done = true;
        break;
      }

      last_failure_was_pd = !backward_ok;
      if (lambda >= config.regularization_max) {
        if (++ceiling_strikes >= 2) {
          term = last_failure_was_pd ? Termination::regularization_ceiling
                                     : Termination::line_search_failed;
          done = true;
          break;
        }
      } else {
        lambda = std::min(lambda * config.regularization_factor, config.regularization_max);
      }
    }
  }
  if (!done && iterations >= config.max_iterations) term = Termination::max_iterations;

  // Recompute the local model, filter and law around the final nominal so the
  // returned pieces are mutually consistent.
  const StagePlan plan = build_plan(problem, traj, config);
  EstimatorPass estimator = ekf_forward(plan, noise, sigma0);
  BackwardPassResult bp;
  double final_lambda = std::max(lambda, config.regularization_min);
  for (;;) {
    try {
      bp = backward_recursion(plan, estimator, noise, config.sigma, final_lambda);
      break;
    } catch (const RegularizationNeeded& e) {
      if (final_lambda >= config.regularization_max)
        throw SolverError(std::string("backward pass failed at the regularization ceiling: ") +
                          e.what());
      final_lambda = std::min(final_lambda * config.regularization_factor,
                              config.regularization_max);
    }
  }

  result.nominal = std::move(traj);
  result.law = std::move(bp.law);
  result.expansions = std::move(bp.expansions);
  result.estimator = std::move(estimator);
  result.iterations = iterations;
  result.termination = term;
  result.regularization_final = final_lambda;
  return result;
}

}  // namespace

SolveResult solve(const ContinuousProblem& problem, const NoiseModel& noise, const Vec& x0,
                  const std::vector<Vec>& initial_controls, const SolverConfig& config) {
  std::vector<Vec> controls = initial_controls;
  for (double stage_sigma : config.sigma_stages) {
    SolverConfig stage = config;
    stage.sigma = stage_sigma;
    stage.sigma_stages.clear();
    SolveResult staged = solve_single(problem, noise, x0, controls, stage);
    controls = staged.nominal.controls;
  }
  return solve_single(problem, noise, x0, controls, config);
}

}  // namespace rsoc
