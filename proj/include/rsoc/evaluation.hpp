#pragma once

#include "rsoc/backward_pass.hpp"
#include "rsoc/estimation.hpp"
#include "rsoc/linearize.hpp"
#include "rsoc/solver.hpp"
#include "rsoc/types.hpp"

#include <cstdint>
#include <optional>

namespace rsoc {

struct RolloutOptions {
  // Online mode re-linearizes the believed model at the current estimate each
  // step and runs the covariance/gain recursion live; when false the
  // precomputed nominal-plan gain sequence is replayed (exactly the linear
  // filter the backward pass assumed).
  bool online_estimation = true;
  double feedforward_scale = 1.0;
  double divergence_threshold = 1e8;
  Vec initial_estimate_deviation;  // empty -> zero
  // Model generating the true dynamics/measurements and scoring the realized
  // cost; null -> the believed model itself.
  const ContinuousProblem* world = nullptr;
};

struct RolloutRecord {
  Trajectory realized;         // true states and applied controls
  std::vector<Vec> estimates;  // absolute state estimates, N+1
  double cost = 0.0;           // realized cost under the world model
  Mat probes;                  // steps x probe-size, empty without a probe
};

// Euler-Maruyama simulation of the closed loop u = u_n + a*l + L dxh with the
// filter in the loop. Process/measurement draws come from streams addressed
// by (seed, step, channel) so runs are reproducible. Throws DivergenceError
// when the state norm passes the divergence threshold.
RolloutRecord stochastic_rollout(const ContinuousProblem& model, const NoiseModel& noise,
                                 const StagePlan& plan, const EstimatorPass& estimator,
                                 const ControlLaw& law, const Vec& x0, std::uint64_t seed,
                                 const RolloutOptions& opts = {});

// Convenience overload building the stage plan internally.
RolloutRecord stochastic_rollout(const ContinuousProblem& model, const NoiseModel& noise,
                                 const ControlLaw& law, const Trajectory& nominal,
                                 const EstimatorPass& estimator, const Vec& x0,
                                 std::uint64_t seed, const SolverConfig& config,
                                 const RolloutOptions& opts = {});

struct RolloutBatch {
  std::vector<double> costs;
  std::vector<std::uint64_t> seeds;
  std::vector<RolloutRecord> records;  // kept only when requested
  int diverged = 0;
};

// Runs `count` rollouts with per-rollout seeds derived from base_seed.
// Divergent rollouts are counted and skipped unless none survive, in which
// case the divergence error propagates.
RolloutBatch run_rollout_batch(const ContinuousProblem& model, const NoiseModel& noise,
                               const StagePlan& plan, const EstimatorPass& estimator,
                               const ControlLaw& law, const Vec& x0, int count,
                               std::uint64_t base_seed, bool keep_records = false,
                               const RolloutOptions& opts = {});

struct RiskEstimate {
  double sigma = 0.0;
  double mc_risk = 0.0;   // 1/sigma * log mean exp(sigma J); mean J at sigma=0
  double mean = 0.0;
  double variance = 0.0;  // unbiased
  double skewness = 0.0;  // third central moment
  double std_error = 0.0; // bootstrap standard error of mc_risk
  int sample_count = 0;
};

// Log-sum-exp based Monte Carlo estimate of the exponential risk functional
// with a seeded bootstrap for the standard error.
RiskEstimate estimate_risk(const std::vector<double>& costs, double sigma,
                           int bootstrap_resamples = 200,
                           std::uint64_t bootstrap_seed = 0x5eedb007ull);

}  // namespace rsoc
