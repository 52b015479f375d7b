#include "rsoc/evaluation.hpp"

#include "rsoc/rng.hpp"

#include <cmath>
#include <string>

namespace rsoc {

namespace {

// Symmetric square root of a PSD covariance (tolerates rank deficiency).
Mat covariance_sqrt(const Mat& cov) {
  Eigen::SelfAdjointEigenSolver<Mat> eig(0.5 * (cov + cov.transpose()));
  Vec vals = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * vals.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace

RolloutRecord stochastic_rollout(const ContinuousProblem& model, const NoiseModel& noise,
                                 const StagePlan& plan, const EstimatorPass& estimator,
                                 const ControlLaw& law, const Vec& x0, std::uint64_t seed,
                                 const RolloutOptions& opts) {
  const ContinuousProblem& world = opts.world ? *opts.world : model;
  const Trajectory& nominal = plan.nominal;
  const int N = nominal.steps();
  const double dt = nominal.dt;
  const double sdt = std::sqrt(dt);
  if (static_cast<int>(law.feedforward.size()) != N ||
      static_cast<int>(estimator.gains.size()) != N)
    throw ConfigError("law/estimator length does not match the plan");

  const Mat sqrt_process = covariance_sqrt(noise.process_cov);
  const Mat sqrt_meas = covariance_sqrt(noise.measurement_cov);

  RolloutRecord rec;
  rec.realized.dt = dt;
  rec.realized.states.reserve(N + 1);
  rec.realized.controls.reserve(N);
  rec.estimates.reserve(N + 1);

  Vec x = x0;
  Vec dxh = opts.initial_estimate_deviation.size() > 0 ? opts.initial_estimate_deviation
                                                       : Vec::Zero(model.state_dim);
  if (dxh.size() != model.state_dim)
    throw ConfigError("initial estimate deviation has the wrong dimension");
  Vec xhat = nominal.states.front() + dxh;

  // Online covariance state (used only in online estimation mode).
  Mat sigma = estimator.error_covs.front();
  FdOptions fd_opts;  // defaults match the solver's

  const bool has_probe = static_cast<bool>(world.probe);
  if (has_probe) rec.probes.resize(N, static_cast<int>(world.probe_labels.size()));

  rec.realized.states.push_back(x);
  rec.estimates.push_back(xhat);
  double cost = 0.0;

  for (int k = 0; k < N; ++k) {
    const double t = nominal.time(k);
    const Vec u = nominal.controls[k] + opts.feedforward_scale * law.feedforward[k] +
                  law.feedback[k] * dxh;
    const Vec du = u - nominal.controls[k];

    const double l = world.running_cost(x, u, t);
    if (!std::isfinite(l))
      throw DivergenceError("running cost non-finite at step " + std::to_string(k), k);
    cost += l * dt;
    if (has_probe) {
      const Vec probe = world.probe(x, u, t);
      if (probe.size() != rec.probes.cols())
        throw ConfigError("probe output does not match its labels");
      rec.probes.row(k) = probe.transpose();
    }

    // True dynamics: Euler-Maruyama with a dt-scaled Brownian increment.
    const Vec wnoise = sqrt_process *
                       RandomStream::at(seed, static_cast<std::uint64_t>(k), 0)
                           .normal_vector(model.process_noise_dim);
    Vec xnext = x + world.drift(x, u, t) * dt + world.diffusion(x, u, t) * (sdt * wnoise);

    // Measurement increment deviation generated by the world at the true
    // state; the signal part uses the plan's sensitivities (exact for the
    // linear measurement maps used by the bundled models).
    const Vec vnoise = sqrt_meas *
                       RandomStream::at(seed, static_cast<std::uint64_t>(k), 1)
                           .normal_vector(model.measurement_noise_dim);
    const Vec dx = x - nominal.states[k];
    const Vec dy = plan.dynamics[k].F * dx + plan.dynamics[k].E * du +
                   sdt * (world.measurement_diffusion(x, u, t) * vnoise);

    if (opts.online_estimation) {
      // Re-linearize the believed model at the current estimate and run the
      // covariance/gain recursion live.
      StageDynamics dyn = linearize_stage(model, xhat, u, t, dt, fd_opts);
      Mat ddt = dyn.D * noise.measurement_cov * dyn.D.transpose();
      ddt = 0.5 * (ddt + ddt.transpose());
      {
        Eigen::SelfAdjointEigenSolver<Mat> eig(ddt);
        if (eig.eigenvalues().minCoeff() < 1e-12)
          ddt += 1e-12 * Mat::Identity(ddt.rows(), ddt.cols());
      }
      Mat innovation_cov = dyn.F * sigma * dyn.F.transpose() + ddt;
      Eigen::LDLT<Mat> ldlt(0.5 * (innovation_cov + innovation_cov.transpose()));
      const Mat gain = ldlt.solve(dyn.F * sigma * dyn.A.transpose()).transpose();
      const Vec predicted_dy = (model.measurement(xhat, u, t) -
                                model.measurement(nominal.states[k], nominal.controls[k], t)) *
                               dt;
      xhat = xhat + model.drift(xhat, u, t) * dt + gain * (dy - predicted_dy);
      const Mat closed = dyn.A - gain * dyn.F;
      sigma = closed * sigma * closed.transpose() + gain * ddt * gain.transpose() +
              dyn.C * noise.process_cov * dyn.C.transpose();
      sigma = 0.5 * (sigma + sigma.transpose());
      dxh = xhat - nominal.states[k + 1];
    } else {
      dxh = online_filter_step(plan.dynamics[k], estimator.gains[k], dxh, du, dy);
      xhat = nominal.states[k + 1] + dxh;
    }

    x = std::move(xnext);
    if (!x.allFinite() || x.norm() > opts.divergence_threshold)
      throw DivergenceError("rollout diverged at step " + std::to_string(k + 1), k + 1);
    if (!xhat.allFinite() || xhat.norm() > opts.divergence_threshold)
      throw DivergenceError("state estimate diverged at step " + std::to_string(k + 1), k + 1);

    rec.realized.controls.push_back(u);
    rec.realized.states.push_back(x);
    rec.estimates.push_back(xhat);
  }
  const double lf = world.terminal_cost(x);
  if (!std::isfinite(lf)) throw DivergenceError("terminal cost non-finite", N);
  rec.cost = cost + lf;
  return rec;
}

RolloutRecord stochastic_rollout(const ContinuousProblem& model, const NoiseModel& noise,
                                 const ControlLaw& law, const Trajectory& nominal,
                                 const EstimatorPass& estimator, const Vec& x0,
                                 std::uint64_t seed, const SolverConfig& config,
                                 const RolloutOptions& opts) {
  const StagePlan plan = build_plan(model, nominal, config);
  return stochastic_rollout(model, noise, plan, estimator, law, x0, seed, opts);
}

RolloutBatch run_rollout_batch(const ContinuousProblem& model, const NoiseModel& noise,
                               const StagePlan& plan, const EstimatorPass& estimator,
                               const ControlLaw& law, const Vec& x0, int count,
                               std::uint64_t base_seed, bool keep_records,
                               const RolloutOptions& opts) {
  if (count <= 0) throw ConfigError("rollout batch needs a positive sample count");
  RolloutBatch batch;
  batch.costs.reserve(count);
  batch.seeds.reserve(count);
  std::string last_divergence;
  for (int i = 0; i < count; ++i) {
    const std::uint64_t seed = mix_seed(base_seed, static_cast<std::uint64_t>(i));
    try {
      RolloutRecord rec = stochastic_rollout(model, noise, plan, estimator, law, x0, seed, opts);
      batch.costs.push_back(rec.cost);
      batch.seeds.push_back(seed);
      if (keep_records) batch.records.push_back(std::move(rec));
    } catch (const DivergenceError& e) {
      ++batch.diverged;
      last_divergence = e.what();
    }
  }
  if (batch.costs.empty())
    throw DivergenceError("all rollouts diverged: " + last_divergence, -1);
  return batch;
}

}  // namespace rsoc
