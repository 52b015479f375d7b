#include "rsoc/experiments.hpp"

#include "rsoc/evaluation.hpp"
#include "rsoc/io.hpp"
#include "rsoc/rng.hpp"
#include "rsoc/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

namespace rsoc {

namespace {

Mat resolve_error_cov(const SolverConfig& config, int n) {
  if (config.initial_error_cov.size() == 0) return 1e-2 * Mat::Identity(n, n);
  return config.initial_error_cov;
}

std::string short_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

std::vector<double> doubles_of(const Json& exp, const std::string& key,
                               std::vector<double> fallback) {
  if (!exp.contains(key)) return fallback;
  const Json& j = exp.at(key);
  if (!j.is_array()) throw ConfigError("config: experiment." + key + " must be an array");
  std::vector<double> out;
  for (const auto& v : j) {
    if (!v.is_number()) throw ConfigError("config: experiment." + key + " must hold numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

Mat nominal_probes(const ContinuousProblem& problem, const Trajectory& traj) {
  if (!problem.probe) return Mat();
  const int steps = traj.steps();
  Mat out;
  for (int k = 0; k < steps; ++k) {
    Vec row = problem.probe(traj.states[k], traj.controls[k], traj.time(k));
    if (out.size() == 0) out.resize(steps, row.size());
    out.row(k) = row.transpose();
  }
  return out;
}

// Frobenius norm of the feedback gain per step.
std::vector<double> gain_trace(const ControlLaw& law) {
  std::vector<double> out;
  out.reserve(law.feedback.size());
  for (const auto& L : law.feedback) out.push_back(L.norm());
  return out;
}

std::vector<double> estimation_gain_trace(const EstimatorPass& est) {
  std::vector<double> out;
  out.reserve(est.gains.size());
  for (const auto& K : est.gains) out.push_back(K.norm());
  return out;
}

double peak_in_window(const std::vector<double>& trace, double dt, double t0, double t1) {
  double peak = 0.0;
  for (size_t k = 0; k < trace.size(); ++k) {
    const double t = static_cast<double>(k) * dt;
    if (t >= t0 && t <= t1) peak = std::max(peak, trace[k]);
  }
  return peak;
}

double median_of(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Json trace_json(const std::vector<double>& v) {
  Json out = Json::array();
  for (double x : v) out.push_back(x);
  return out;
}

struct SolvedCase {
  Setup setup;
  SolveResult result;
  Json summary;
};

// Solve one configured case and persist the run directory; non-convergence is
// recorded, hard solver errors are rethrown by the caller's choice.
SolvedCase solve_case(const Json& config, const std::string& out_dir) {
  SolvedCase c{load_setup(config), {}, {}};
  auto u0 = initial_controls(c.setup);
  c.result = solve(c.setup.problem, c.setup.noise, c.setup.x0, u0, c.setup.solver);

  Json extra;
  extra["model"] = c.setup.model;
  extra["sigma"] = c.setup.solver.sigma;
  if (!c.result.estimator.warnings.empty()) {
    Json warn = Json::array();
    for (const auto& w : c.result.estimator.warnings) warn.push_back(w);
    extra["warnings"] = warn;
  }
  save_solution(out_dir, c.result, c.setup.resolved, extra);
  if (c.setup.problem.probe) {
    Mat probes = nominal_probes(c.setup.problem, c.result.nominal);
    write_probe_csv(out_dir + "/forces.csv", probes, c.setup.problem.probe_labels,
                    c.result.nominal.dt);
  }
  c.summary = parse_json_text(read_text_file(out_dir + "/summary.json"));
  return c;
}

}  // namespace

Json solve_to_dir(const Json& config, const std::string& out_dir) {
  return solve_case(config, out_dir).summary;
}

Json rollout_to_dir(const Json& config, const std::string& law_dir, int samples,
                    std::uint64_t seed, const std::string& out_dir) {
  if (samples < 1) throw ConfigError("rollout: samples must be positive");
  Setup setup = load_setup(config);
  StoredSolution stored = load_solution(law_dir);

  const int n = setup.problem.state_dim;
  if (stored.nominal.states.front().size() != n)
    throw ConfigError("rollout: stored law state dimension does not match the config");
  if (std::abs(stored.dt - setup.dt) > 1e-9 * std::max(1.0, setup.dt) ||
      stored.nominal.steps() != setup.steps)
    throw ConfigError("rollout: stored law time grid does not match the config");

  StagePlan plan = build_plan(setup.problem, stored.nominal, setup.solver);
  EstimatorPass estimator = ekf_forward(plan, setup.noise, resolve_error_cov(setup.solver, n));

  RolloutOptions opts;
  if (config.contains("evaluation")) {
    const Json& ev = config.at("evaluation");
    opts.online_estimation = ev.value("online_estimation", true);
    opts.feedforward_scale = ev.value("feedforward_scale", 1.0);
    opts.divergence_threshold = ev.value("divergence_threshold", 1e8);
  }

  RolloutBatch batch = run_rollout_batch(setup.problem, setup.noise, plan, estimator, stored.law,
                                         setup.x0, samples, seed, false, opts);
  RiskEstimate risk = estimate_risk(batch.costs, setup.solver.sigma);

  ensure_dir(out_dir);
  write_text_file(out_dir + "/config.json", setup.resolved.dump(2) + "\n");

  std::string costs_csv = "sample,seed,cost\n";
  for (size_t i = 0; i < batch.costs.size(); ++i)
    costs_csv += std::to_string(i) + "," + std::to_string(batch.seeds[i]) + "," +
                 format_double(batch.costs[i]) + "\n";
  write_text_file(out_dir + "/costs.csv", costs_csv);

  // A few representative realizations, re-run under their batch seeds.
  const int kept = std::min(samples, 3);
  for (int j = 0; j < kept; ++j) {
    try {
      RolloutRecord rec = stochastic_rollout(setup.problem, setup.noise, plan, estimator,
                                             stored.law, setup.x0, mix_seed(seed, j), opts);
      const std::string tag = out_dir + "/rollout_" + std::to_string(j);
      write_trajectory_csv(tag + ".csv", rec.realized);
      if (rec.probes.size() > 0)
        write_probe_csv(tag + "_forces.csv", rec.probes, setup.problem.probe_labels, setup.dt);
    } catch (const DivergenceError&) {
      // already counted by the batch
    }
  }

  Json summary;
  summary["samples"] = samples;
  summary["diverged"] = batch.diverged;
  summary["sigma"] = risk.sigma;
  summary["mc_risk"] = risk.mc_risk;
  summary["mean_cost"] = risk.mean;
  summary["cost_variance"] = risk.variance;
  summary["cost_skewness"] = risk.skewness;
  summary["mc_risk_std_error"] = risk.std_error;
  summary["online_estimation"] = opts.online_estimation;
  write_text_file(out_dir + "/summary.json", summary.dump(2) + "\n");
  return summary;
}

Json run_experiment_viapoint(const Json& config, const std::string& out_dir) {
  Setup probe_setup = load_setup(config);
  if (probe_setup.model != "viapoint")
    throw ConfigError("experiment viapoint requires problem.model \"viapoint\"");

  const Json exp = config.value("experiment", Json::object());
  const std::vector<double> process_scales =
      doubles_of(exp, "process_scales", {2e-3, 2e-2, 2e-1});
  const std::vector<double> measurement_scales =
      doubles_of(exp, "measurement_scales", {1e-4, 1e-3, 1e-2});
  const double process_floor = exp.value("process_floor", 1e-8);
  const double measurement_floor = exp.value("measurement_floor", 1e-8);
  const int samples = exp.value("samples", 3);
  const std::uint64_t seed = exp.value("seed", std::uint64_t{1234});

  ensure_dir(out_dir);

  auto run_sweep = [&](const std::string& label, const std::vector<double>& scales,
                       bool vary_process) {
    Json entries = Json::array();
    for (size_t i = 0; i < scales.size(); ++i) {
      Json run_cfg = config;
      run_cfg["noise"]["process"] = vary_process ? scales[i] : process_floor;
      run_cfg["noise"]["measurement"] = vary_process ? measurement_floor : scales[i];
      const std::string dir = out_dir + "/" + label + "_" + short_number(scales[i]);
      Json entry;
      entry["scale"] = scales[i];
      entry["dir"] = label + "_" + short_number(scales[i]);
      try {
        SolvedCase c = solve_case(run_cfg, dir);
        const std::vector<double> trace = gain_trace(c.result.law);
        entry["cost"] = c.summary.at("cost");
        entry["iterations"] = c.summary.at("iterations");
        entry["termination"] = c.summary.at("termination");
        entry["dt"] = c.result.nominal.dt;
        entry["peak_gain"] = *std::max_element(trace.begin(), trace.end());
        entry["peak_time"] =
            c.result.nominal.dt *
            static_cast<double>(std::max_element(trace.begin(), trace.end()) - trace.begin());
        entry["gain_trace"] = trace_json(trace);

        StagePlan plan = build_plan(c.setup.problem, c.result.nominal, c.setup.solver);
        for (int j = 0; j < samples; ++j) {
          RolloutRecord rec =
              stochastic_rollout(c.setup.problem, c.setup.noise, plan, c.result.estimator,
                                 c.result.law, c.setup.x0, mix_seed(seed, j));
          write_trajectory_csv(dir + "/rollout_" + std::to_string(j) + ".csv", rec.realized);
        }
      } catch (const Error& e) {
        entry["error"] = e.what();
      }
      entries.push_back(entry);
    }
    return entries;
  };

  Json summary;
  summary["sigma"] = probe_setup.solver.sigma;
  summary["process_sweep"] = run_sweep("omega", process_scales, true);
  summary["measurement_sweep"] = run_sweep("gamma", measurement_scales, false);
  if (probe_setup.viapoint) {
    Json times = Json::array();
    for (const auto& v : probe_setup.viapoint->viapoints) times.push_back(v.time);
    summary["viapoint_times"] = times;
    summary["horizon"] = probe_setup.viapoint->horizon;
  }
  write_text_file(out_dir + "/summary.json", summary.dump(2) + "\n");
  return summary;
}

Json run_experiment_contact(const Json& config, const std::string& out_dir) {
  Setup probe_setup = load_setup(config);
  if (probe_setup.model != "contact")
    throw ConfigError("experiment contact requires problem.model \"contact\"");
  if (!probe_setup.contact) throw ConfigError("experiment contact: task missing");

  const Json exp = config.value("experiment", Json::object());
  const std::vector<double> gain_gammas = doubles_of(exp, "gain_gammas", {0.03, 0.3});
  const std::vector<double> rollout_gammas = doubles_of(exp, "rollout_gammas", {0.3, 0.003});
  const double process_scale = exp.value("process_scale", 0.2);
  const std::vector<double> wall_shifts = doubles_of(exp, "wall_shifts", {0.015, 0.03});
  const int samples = exp.value("samples", 100);
  const std::uint64_t seed = exp.value("seed", std::uint64_t{777});

  ensure_dir(out_dir);

  std::vector<double> gammas;
  for (double g : gain_gammas)
    if (std::find(gammas.begin(), gammas.end(), g) == gammas.end()) gammas.push_back(g);
  for (double g : rollout_gammas)
    if (std::find(gammas.begin(), gammas.end(), g) == gammas.end()) gammas.push_back(g);

  const double window_t0 = probe_setup.contact->force_window_start;
  const double window_t1 = probe_setup.contact->force_window_end;

  std::map<double, SolvedCase> solved;
  Json runs = Json::array();
  for (double gamma : gammas) {
    Json run_cfg = config;
    run_cfg["noise"]["process"] = process_scale;
    run_cfg["noise"]["measurement"] = gamma;
    const std::string name = "gamma_" + short_number(gamma);
    Json entry;
    entry["gamma"] = gamma;
    entry["dir"] = name;
    try {
      SolvedCase c = solve_case(run_cfg, out_dir + "/" + name);
      const std::vector<double> trace = gain_trace(c.result.law);
      const std::vector<double> est_trace = estimation_gain_trace(c.result.estimator);
      const double dt = c.result.nominal.dt;
      entry["cost"] = c.summary.at("cost");
      entry["iterations"] = c.summary.at("iterations");
      entry["termination"] = c.summary.at("termination");
      entry["dt"] = dt;
      entry["peak_gain"] = *std::max_element(trace.begin(), trace.end());
      // Peak around the approach and force window, where contact happens.
      entry["peak_gain_contact"] = peak_in_window(trace, dt, window_t0 - 0.3, window_t1);
      entry["gain_trace"] = trace_json(trace);
      entry["estimation_gain_trace"] = trace_json(est_trace);
      solved.emplace(gamma, std::move(c));
    } catch (const Error& e) {
      entry["error"] = e.what();
    }
    runs.push_back(entry);
  }

  // Evaluate each rollout law against true walls moved closer by each shift
  // (plus the unshifted baseline).
  std::vector<double> shifts = wall_shifts;
  if (std::find(shifts.begin(), shifts.end(), 0.0) == shifts.end())
    shifts.insert(shifts.begin(), 0.0);

  Json force_eval = Json::array();
  for (double gamma : rollout_gammas) {
    auto it = solved.find(gamma);
    if (it == solved.end()) continue;  // solve failed; recorded above
    const SolvedCase& c = it->second;
    const double dt = c.result.nominal.dt;
    const int steps = c.result.nominal.steps();
    const double desired = c.setup.contact->desired_force;

    StagePlan plan = build_plan(c.setup.problem, c.result.nominal, c.setup.solver);

    int force_col = 2;
    for (size_t i = 0; i < c.setup.problem.probe_labels.size(); ++i)
      if (c.setup.problem.probe_labels[i] == "lambda_norm") force_col = static_cast<int>(i);

    int k_lo = steps, k_hi = -1;
    for (int k = 0; k < steps; ++k) {
      const double t = k * dt;
      if (t >= window_t0 && t <= window_t1) {
        k_lo = std::min(k_lo, k);
        k_hi = std::max(k_hi, k);
      }
    }

    for (double shift : shifts) {
      const std::string name =
          "eval_gamma_" + short_number(gamma) + "_shift_" + short_number(shift);
      Json entry;
      entry["gamma"] = gamma;
      entry["shift"] = shift;
      entry["dir"] = name;
      try {
        const Vec x0 = contact_initial_state(*c.setup.contact, -shift);
        RolloutBatch batch = run_rollout_batch(c.setup.problem, c.setup.noise, plan,
                                               c.result.estimator, c.result.law, x0, samples,
                                               mix_seed(seed, static_cast<std::uint64_t>(
                                                                  shift * 1e6)),
                                               true);
        int maintained = 0;
        std::vector<double> peaks;
        std::vector<double> tracking;
        for (const auto& rec : batch.records) {
          if (rec.probes.size() == 0) continue;
          bool in_contact = true;
          double peak = 0.0, track = 0.0;
          for (int k = k_lo; k <= k_hi; ++k) {
            const double force = rec.probes(k, force_col);
            if (force <= 0.0) in_contact = false;
            peak = std::max(peak, force);
            track = std::max(track, std::abs(force - desired));
          }
          maintained += in_contact ? 1 : 0;
          peaks.push_back(peak);
          tracking.push_back(track);
        }
        const int evaluated = static_cast<int>(peaks.size());
        entry["samples"] = samples;
        entry["evaluated"] = evaluated;
        entry["diverged"] = batch.diverged;
        entry["maintained_fraction"] =
            evaluated > 0 ? static_cast<double>(maintained) / evaluated : 0.0;
        entry["median_peak_force"] = median_of(peaks);
        entry["max_peak_force"] =
            peaks.empty() ? 0.0 : *std::max_element(peaks.begin(), peaks.end());
        entry["median_tracking_error"] = median_of(tracking);

        const std::string dir = out_dir + "/" + name;
        ensure_dir(dir);
        if (!batch.records.empty()) {
          write_trajectory_csv(dir + "/trajectory.csv", batch.records.front().realized);
          write_probe_csv(dir + "/forces.csv", batch.records.front().probes,
                          c.setup.problem.probe_labels, dt);
        }
      } catch (const Error& e) {
        entry["error"] = e.what();
      }
      force_eval.push_back(entry);
    }
  }

  Json summary;
  summary["sigma"] = probe_setup.solver.sigma;
  summary["process_scale"] = process_scale;
  summary["force_window"] = Json::array({window_t0, window_t1});
  summary["desired_force"] = probe_setup.contact->desired_force;
  summary["runs"] = runs;
  summary["force_eval"] = force_eval;
  write_text_file(out_dir + "/summary.json", summary.dump(2) + "\n");
  return summary;
}

}  // namespace rsoc
