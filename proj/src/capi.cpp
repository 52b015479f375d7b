#include "rsoc.h"

#include "rsoc/config.hpp"
#include "rsoc/evaluation.hpp"
#include "rsoc/experiments.hpp"
#include "rsoc/io.hpp"
#include "rsoc/selftest.hpp"
#include "rsoc/solver.hpp"

#include <cstring>
#include <memory>
#include <optional>
#include <sstream>
#include <string>

struct rsoc_session {
  rsoc::Setup setup;
  std::optional<rsoc::SolveResult> result;
  std::string last_error;
};

namespace {

void copy_message(const std::string& msg, char* buf, int len) {
  if (!buf || len <= 0) return;
  const int n = std::min<int>(len - 1, static_cast<int>(msg.size()));
  std::memcpy(buf, msg.data(), n);
  buf[n] = '\0';
}

int code_of(const std::exception& e) {
  if (const auto* err = dynamic_cast<const rsoc::Error*>(&e))
    return static_cast<int>(err->code());
  return RSOC_ERR_INVALID;
}

// Runs fn, translating exceptions into codes and the session error slot.
template <typename Fn>
int guarded(rsoc_session* s, Fn&& fn) {
  if (!s) return RSOC_ERR_INVALID;
  try {
    return fn();
  } catch (const std::exception& e) {
    s->last_error = e.what();
    return code_of(e);
  } catch (...) {
    s->last_error = "unknown error";
    return RSOC_ERR_INVALID;
  }
}

template <typename Fn>
int guarded_free(char* errbuf, int errbuf_len, Fn&& fn) {
  try {
    return fn();
  } catch (const std::exception& e) {
    copy_message(e.what(), errbuf, errbuf_len);
    return code_of(e);
  } catch (...) {
    copy_message("unknown error", errbuf, errbuf_len);
    return RSOC_ERR_INVALID;
  }
}

const rsoc::SolveResult* solved(const rsoc_session* s) {
  if (!s || !s->result) return nullptr;
  return &*s->result;
}

}  // namespace

extern "C" {

const char* rsoc_version(void) { return "0.1.0"; }

rsoc_session* rsoc_session_create(const char* config_json, char* errbuf, int errbuf_len) {
  if (!config_json) {
    copy_message("config_json is null", errbuf, errbuf_len);
    return nullptr;
  }
  try {
    auto s = std::make_unique<rsoc_session>();
    s->setup = rsoc::load_setup(rsoc::parse_json_text(config_json));
    return s.release();
  } catch (const std::exception& e) {
    copy_message(e.what(), errbuf, errbuf_len);
    return nullptr;
  }
}

void rsoc_session_destroy(rsoc_session* s) { delete s; }

int rsoc_last_error(const rsoc_session* s, char* buf, int len) {
  if (!s) return RSOC_ERR_INVALID;
  copy_message(s->last_error, buf, len);
  return RSOC_OK;
}

int rsoc_solve(rsoc_session* s) {
  return guarded(s, [&] {
    auto u0 = rsoc::initial_controls(s->setup);
    s->result = rsoc::solve(s->setup.problem, s->setup.noise, s->setup.x0, u0, s->setup.solver);
    return RSOC_OK;
  });
}

int rsoc_num_steps(const rsoc_session* s) { return s ? s->setup.steps : -RSOC_ERR_INVALID; }
int rsoc_state_dim(const rsoc_session* s) {
  return s ? s->setup.problem.state_dim : -RSOC_ERR_INVALID;
}
int rsoc_control_dim(const rsoc_session* s) {
  return s ? s->setup.problem.control_dim : -RSOC_ERR_INVALID;
}
int rsoc_measurement_dim(const rsoc_session* s) {
  return s ? s->setup.problem.measurement_dim : -RSOC_ERR_INVALID;
}

int rsoc_iterations(const rsoc_session* s) {
  const auto* r = solved(s);
  return r ? r->iterations : -RSOC_ERR_INVALID;
}

int rsoc_termination(const rsoc_session* s, char* buf, int len) {
  const auto* r = solved(s);
  if (!r) return RSOC_ERR_INVALID;
  copy_message(rsoc::to_string(r->termination), buf, len);
  return RSOC_OK;
}

int rsoc_cost_history(const rsoc_session* s, double* out, int cap) {
  const auto* r = solved(s);
  if (!r || (!out && cap > 0)) return -RSOC_ERR_INVALID;
  const int total = static_cast<int>(r->cost_history.size());
  for (int i = 0; i < std::min(cap, total); ++i) out[i] = r->cost_history[i];
  return total;
}

int rsoc_nominal_state(const rsoc_session* s, int k, double* out) {
  const auto* r = solved(s);
  if (!r || !out || k < 0 || k > r->nominal.steps()) return RSOC_ERR_INVALID;
  const rsoc::Vec& x = r->nominal.states[k];
  std::memcpy(out, x.data(), sizeof(double) * x.size());
  return RSOC_OK;
}

int rsoc_nominal_control(const rsoc_session* s, int k, double* out) {
  const auto* r = solved(s);
  if (!r || !out || k < 0 || k >= r->nominal.steps()) return RSOC_ERR_INVALID;
  const rsoc::Vec& u = r->nominal.controls[k];
  std::memcpy(out, u.data(), sizeof(double) * u.size());
  return RSOC_OK;
}

int rsoc_feedforward(const rsoc_session* s, int k, double* out) {
  const auto* r = solved(s);
  if (!r || !out || k < 0 || k >= static_cast<int>(r->law.feedforward.size()))
    return RSOC_ERR_INVALID;
  const rsoc::Vec& l = r->law.feedforward[k];
  std::memcpy(out, l.data(), sizeof(double) * l.size());
  return RSOC_OK;
}

int rsoc_feedback_gain(const rsoc_session* s, int k, double* out) {
  const auto* r = solved(s);
  if (!r || !out || k < 0 || k >= static_cast<int>(r->law.feedback.size()))
    return RSOC_ERR_INVALID;
  const rsoc::Mat& L = r->law.feedback[k];
  for (int row = 0; row < L.rows(); ++row)
    for (int col = 0; col < L.cols(); ++col) out[row * L.cols() + col] = L(row, col);
  return RSOC_OK;
}

int rsoc_estimator_gain(const rsoc_session* s, int k, double* out) {
  const auto* r = solved(s);
  if (!r || !out || k < 0 || k >= static_cast<int>(r->estimator.gains.size()))
    return RSOC_ERR_INVALID;
  const rsoc::Mat& K = r->estimator.gains[k];
  for (int row = 0; row < K.rows(); ++row)
    for (int col = 0; col < K.cols(); ++col) out[row * K.cols() + col] = K(row, col);
  return RSOC_OK;
}

int rsoc_write_outputs(rsoc_session* s, const char* out_dir) {
  return guarded(s, [&] {
    if (!out_dir) throw rsoc::Error(rsoc::ErrorCode::invalid, "out_dir is null");
    if (!s->result) throw rsoc::Error(rsoc::ErrorCode::invalid, "session not solved yet");
    rsoc::save_solution(out_dir, *s->result, s->setup.resolved);
    return RSOC_OK;
  });
}

int rsoc_rollout_batch(rsoc_session* s, int samples, unsigned long long seed, double* costs_out) {
  return guarded(s, [&] {
    if (!s->result) throw rsoc::Error(rsoc::ErrorCode::invalid, "session not solved yet");
    if (samples < 1 || !costs_out)
      throw rsoc::Error(rsoc::ErrorCode::invalid, "need samples >= 1 and a cost buffer");
    const auto& r = *s->result;
    rsoc::StagePlan plan = rsoc::build_plan(s->setup.problem, r.nominal, s->setup.solver);
    rsoc::RolloutBatch batch =
        rsoc::run_rollout_batch(s->setup.problem, s->setup.noise, plan, r.estimator, r.law,
                                s->setup.x0, samples, seed);
    if (batch.diverged > 0)
      throw rsoc::DivergenceError(std::to_string(batch.diverged) + " of " +
                                      std::to_string(samples) + " rollouts diverged",
                                  -1);
    for (int i = 0; i < samples; ++i) costs_out[i] = batch.costs[i];
    return RSOC_OK;
  });
}

int rsoc_estimate_risk(const double* costs, int count, double sigma, double out[5]) {
  if (!costs || count < 1 || !out) return RSOC_ERR_INVALID;
  try {
    std::vector<double> v(costs, costs + count);
    rsoc::RiskEstimate r = rsoc::estimate_risk(v, sigma);
    out[0] = r.mc_risk;
    out[1] = r.mean;
    out[2] = r.variance;
    out[3] = r.skewness;
    out[4] = r.std_error;
    return RSOC_OK;
  } catch (const std::exception& e) {
    return code_of(e);
  }
}

int rsoc_solve_to_dir(const char* config_json, const char* out_dir, char* errbuf,
                      int errbuf_len) {
  return guarded_free(errbuf, errbuf_len, [&] {
    if (!config_json || !out_dir)
      throw rsoc::Error(rsoc::ErrorCode::invalid, "config_json/out_dir is null");
    rsoc::solve_to_dir(rsoc::parse_json_text(config_json), out_dir);
    return RSOC_OK;
  });
}

int rsoc_rollout_to_dir(const char* config_json, const char* law_dir, int samples,
                        unsigned long long seed, const char* out_dir, char* errbuf,
                        int errbuf_len) {
  return guarded_free(errbuf, errbuf_len, [&] {
    if (!config_json || !law_dir || !out_dir)
      throw rsoc::Error(rsoc::ErrorCode::invalid, "config_json/law_dir/out_dir is null");
    rsoc::rollout_to_dir(rsoc::parse_json_text(config_json), law_dir, samples, seed, out_dir);
    return RSOC_OK;
  });
}

int rsoc_run_experiment(const char* name, const char* config_json, const char* out_dir,
                        char* errbuf, int errbuf_len) {
  return guarded_free(errbuf, errbuf_len, [&] {
    if (!name || !config_json || !out_dir)
      throw rsoc::Error(rsoc::ErrorCode::invalid, "name/config_json/out_dir is null");
    const std::string which = name;
    rsoc::Json cfg = rsoc::parse_json_text(config_json);
    if (which == "viapoint") {
      rsoc::run_experiment_viapoint(cfg, out_dir);
    } else if (which == "contact") {
      rsoc::run_experiment_contact(cfg, out_dir);
    } else {
      throw rsoc::ConfigError("unknown experiment '" + which + "' (viapoint|contact)");
    }
    return RSOC_OK;
  });
}

int rsoc_selftest(char* buf, int len) {
  std::ostringstream report;
  int failures = 0;
  try {
    failures = rsoc::selftest(report);
  } catch (const std::exception& e) {
    report << "selftest aborted: " << e.what() << "\n";
    failures = 1;
  }
  copy_message(report.str(), buf, len);
  return failures == 0 ? RSOC_OK : RSOC_ERR_SOLVER;
}

}  // extern "C"
