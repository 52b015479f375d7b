#include "rsoc/io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace rsoc {

namespace {

Json vec_json(const Vec& v) {
  Json out = Json::array();
  for (int i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Json mat_json(const Mat& m) {
  Json rows = Json::array();
  for (int r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

Vec vec_from_json(const Json& j) {
  Vec v(j.size());
  for (size_t i = 0; i < j.size(); ++i) v[static_cast<int>(i)] = j[i].get<double>();
  return v;
}

Mat mat_from_json(const Json& j) {
  if (j.empty()) return Mat();
  Mat m(j.size(), j[0].size());
  for (size_t r = 0; r < j.size(); ++r)
    for (size_t c = 0; c < j[r].size(); ++c)
      m(static_cast<int>(r), static_cast<int>(c)) = j[r][c].get<double>();
  return m;
}

}  // namespace

void ensure_dir(const std::string& path) {
  std::error_code ec;
  std::filesystem::create_directories(path, ec);
  if (ec) throw Error(ErrorCode::invalid, "cannot create directory '" + path + "': " + ec.message());
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::invalid, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::invalid, "cannot write '" + path + "'");
  out << content;
  if (!out) throw Error(ErrorCode::invalid, "short write to '" + path + "'");
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_trajectory_csv(const std::string& path, const Trajectory& traj) {
  const int n = static_cast<int>(traj.states.front().size());
  const int m = traj.controls.empty() ? 0 : static_cast<int>(traj.controls.front().size());
  std::ostringstream out;
  out << "k,t";
  for (int i = 0; i < n; ++i) out << ",x" << (i + 1);
  for (int i = 0; i < m; ++i) out << ",u" << (i + 1);
  out << "\n";
  for (size_t k = 0; k < traj.states.size(); ++k) {
    out << k << "," << format_double(traj.time(static_cast<int>(k)));
    for (int i = 0; i < n; ++i) out << "," << format_double(traj.states[k][i]);
    if (k < traj.controls.size())
      for (int i = 0; i < m; ++i) out << "," << format_double(traj.controls[k][i]);
    else
      for (int i = 0; i < m; ++i) out << ",";
    out << "\n";
  }
  write_text_file(path, out.str());
}

void write_gains_csv(const std::string& path, const ControlLaw& law, double dt) {
  std::ostringstream out;
  const int m = law.feedforward.empty() ? 0 : static_cast<int>(law.feedforward.front().size());
  const int n = law.feedback.empty() ? 0 : static_cast<int>(law.feedback.front().cols());
  out << "k,t,frobenius_L";
  for (int i = 0; i < m; ++i) out << ",l_" << (i + 1);
  for (int r = 0; r < m; ++r)
    for (int c = 0; c < n; ++c) out << ",L_" << (r + 1) << (c + 1);
  out << "\n";
  for (size_t k = 0; k < law.feedforward.size(); ++k) {
    out << k << "," << format_double(static_cast<double>(k) * dt) << ","
        << format_double(law.feedback[k].norm());
    for (int i = 0; i < m; ++i) out << "," << format_double(law.feedforward[k][i]);
    for (int r = 0; r < m; ++r)
      for (int c = 0; c < n; ++c) out << "," << format_double(law.feedback[k](r, c));
    out << "\n";
  }
  write_text_file(path, out.str());
}

void write_estimation_gains_csv(const std::string& path, const EstimatorPass& estimator,
                                double dt) {
  std::ostringstream out;
  const int n = estimator.gains.empty() ? 0 : static_cast<int>(estimator.gains.front().rows());
  const int p = estimator.gains.empty() ? 0 : static_cast<int>(estimator.gains.front().cols());
  out << "k,t,frobenius_K";
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < p; ++c) out << ",K_" << (r + 1) << (c + 1);
  out << "\n";
  for (size_t k = 0; k < estimator.gains.size(); ++k) {
    out << k << "," << format_double(static_cast<double>(k) * dt) << ","
        << format_double(estimator.gains[k].norm());
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < p; ++c) out << "," << format_double(estimator.gains[k](r, c));
    out << "\n";
  }
  write_text_file(path, out.str());
}

void write_probe_csv(const std::string& path, const Mat& probes,
                     const std::vector<std::string>& labels, double dt) {
  std::ostringstream out;
  out << "k,t";
  for (const auto& l : labels) out << "," << l;
  out << "\n";
  for (int k = 0; k < probes.rows(); ++k) {
    out << k << "," << format_double(k * dt);
    for (int c = 0; c < probes.cols(); ++c) out << "," << format_double(probes(k, c));
    out << "\n";
  }
  write_text_file(path, out.str());
}

void save_solution(const std::string& dir, const SolveResult& result, const Json& resolved_config,
                   const Json& extra_summary) {
  ensure_dir(dir);
  const double dt = result.nominal.dt;

  write_text_file(dir + "/config.json", resolved_config.dump(2) + "\n");
  write_trajectory_csv(dir + "/trajectory.csv", result.nominal);
  write_gains_csv(dir + "/gains.csv", result.law, dt);
  write_estimation_gains_csv(dir + "/estimation_gains.csv", result.estimator, dt);

  Json solution;
  solution["dt"] = dt;
  solution["x0"] = vec_json(result.nominal.states.front());
  solution["sigma"] = resolved_config.contains("solver")
                          ? resolved_config.at("solver").value("sigma", 0.0)
                          : 0.0;
  Json states = Json::array();
  for (const auto& x : result.nominal.states) states.push_back(vec_json(x));
  Json controls = Json::array();
  for (const auto& u : result.nominal.controls) controls.push_back(vec_json(u));
  Json feedforward = Json::array();
  for (const auto& l : result.law.feedforward) feedforward.push_back(vec_json(l));
  Json feedback = Json::array();
  for (const auto& L : result.law.feedback) feedback.push_back(mat_json(L));
  solution["states"] = states;
  solution["controls"] = controls;
  solution["feedforward"] = feedforward;
  solution["feedback"] = feedback;
  solution["config"] = resolved_config;
  write_text_file(dir + "/solution.json", solution.dump() + "\n");

  Json summary;
  summary["cost"] = result.cost_history.empty() ? 0.0 : result.cost_history.back();
  summary["iterations"] = result.iterations;
  summary["termination"] = to_string(result.termination);
  summary["regularization_final"] = result.regularization_final;
  Json history = Json::array();
  for (double c : result.cost_history) history.push_back(c);
  summary["cost_history"] = history;
  summary["steps"] = static_cast<int>(result.nominal.controls.size());
  summary["dt"] = dt;
  for (auto it = extra_summary.begin(); it != extra_summary.end(); ++it)
    summary[it.key()] = it.value();
  write_text_file(dir + "/summary.json", summary.dump(2) + "\n");
}

StoredSolution load_solution(const std::string& dir) {
  Json j = parse_json_text(read_text_file(dir + "/solution.json"));
  StoredSolution s;
  s.dt = j.at("dt").get<double>();
  s.sigma = j.value("sigma", 0.0);
  s.x0 = vec_from_json(j.at("x0"));
  std::vector<Vec> states, controls;
  for (const auto& x : j.at("states")) states.push_back(vec_from_json(x));
  for (const auto& u : j.at("controls")) controls.push_back(vec_from_json(u));
  s.nominal = Trajectory(s.dt, states, controls);
  for (const auto& l : j.at("feedforward")) s.law.feedforward.push_back(vec_from_json(l));
  for (const auto& L : j.at("feedback")) s.law.feedback.push_back(mat_from_json(L));
  if (s.law.feedforward.size() != s.nominal.controls.size() ||
      s.law.feedback.size() != s.nominal.controls.size())
    throw ConfigError("solution.json: law length does not match trajectory");
  s.config = j.at("config");
  return s;
}

}  // namespace rsoc
