#pragma once

#include "rsoc/config.hpp"
#include "rsoc/evaluation.hpp"
#include "rsoc/solver.hpp"
#include "rsoc/types.hpp"

#include <string>

namespace rsoc {

void ensure_dir(const std::string& path);
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

// Round-trip exact double formatting shared by all CSV writers.
std::string format_double(double v);

// k,t,x1..xn,u1..um (controls blank on the final row)
void write_trajectory_csv(const std::string& path, const Trajectory& traj);

// k,t,frobenius_L,l_1..l_m,L_11..L_mn (row-major feedback)
void write_gains_csv(const std::string& path, const ControlLaw& law, double dt);

// k,t,frobenius_K,K_11..K_np (row-major gain)
void write_estimation_gains_csv(const std::string& path, const EstimatorPass& estimator,
                                double dt);

// k,t,<probe labels>
void write_probe_csv(const std::string& path, const Mat& probes,
                     const std::vector<std::string>& labels, double dt);

// Writes config.json, solution.json, trajectory.csv, gains.csv,
// estimation_gains.csv and summary.json into dir.
void save_solution(const std::string& dir, const SolveResult& result, const Json& resolved_config,
                   const Json& extra_summary = Json::object());

struct StoredSolution {
  double dt = 0.0;
  double sigma = 0.0;
  Vec x0;
  Trajectory nominal;
  ControlLaw law;
  Json config;
};

StoredSolution load_solution(const std::string& dir);

}  // namespace rsoc
