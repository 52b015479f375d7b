#pragma once

#include "rsoc/models.hpp"
#include "rsoc/types.hpp"

#include <json.hpp>

#include <optional>
#include <string>

namespace rsoc {

using Json = nlohmann::json;

// A fully materialized run description: problem callbacks, noise covariances,
// solver settings, and the resolved config (defaults filled in) for
// re-emission into run directories.
struct Setup {
  std::string model;
  ContinuousProblem problem;
  NoiseModel noise;
  SolverConfig solver;
  Vec x0;
  int steps = 0;
  double dt = 0.0;
  Json resolved;
  std::optional<ViapointTask> viapoint;
  std::optional<ContactTask> contact;
  double xp_shift = 0.0;  // contact only: offset of the initial distance state
};

Json parse_json_text(const std::string& text);
Setup load_setup(const Json& config);
Setup load_setup_file(const std::string& path);

// Initial control sequence for a setup (zeros unless the config provides one).
std::vector<Vec> initial_controls(const Setup& setup);

}  // namespace rsoc
