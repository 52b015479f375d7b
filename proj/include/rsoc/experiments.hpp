#pragma once

#include "rsoc/config.hpp"

#include <iosfwd>
#include <string>

namespace rsoc {

// Solve the configured problem and persist the run directory; returns the
// summary document.
Json solve_to_dir(const Json& config, const std::string& out_dir);

// Re-derive the plan/filter around a stored solution and run a batch of
// stochastic rollouts; writes rollout records and a summary into out_dir.
Json rollout_to_dir(const Json& config, const std::string& law_dir, int samples,
                    std::uint64_t seed, const std::string& out_dir);

// Viapoint study: solves the task over the configured process-noise and
// measurement-noise grids and records feedback-gain traces per run.
Json run_experiment_viapoint(const Json& config, const std::string& out_dir);

// Contact study: solves the task per measurement-noise level, then evaluates
// each law against true walls shifted closer, recording force traces and
// contact statistics.
Json run_experiment_contact(const Json& config, const std::string& out_dir);

}  // namespace rsoc
