// Command-line front end; talks to the library through the C interface only.
#include "rsoc.h"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace {

bool read_file(const std::string& path, std::string& out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  std::ostringstream ss;
  ss << in.rdbuf();
  out = ss.str();
  return true;
}

int report(int rc, const char* err) {
  if (rc != RSOC_OK) std::cerr << "error: " << (err[0] ? err : "unspecified failure") << "\n";
  return rc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Risk-sensitive trajectory optimization under process and measurement noise"};
  app.require_subcommand(1);

  std::string config_path, out_dir, law_dir, experiment_name;
  int samples = 100;
  unsigned long long seed = 0;

  auto* solve_cmd =
      app.add_subcommand("solve", "Optimize a configured problem and write a run directory");
  solve_cmd->add_option("--config", config_path, "JSON config file")->required();
  solve_cmd->add_option("--out", out_dir, "output directory")->required();

  auto* rollout_cmd = app.add_subcommand(
      "rollout", "Run stochastic closed-loop rollouts of a previously solved law");
  rollout_cmd->add_option("--config", config_path, "JSON config file (defines the world)")
      ->required();
  rollout_cmd->add_option("--law", law_dir, "run directory containing solution.json")->required();
  rollout_cmd->add_option("--samples", samples, "number of rollouts")->capture_default_str();
  rollout_cmd->add_option("--seed", seed, "base RNG seed")->capture_default_str();
  rollout_cmd->add_option("--out", out_dir, "output directory (default <law>/rollout_eval)");

  auto* experiment_cmd = app.add_subcommand("experiment", "Run a bundled study end to end");
  experiment_cmd->add_option("name", experiment_name, "viapoint or contact")
      ->required()
      ->check(CLI::IsMember({"viapoint", "contact"}));
  experiment_cmd->add_option("--config", config_path, "JSON config file")->required();
  experiment_cmd->add_option("--out", out_dir, "output directory")->required();

  auto* selftest_cmd =
      app.add_subcommand("selftest", "Run the built-in numerical checks and exit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  char err[4096] = {0};

  if (selftest_cmd->parsed()) {
    std::vector<char> buf(1 << 16, '\0');
    const int rc = rsoc_selftest(buf.data(), static_cast<int>(buf.size()));
    std::cout << buf.data();
    return rc == RSOC_OK ? 0 : 3;
  }

  std::string config_text;
  if (!read_file(config_path, config_text)) {
    std::cerr << "error: cannot read config file '" << config_path << "'\n";
    return 2;
  }

  if (solve_cmd->parsed()) {
    const int rc =
        report(rsoc_solve_to_dir(config_text.c_str(), out_dir.c_str(), err, sizeof(err)), err);
    if (rc == RSOC_OK) std::cout << "solution written to " << out_dir << "\n";
    return rc;
  }

  if (rollout_cmd->parsed()) {
    if (out_dir.empty()) out_dir = law_dir + "/rollout_eval";
    const int rc = report(rsoc_rollout_to_dir(config_text.c_str(), law_dir.c_str(), samples, seed,
                                              out_dir.c_str(), err, sizeof(err)),
                          err);
    if (rc == RSOC_OK)
      std::cout << samples << " rollouts evaluated; results in " << out_dir << "\n";
    return rc;
  }

  if (experiment_cmd->parsed()) {
    const int rc = report(rsoc_run_experiment(experiment_name.c_str(), config_text.c_str(),
                                              out_dir.c_str(), err, sizeof(err)),
                          err);
    if (rc == RSOC_OK) std::cout << "experiment results in " << out_dir << "\n";
    return rc;
  }

  return 2;
}
