#pragma once

#include <optional>
#include <string>
#include <vector>

#include "carbsim/cases.hpp"
#include "carbsim/config.hpp"

namespace carbsim {

/// Files written by a run and its results.
struct RunReport {
  std::string output_dir;
  std::vector<std::string> files;
  ScenarioResult result;
  std::optional<double> jacobian_error;  // set when the config asks for the check
};

/// Runs a configuration and writes probes.csv, mass_loss.csv / carbonation_depth.csv
/// when the scenario has such probes, VTK snapshots at the output times plus the
/// final state, and the effective config. On abort the last accepted state is
/// dumped to abort_state.vtk and SimulationAborted propagates.
RunReport execute_run(const RunConfig& config);

/// Creates the directory and checks that it is writable; throws std::runtime_error otherwise.
void prepare_output_dir(const std::string& dir);

/// Worker count for independent runs: CARBSIM_THREADS if set and positive,
/// else the hardware concurrency, never more than `jobs`.
unsigned worker_count(std::size_t jobs);

}  // namespace carbsim
