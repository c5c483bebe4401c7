#pragma once

#include <stdexcept>
#include <string>

#include "carbsim/cases.hpp"

namespace carbsim {

/// Configuration error; the message names the line and the offending key.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A run: the scenario plus output and feature settings.
struct RunConfig {
  std::string preset;  // base preset the file was derived from (may be empty)
  Scenario scenario;
  std::string output_dir = "out";
  bool cracks = true;           // false drops all cracks from the scenario
  bool jacobian_check = false;  // compare analytic and FD Jacobians on the initial state
  bool write_vtk = true;
  bool operator==(const RunConfig&) const = default;
};

/// Parses the key = value / [section] format (see docs/config.md). Strict:
/// unknown sections or keys, duplicates and malformed values are errors.
RunConfig parse_config(const std::string& text);
RunConfig load_config_file(const std::string& path);

/// Full explicit serialization; parse_config(serialize_config(c)) == c.
std::string serialize_config(const RunConfig& config);

/// Scenario to run, with the crack flag applied.
Scenario effective_scenario(const RunConfig& config);

}  // namespace carbsim
