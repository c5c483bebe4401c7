#pragma once

#include <string>
#include <vector>

namespace carbsim {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Invariant checks on tiny meshes (4x4 unless a check needs a resolved crack):
/// isotherm round trip, constitutive derivatives, Jacobian, zero-flux
/// conservation, maximum principle, phase-field bounds and symmetry, preset
/// config round trips. Each check catches its own exceptions.
std::vector<CheckResult> run_invariant_suite();

}  // namespace carbsim
