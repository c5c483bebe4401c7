#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "carbsim/mesh.hpp"
#include "carbsim/params.hpp"
#include "carbsim/phasefield.hpp"
#include "carbsim/solver.hpp"

namespace carbsim {

/// Circular hole removed from the grid (elements with the centroid inside).
struct CircularVoid {
  Point center;
  double radius = 0.0;
  std::string marker;
  bool operator==(const CircularVoid&) const = default;
};

/// Axis-aligned rectangular cut-out.
struct RectangularVoid {
  Point lo;
  Point hi;
  std::string marker;
  bool operator==(const RectangularVoid&) const = default;
};

struct MeshSpec {
  AxisSpec x;
  AxisSpec y;
  std::string left = "left", right = "right", bottom = "bottom", top = "top";
  std::vector<CircularVoid> circles;
  std::vector<RectangularVoid> rectangles;
  bool operator==(const MeshSpec&) const = default;
};

/// Porosity rising linearly from the background value to `theta_inner`
/// over `thickness` towards the surface of a circular inclusion.
struct PorosityLayer {
  Point center;
  double radius = 0.0;
  double thickness = 0.0;
  double theta_inner = 0.0;
  bool operator==(const PorosityLayer&) const = default;
};

enum class ProbeKind { mass_loss, saturation, ph, corrosion_current, carbonation_depth, front_depth };

std::string_view to_string(ProbeKind k);
ProbeKind probe_kind_from_string(std::string_view text);
/// Unit label used in CSV headers.
std::string_view probe_unit(ProbeKind k);

/// A scalar observable recorded at every accepted step. Point probes use `point`;
/// depth probes measure from the facets carrying `marker`.
struct ProbeSpec {
  std::string name;
  ProbeKind kind = ProbeKind::mass_loss;
  Point point;
  std::string marker;
  bool operator==(const ProbeSpec&) const = default;
};

struct InitialConditions {
  double S = 0.5;
  double c_co2 = 0.0;
  double c_ch = 0.0;  // mol/m^3, usually the material's c_CaOH2_0
  bool operator==(const InitialConditions&) const = default;
};

/// Complete, self-contained description of one simulation.
struct Scenario {
  std::string name;
  MeshSpec mesh;
  IsothermBranch branch = IsothermBranch::wetting;
  MaterialParams params;
  std::vector<PorosityLayer> porosity_layers;
  std::vector<CrackSpec> cracks;
  InitialConditions initial;
  std::vector<BoundaryCondition> bcs;
  SolverOptions options;
  TimeStepPlan plan;
  std::vector<double> output_times;
  std::vector<ProbeSpec> probes;

  /// Throws std::invalid_argument on inconsistent data (markers are checked in build()).
  void validate() const;
  bool operator==(const Scenario&) const = default;
};

// Presets. Times are in seconds, lengths in metres.
Scenario case1_drying();
Scenario case2_wetting();
Scenario case3_cracked_wetting();
/// Carbonation at a relative humidity in (0, 1).
Scenario case4_carbonation(double rh);
inline const std::vector<double> kCase4Humidities{0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
/// Cyclic wetting (or constant boundary saturation when given) with optional cracks.
Scenario case5_cyclic(bool cracked, std::optional<double> constant_saturation = std::nullopt);
/// Preset by name: case1, case2, case3, case4 (70% RH), case5, case5-cracked.
Scenario preset(const std::string& name);
std::vector<std::string> preset_names();

inline constexpr double kDay = 86400.0;
inline constexpr double kHour = 3600.0;
/// Boundary saturation of the cyclic exposure: 0.4 (1 + 0.5 (sin(pi t / 7 d + 1.5 pi) + 1)).
BoundaryValue case5_boundary_saturation();
/// CO2 concentration at the exposed faces of case 5, mol/m^3. Chosen so the
/// uncracked sample depassivates at point A after about 65 days.
inline constexpr double kCase5Co2 = 7.2e-7;
/// Rebar point at which pH and corrosion current are monitored in case 5.
Point case5_point_a();

Mesh build_mesh(const MeshSpec& spec);
Eigen::VectorXd build_porosity(const Mesh& mesh, const Scenario& scenario);

/// Everything needed to time-step a scenario.
struct ScenarioSetup {
  std::shared_ptr<const Mesh> mesh;
  Eigen::VectorXd theta0;
  std::vector<CrackField> cracks;
  std::shared_ptr<TransportSolver> solver;
  FieldState initial;
};
ScenarioSetup build(const Scenario& scenario);

struct ProbeRecord {
  double t = 0.0;
  std::vector<double> values;  // one per probe, in scenario order
};

struct ScenarioResult {
  ScenarioSetup setup;
  std::vector<ProbeRecord> records;
  std::vector<FieldState> outputs;
  FieldState final_state;
  SimulationStats stats;
};

/// Evaluates every probe of the scenario on a state.
std::vector<double> evaluate_probes(const Scenario& scenario, const ScenarioSetup& setup, const FieldState& state);

/// Runs a scenario. `on_abort` (optional) writes a diagnostic dump and returns its path.
ScenarioResult run_scenario(const Scenario& scenario,
                            std::function<std::string(const ScenarioSetup&, const FieldState&)> on_abort = {});

}  // namespace carbsim
