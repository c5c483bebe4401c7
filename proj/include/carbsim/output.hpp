#pragma once

#include <string>
#include <vector>

#include "carbsim/cases.hpp"
#include "carbsim/mesh.hpp"

namespace carbsim {

/// Legacy ASCII VTK unstructured grid with float64 nodal fields.
void write_vtk(const std::string& path, const Mesh& mesh, const std::vector<NodalField>& fields,
               const std::string& title = "carbsim");

/// Nodal fields of a state: saturation, CO2, Ca(OH)2, porosity, pH, front variable, phase field.
std::vector<NodalField> state_fields(const ScenarioSetup& setup, const FieldState& state);

/// CSV with a "quantity [unit]" header and 17 significant digits.
struct CsvColumn {
  std::string name;
  std::string unit;
};
void write_csv(const std::string& path, const std::vector<CsvColumn>& columns,
               const std::vector<std::vector<double>>& rows);

/// Time series of every probe: columns t [s], then one per probe.
void write_probe_csv(const std::string& path, const Scenario& scenario, const std::vector<ProbeRecord>& records);

std::string format_double(double v);

}  // namespace carbsim
