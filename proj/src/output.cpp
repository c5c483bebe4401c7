#include "carbsim/output.hpp"

#include <fstream>
#include <stdexcept>

#include <fmt/format.h>

#include "carbsim/constitutive.hpp"
#include "carbsim/observables.hpp"

namespace carbsim {

std::string format_double(double v) { return fmt::format("{:.17g}", v); }

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  return out;
}

}  // namespace

void write_vtk(const std::string& path, const Mesh& mesh, const std::vector<NodalField>& fields,
               const std::string& title) {
  auto out = open_out(path);
  out << "# vtk DataFile Version 3.0\n" << title << "\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << mesh.num_nodes() << " double\n";
  for (const auto& p : mesh.nodes()) out << format_double(p.x) << ' ' << format_double(p.y) << " 0\n";
  out << "CELLS " << mesh.num_elements() << ' ' << 5 * mesh.num_elements() << '\n';
  for (const auto& el : mesh.elements()) out << "4 " << el[0] << ' ' << el[1] << ' ' << el[2] << ' ' << el[3] << '\n';
  out << "CELL_TYPES " << mesh.num_elements() << '\n';
  for (std::size_t e = 0; e < mesh.num_elements(); ++e) out << "9\n";
  out << "POINT_DATA " << mesh.num_nodes() << '\n';
  for (const auto& f : fields) {
    if (f.values.size() != static_cast<Eigen::Index>(mesh.num_nodes()))
      throw std::invalid_argument("write_vtk: field '" + f.name + "' has the wrong size");
    out << "SCALARS " << f.name << " double 1\nLOOKUP_TABLE default\n";
    for (Eigen::Index i = 0; i < f.values.size(); ++i) out << format_double(f.values[i]) << '\n';
  }
  if (!out) throw std::runtime_error("error writing '" + path + "'");
}

std::vector<NodalField> state_fields(const ScenarioSetup& setup, const FieldState& state) {
  const double c0 = setup.solver->params().c_CaOH2_0;
  return {
      {"saturation", "1", state.S},
      {"c_co2", "mol/m^3", state.c_co2},
      {"c_caoh2", "mol/m^3", state.c_ch},
      {"porosity", "1", setup.solver->porosity(state)},
      {"pH", "1", ph_field(state.c_ch)},
      {"front", "1", state.c_ch.unaryExpr([c0](double c) { return constitutive::carbonation_front(c, c0); })},
      {"phase_field", "1", combined_phase_field(*setup.mesh, setup.cracks)},
  };
}

void write_csv(const std::string& path, const std::vector<CsvColumn>& columns,
               const std::vector<std::vector<double>>& rows) {
  auto out = open_out(path);
  for (std::size_t i = 0; i < columns.size(); ++i)
    out << (i ? "," : "") << columns[i].name << " [" << columns[i].unit << "]";
  out << '\n';
  for (const auto& row : rows) {
    if (row.size() != columns.size()) throw std::invalid_argument("write_csv: row width mismatch");
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << format_double(row[i]);
    out << '\n';
  }
  if (!out) throw std::runtime_error("error writing '" + path + "'");
}

void write_probe_csv(const std::string& path, const Scenario& scenario, const std::vector<ProbeRecord>& records) {
  std::vector<CsvColumn> cols{{"t", "s"}};
  for (const auto& p : scenario.probes) cols.push_back({p.name, std::string(probe_unit(p.kind))});
  std::vector<std::vector<double>> rows;
  rows.reserve(records.size());
  for (const auto& r : records) {
    std::vector<double> row{r.t};
    row.insert(row.end(), r.values.begin(), r.values.end());
    rows.push_back(std::move(row));
  }
  write_csv(path, cols, rows);
}

}  // namespace carbsim
