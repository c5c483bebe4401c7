#include "carbsim/runner.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <thread>

#include <fmt/format.h>

#include "carbsim/output.hpp"

namespace carbsim {

namespace fs = std::filesystem;

void prepare_output_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw std::runtime_error("cannot create output directory '" + dir + "'");
  const auto probe = fs::path(dir) / ".write_test";
  {
    std::ofstream out(probe);
    if (!out) throw std::runtime_error("output directory '" + dir + "' is not writable");
  }
  fs::remove(probe, ec);
}

unsigned worker_count(std::size_t jobs) {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("CARBSIM_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) n = static_cast<unsigned>(v);
  }
  return static_cast<unsigned>(std::max<std::size_t>(1, std::min<std::size_t>(n, jobs)));
}

namespace {

std::vector<std::size_t> probes_of(const Scenario& s, ProbeKind kind) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < s.probes.size(); ++i)
    if (s.probes[i].kind == kind) idx.push_back(i);
  return idx;
}

}  // namespace

RunReport execute_run(const RunConfig& config) {
  const Scenario scenario = effective_scenario(config);
  RunReport rep;
  rep.output_dir = config.output_dir;
  prepare_output_dir(rep.output_dir);
  auto path = [&](const std::string& name) { return (fs::path(rep.output_dir) / name).string(); };

  {
    std::ofstream out(path("config.ini"));
    out << serialize_config(config);
    rep.files.push_back(path("config.ini"));
  }

  if (config.jacobian_check) {
    auto setup = build(scenario);
    FieldState trial = setup.initial;
    setup.solver->apply_dirichlet(trial, scenario.plan.dt_init);
    rep.jacobian_error = setup.solver->jacobian_check(trial, setup.initial, scenario.plan.dt_init);
  }

  auto on_abort = [&](const ScenarioSetup& setup, const FieldState& state) {
    const auto p = path("abort_state.vtk");
    write_vtk(p, *setup.mesh, state_fields(setup, state), scenario.name + " abort");
    return p;
  };
  rep.result = run_scenario(scenario, on_abort);
  const auto& res = rep.result;

  if (!scenario.probes.empty()) {
    write_probe_csv(path("probes.csv"), scenario, res.records);
    rep.files.push_back(path("probes.csv"));
  }

  if (const auto ml = probes_of(scenario, ProbeKind::mass_loss); !ml.empty()) {
    std::vector<CsvColumn> cols{{"t", "s"}};
    for (auto i : ml) cols.push_back({scenario.probes[i].name, "%"});
    std::vector<std::vector<double>> rows;
    for (const auto& r : res.records) {
      std::vector<double> row{r.t};
      for (auto i : ml) row.push_back(r.values[i]);
      rows.push_back(std::move(row));
    }
    write_csv(path("mass_loss.csv"), cols, rows);
    rep.files.push_back(path("mass_loss.csv"));
  }

  auto depth = probes_of(scenario, ProbeKind::carbonation_depth);
  const auto fronts = probes_of(scenario, ProbeKind::front_depth);
  depth.insert(depth.end(), fronts.begin(), fronts.end());
  if (!depth.empty()) {
    std::vector<CsvColumn> cols{{"t", "s"}};
    for (auto i : depth) cols.push_back({scenario.probes[i].name, "m"});
    std::vector<std::vector<double>> rows;
    for (const auto& s : res.outputs) {
      const auto v = evaluate_probes(scenario, res.setup, s);
      std::vector<double> row{s.t};
      for (auto i : depth) row.push_back(v[i]);
      rows.push_back(std::move(row));
    }
    write_csv(path("carbonation_depth.csv"), cols, rows);
    rep.files.push_back(path("carbonation_depth.csv"));
  }

  if (config.write_vtk) {
    for (std::size_t k = 0; k < res.outputs.size(); ++k) {
      const auto p = path(fmt::format("snapshot_{:03d}.vtk", k));
      write_vtk(p, *res.setup.mesh, state_fields(res.setup, res.outputs[k]),
                fmt::format("{} t={:.17g} s", scenario.name, res.outputs[k].t));
      rep.files.push_back(p);
    }
    const auto p = path("final.vtk");
    write_vtk(p, *res.setup.mesh, state_fields(res.setup, res.final_state),
              fmt::format("{} t={:.17g} s", scenario.name, res.final_state.t));
    rep.files.push_back(p);
  }
  return rep;
}

}  // namespace carbsim
