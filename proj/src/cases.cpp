#include "carbsim/cases.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <stdexcept>

#include "carbsim/constitutive.hpp"
#include "carbsim/observables.hpp"

namespace carbsim {

namespace cst = constitutive;

std::string_view to_string(ProbeKind k) {
  switch (k) {
    case ProbeKind::mass_loss: return "mass_loss";
    case ProbeKind::saturation: return "saturation";
    case ProbeKind::ph: return "ph";
    case ProbeKind::corrosion_current: return "corrosion_current";
    case ProbeKind::carbonation_depth: return "carbonation_depth";
    case ProbeKind::front_depth: return "front_depth";
  }
  return "?";
}

ProbeKind probe_kind_from_string(std::string_view text) {
  for (auto k : {ProbeKind::mass_loss, ProbeKind::saturation, ProbeKind::ph, ProbeKind::corrosion_current,
                 ProbeKind::carbonation_depth, ProbeKind::front_depth})
    if (to_string(k) == text) return k;
  throw std::invalid_argument("unknown probe kind '" + std::string(text) + "'");
}

std::string_view probe_unit(ProbeKind k) {
  switch (k) {
    case ProbeKind::mass_loss: return "%";
    case ProbeKind::saturation: return "1";
    case ProbeKind::ph: return "1";
    case ProbeKind::corrosion_current: return "uA/cm^2";
    case ProbeKind::carbonation_depth:
    case ProbeKind::front_depth: return "m";
  }
  return "?";
}

void Scenario::validate() const {
  auto fail = [&](const std::string& m) { throw std::invalid_argument("scenario '" + name + "': " + m); };
  params.validate();
  plan.validate();
  if (!(mesh.x.length > 0.0 && mesh.y.length > 0.0)) fail("mesh dimensions must be positive");
  if (!(initial.S >= 0.0 && initial.S <= 1.0)) fail("initial saturation outside [0, 1]");
  if (!(initial.c_co2 >= 0.0)) fail("initial CO2 concentration must be >= 0");
  if (!(initial.c_ch >= 0.0 && initial.c_ch <= params.c_CaOH2_0)) fail("initial Ca(OH)2 outside [0, c0]");
  for (const auto& c : cracks) carbsim::validate(c);
  for (const auto& l : porosity_layers)
    if (!(l.thickness > 0.0) || !(l.theta_inner > 0.0 && l.theta_inner < 1.0) || !(l.radius >= 0.0))
      fail("invalid porosity layer");
  for (const auto& v : mesh.circles)
    if (!(v.radius > 0.0) || v.marker.empty()) fail("invalid circular void");
  for (const auto& v : mesh.rectangles)
    if (!(v.hi.x > v.lo.x && v.hi.y > v.lo.y) || v.marker.empty()) fail("invalid rectangular void");
  std::set<std::pair<std::string, Unknown>> seen;
  for (const auto& bc : bcs) {
    if (bc.marker.empty()) fail("boundary condition without marker");
    if (!seen.insert({bc.marker, bc.unknown}).second)
      fail("two conditions for " + std::string(to_string(bc.unknown)) + " on '" + bc.marker + "'");
    if (bc.value.kind == BoundaryValue::Kind::sine && !(bc.value.period > 0.0)) fail("sine period must be > 0");
  }
  for (double t : output_times)
    if (!(t >= 0.0)) fail("output times must be >= 0");
  std::set<std::string> names;
  for (const auto& p : probes) {
    if (p.name.empty() || !names.insert(p.name).second) fail("probe names must be unique and non-empty");
    const bool depth = p.kind == ProbeKind::carbonation_depth || p.kind == ProbeKind::front_depth;
    if (depth && p.marker.empty()) fail("depth probe '" + p.name + "' needs a marker");
  }
}

namespace {

AxisSpec uniform(double length, double h) { return AxisSpec{length, h, {}, {}, 1.2}; }

BoundaryCondition sat_bc(const std::string& marker, double s) {
  return {marker, Unknown::saturation, BoundaryValue::constant(s)};
}

}  // namespace

Scenario case1_drying() {
  Scenario s;
  s.name = "case1";
  s.mesh.x = uniform(0.1, 0.001);
  s.mesh.y = uniform(0.001, 0.001);
  s.mesh.left = "exposed";
  s.mesh.right = "exposed";
  s.mesh.bottom = "side";
  s.mesh.top = "side";
  s.branch = IsothermBranch::drying;
  s.params = MaterialParams::drying(0.12);
  s.initial.S = cst::saturation_from_humidity(0.87, s.params);
  s.initial.c_ch = s.params.c_CaOH2_0;
  s.bcs.push_back(sat_bc("exposed", cst::saturation_from_humidity(0.50, s.params)));
  s.options.carbonation = false;
  s.plan.t_end = 1000.0 * 365.0 * kDay;
  s.plan.dt_init = 60.0;
  s.plan.dt_min = 1e-3;
  s.plan.dt_max = 60.0 * kDay;
  s.plan.growth = 1.5;
  for (double d : {1.0, 3.0, 7.0, 14.0, 28.0, 56.0, 112.0, 224.0, 365.0, 730.0, 1825.0, 3650.0, 36500.0, 365000.0})
    s.output_times.push_back(d * kDay);
  s.probes.push_back({"mass_loss", ProbeKind::mass_loss, {}, ""});
  s.probes.push_back({"S_center", ProbeKind::saturation, {0.05, 0.0005}, ""});
  return s;
}

Scenario case2_wetting() {
  Scenario s;
  s.name = "case2";
  const double r = 0.5e-3, layer = 0.3e-3;
  const Point w1{1e-3, 10e-3}, w2{1e-3, 20e-3};
  s.mesh.x = uniform(2e-3, 0.05e-3);
  s.mesh.y = AxisSpec{32e-3, 0.5e-3,
                      {{w1.y - r - layer - 0.2e-3, w1.y + r + layer + 0.2e-3, 0.05e-3},
                       {w2.y - r - layer - 0.2e-3, w2.y + r + layer + 0.2e-3, 0.05e-3}},
                      {},
                      1.2};
  s.mesh.circles = {{w1, r, "wire"}, {w2, r, "wire"}};
  s.branch = IsothermBranch::wetting;
  s.params = MaterialParams::wetting(0.15);
  s.porosity_layers = {{w1, r, layer, 0.70}, {w2, r, layer, 0.70}};
  s.initial.S = cst::saturation_from_humidity(0.53, s.params);
  s.initial.c_ch = s.params.c_CaOH2_0;
  s.bcs.push_back(sat_bc("bottom", 1.0));
  s.options.carbonation = false;
  s.plan.t_end = 3.0 * kHour;
  s.plan.dt_init = 0.01;
  s.plan.dt_min = 1e-8;
  s.plan.dt_max = 60.0;
  for (double m : {5.0, 10.0, 20.0, 30.0, 45.0, 60.0, 120.0, 180.0}) s.output_times.push_back(m * 60.0);
  s.probes.push_back({"S_wire", ProbeKind::saturation, {w2.x, w2.y - r}, ""});
  s.probes.push_back({"mass_loss", ProbeKind::mass_loss, {}, ""});
  return s;
}

Scenario case3_cracked_wetting() {
  Scenario s;
  s.name = "case3";
  const double ell = 0.043e-3;
  const double xc = 0.05, notch_tip = 0.09, notch_half = 1e-3;
  s.mesh.x = AxisSpec{0.1, 2e-3, {{xc - 3 * ell, xc + 3 * ell, ell / 5}}, {xc - notch_half, xc, xc + notch_half}, 1.3};
  s.mesh.y = AxisSpec{0.1, 2e-3, {{0.05, 0.1, 1e-3}}, {notch_tip, notch_tip - 0.0343}, 1.2};
  s.mesh.rectangles = {{{xc - notch_half, notch_tip}, {xc + notch_half, 0.1 + 1e-9}, "notch"}};
  s.branch = IsothermBranch::wetting;
  s.params = MaterialParams::wetting(0.12);
  s.cracks = {{{xc, notch_tip}, {xc, notch_tip - 0.0343}, ell, 0.043e-3, 0.5}};
  s.initial.S = cst::saturation_from_humidity(0.50, s.params);
  s.initial.c_ch = s.params.c_CaOH2_0;
  s.bcs.push_back(sat_bc("top", cst::saturation_from_humidity(0.65, s.params)));
  s.bcs.push_back(sat_bc("notch", 1.0));
  s.options.carbonation = false;
  s.plan.t_end = 7.0 * kHour;
  s.plan.dt_init = 1e-3;
  s.plan.dt_min = 1e-9;
  s.plan.dt_max = 300.0;
  for (double h : {0.03, 1.0, 2.0, 3.0, 5.0, 7.0}) s.output_times.push_back(h * kHour);
  s.probes.push_back({"S_crack_mid", ProbeKind::saturation, {xc, notch_tip - 0.017}, ""});
  s.probes.push_back({"mass_loss", ProbeKind::mass_loss, {}, ""});
  return s;
}

Scenario case4_carbonation(double rh) {
  if (!(rh > 0.0 && rh < 1.0)) throw std::invalid_argument("case4: relative humidity must lie in (0, 1)");
  Scenario s;
  s.name = "case4";
  const double h = 0.25e-3;
  s.mesh.x = uniform(0.05, h);
  s.mesh.y = uniform(h, h);
  s.mesh.left = "exposed";
  s.mesh.right = "symmetry";
  s.mesh.bottom = "side";
  s.mesh.top = "side";
  s.branch = IsothermBranch::wetting;
  s.params = MaterialParams::wetting(0.26);
  s.params.T = 293.0;
  const double sb = cst::saturation_from_humidity(rh, s.params);
  const double cb = co2_concentration_from_fraction(0.20, s.params.T, s.params.R_gas);
  s.initial.S = sb;
  s.initial.c_ch = s.params.c_CaOH2_0;
  s.bcs.push_back(sat_bc("exposed", sb));
  s.bcs.push_back({"exposed", Unknown::co2, BoundaryValue::constant(cb)});
  s.options.carbonation = true;
  s.plan.t_end = 56.0 * kDay;
  s.plan.dt_init = 1.0;
  s.plan.dt_min = 1e-6;
  s.plan.dt_max = 0.25 * kDay;
  s.output_times = {28.0 * kDay, 56.0 * kDay};
  s.probes.push_back({"carbonation_depth", ProbeKind::carbonation_depth, {}, "exposed"});
  s.probes.push_back({"front_depth_half", ProbeKind::front_depth, {}, "exposed"});
  return s;
}

BoundaryValue case5_boundary_saturation() {
  return BoundaryValue::sine(0.6, 0.2, 14.0 * kDay, 1.5 * std::numbers::pi);
}

Point case5_point_a() {
  const double off = 8e-3 / std::numbers::sqrt2;
  return {0.025 - off, 0.025 - off};
}

Scenario case5_cyclic(bool cracked, std::optional<double> constant_saturation) {
  Scenario s;
  s.name = cracked ? "case5-cracked" : "case5";
  const double L = 0.05, c = 0.025, ell = 0.5e-3;
  if (cracked) {
    const double band = 2.0 * ell + 1e-3;
    s.mesh.x = AxisSpec{L, 1e-3, {{c - band, c + band, ell / 5}}, {c}, 1.3};
    s.mesh.y = AxisSpec{L, 1e-3, {{c - band, c + band, ell / 5}}, {c}, 1.3};
  } else {
    s.mesh.x = uniform(L, 1e-3);
    s.mesh.y = uniform(L, 1e-3);
  }
  s.mesh.left = "exposed";
  s.mesh.bottom = "exposed";
  s.mesh.right = "sealed";
  s.mesh.top = "sealed";
  s.mesh.circles = {{{c, c}, 8e-3, "rebar"}};
  s.branch = IsothermBranch::wetting;
  s.params = MaterialParams::wetting(0.16);
  if (cracked) {
    s.cracks = {{{c, 0.0}, {c, 0.015}, ell, 0.1e-3, 0.5}, {{0.0, c}, {0.015, c}, ell, 0.1e-3, 0.5}};
  }
  s.initial.S = constant_saturation.value_or(0.4);
  s.initial.c_ch = s.params.c_CaOH2_0;
  s.bcs.push_back({"exposed", Unknown::saturation,
                   constant_saturation ? BoundaryValue::constant(*constant_saturation) : case5_boundary_saturation()});
  s.bcs.push_back({"exposed", Unknown::co2, BoundaryValue::constant(kCase5Co2)});
  s.options.carbonation = true;
  s.plan.t_end = 120.0 * kDay;
  s.plan.dt_init = 10.0;
  s.plan.dt_min = 1e-6;
  s.plan.dt_max = 0.5 * kDay;
  s.output_times = {30.0 * kDay, 60.0 * kDay, 90.0 * kDay, 120.0 * kDay};
  const Point a = case5_point_a();
  s.probes.push_back({"pH_A", ProbeKind::ph, a, ""});
  s.probes.push_back({"S_A", ProbeKind::saturation, a, ""});
  s.probes.push_back({"i_corr_A", ProbeKind::corrosion_current, a, ""});
  s.probes.push_back({"carbonation_depth", ProbeKind::carbonation_depth, {}, "exposed"});
  return s;
}

std::vector<std::string> preset_names() { return {"case1", "case2", "case3", "case4", "case5", "case5-cracked"}; }

Scenario preset(const std::string& name) {
  if (name == "case1") return case1_drying();
  if (name == "case2") return case2_wetting();
  if (name == "case3") return case3_cracked_wetting();
  if (name == "case4") return case4_carbonation(0.7);
  if (name == "case5") return case5_cyclic(false);
  if (name == "case5-cracked") return case5_cyclic(true);
  throw std::invalid_argument("unknown preset '" + name + "'");
}

Mesh build_mesh(const MeshSpec& spec) {
  BoundaryMarkers markers{spec.left, spec.right, spec.bottom, spec.top};
  Mesh mesh = Mesh::tensor(graded_axis(spec.x), graded_axis(spec.y), markers);
  for (const auto& v : spec.circles) {
    mesh = mesh.without_elements([&](Point p) { return distance(p, v.center) < v.radius; }, v.marker);
  }
  for (const auto& v : spec.rectangles) {
    mesh = mesh.without_elements(
        [&](Point p) { return p.x > v.lo.x && p.x < v.hi.x && p.y > v.lo.y && p.y < v.hi.y; }, v.marker);
  }
  return mesh;
}

Eigen::VectorXd build_porosity(const Mesh& mesh, const Scenario& scenario) {
  const double base = scenario.params.theta_0;
  Eigen::VectorXd theta = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(mesh.num_nodes()), base);
  for (std::size_t i = 0; i < mesh.num_nodes(); ++i) {
    for (const auto& l : scenario.porosity_layers) {
      const double d = std::max(0.0, distance(mesh.node(i), l.center) - l.radius);
      if (d >= l.thickness) continue;
      const double v = l.theta_inner + (base - l.theta_inner) * d / l.thickness;
      auto& t = theta[static_cast<Eigen::Index>(i)];
      t = l.theta_inner > base ? std::max(t, v) : std::min(t, v);
    }
  }
  return theta;
}

ScenarioSetup build(const Scenario& scenario) {
  scenario.validate();
  ScenarioSetup st;
  auto mesh = std::make_shared<Mesh>(build_mesh(scenario.mesh));
  for (const auto& bc : scenario.bcs)
    if (!mesh->has_marker(bc.marker))
      throw std::invalid_argument("scenario '" + scenario.name + "': unknown marker '" + bc.marker + "'");
  for (const auto& p : scenario.probes)
    if (!p.marker.empty() && !mesh->has_marker(p.marker))
      throw std::invalid_argument("scenario '" + scenario.name + "': unknown marker '" + p.marker + "'");
  st.mesh = mesh;
  st.theta0 = build_porosity(*mesh, scenario);
  st.cracks = regularize_cracks(*mesh, scenario.cracks);
  st.solver = std::make_shared<TransportSolver>(st.mesh, scenario.params, st.theta0, st.cracks, scenario.bcs,
                                                scenario.options);
  const auto n = static_cast<Eigen::Index>(mesh->num_nodes());
  st.initial.t = 0.0;
  st.initial.S = Eigen::VectorXd::Constant(n, cst::clamp_saturation(scenario.initial.S));
  st.initial.S = st.initial.S.cwiseMax(cst::kSaturationFloor).cwiseMin(1.0 - cst::kSaturationFloor);
  st.initial.c_co2 = Eigen::VectorXd::Constant(n, scenario.initial.c_co2);
  st.initial.c_ch = Eigen::VectorXd::Constant(n, scenario.initial.c_ch);
  return st;
}

std::vector<double> evaluate_probes(const Scenario& scenario, const ScenarioSetup& setup, const FieldState& state) {
  const Mesh& mesh = *setup.mesh;
  std::vector<double> out;
  out.reserve(scenario.probes.size());
  for (const auto& p : scenario.probes) {
    switch (p.kind) {
      case ProbeKind::mass_loss:
        out.push_back(relative_mass_loss(setup.solver->porosity(state), state.S,
                                         setup.solver->porosity(setup.initial), setup.initial.S,
                                         setup.solver->nodal_volumes()));
        break;
      case ProbeKind::saturation: out.push_back(mesh.interpolate(state.S, p.point)); break;
      case ProbeKind::ph: out.push_back(cst::ph_from_caoh2(mesh.interpolate(state.c_ch, p.point))); break;
      case ProbeKind::corrosion_current: {
        const double ph = cst::ph_from_caoh2(mesh.interpolate(state.c_ch, p.point));
        out.push_back(corrosion_current(ph, mesh.interpolate(setup.theta0, p.point),
                                        mesh.interpolate(state.S, p.point), scenario.params));
        break;
      }
      case ProbeKind::carbonation_depth: out.push_back(carbonation_depth(mesh, state.c_ch, p.marker)); break;
      case ProbeKind::front_depth:
        out.push_back(front_depth(mesh, state.c_ch, p.marker, 0.5 * scenario.params.c_CaOH2_0));
        break;
    }
  }
  return out;
}

ScenarioResult run_scenario(const Scenario& scenario,
                            std::function<std::string(const ScenarioSetup&, const FieldState&)> on_abort) {
  ScenarioResult res;
  res.setup = build(scenario);
  RunCallbacks cb;
  cb.on_step = [&](const FieldState& s) { res.records.push_back({s.t, evaluate_probes(scenario, res.setup, s)}); };
  cb.on_output = [&](const FieldState& s) { res.outputs.push_back(s); };
  if (on_abort) cb.on_abort = [&](const FieldState& s) { return on_abort(res.setup, s); };
  res.final_state = run_simulation(*res.setup.solver, res.setup.initial, scenario.plan, scenario.output_times, cb,
                                   &res.stats);
  return res;
}

}  // namespace carbsim
