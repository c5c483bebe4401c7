#include "carbsim/validation.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>

#include <fmt/format.h>

#include "carbsim/cases.hpp"
#include "carbsim/config.hpp"
#include "carbsim/constitutive.hpp"
#include "carbsim/phasefield.hpp"
#include "carbsim/solver.hpp"

namespace carbsim {

namespace cst = constitutive;

namespace {

CheckResult check(const std::string& name, const std::function<std::string(bool&)>& body) {
  CheckResult r{name, false, ""};
  try {
    r.detail = body(r.passed);
  } catch (const std::exception& e) {
    r.passed = false;
    r.detail = std::string("exception: ") + e.what();
  }
  return r;
}

FieldState uniform_state(const Mesh& mesh, double S, double c, double ch) {
  const auto n = static_cast<Eigen::Index>(mesh.num_nodes());
  return {0.0, Eigen::VectorXd::Constant(n, S), Eigen::VectorXd::Constant(n, c), Eigen::VectorXd::Constant(n, ch)};
}

std::shared_ptr<const Mesh> tiny_mesh() {
  return std::make_shared<Mesh>(Mesh::rectangle(0.01, 0.01, 4, 4));
}

}  // namespace

std::vector<CheckResult> run_invariant_suite() {
  std::vector<CheckResult> out;

  out.push_back(check("isotherm_round_trip", [](bool& ok) {
    double worst = 0.0;
    for (auto branch : {IsothermBranch::wetting, IsothermBranch::drying}) {
      const auto p = MaterialParams::for_branch(branch, 0.12);
      for (int i = 1; i < 100; ++i) {
        const double h = 0.01 * i;
        const double pc = cst::capillary_pressure(cst::saturation_from_humidity(h, p), p);
        worst = std::max(worst, std::abs(pc - cst::kelvin_pc(h, p)) / cst::kelvin_pc(h, p));
      }
    }
    ok = worst <= 1e-10;
    return fmt::format("max rel err {:.3e}", worst);
  }));

  out.push_back(check("constitutive_derivatives", [](bool& ok) {
    const auto p = MaterialParams::wetting(0.15);
    double worst = 0.0;
    for (int i = 1; i < 20; ++i) {
      const double s = 0.05 * i, h = 1e-6 * s;
      auto fd = [&](auto f) { return (f(s + h) - f(s - h)) / (2 * h); };
      auto rel = [](double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); };
      worst = std::max(worst, rel(cst::dpc_ds(s, p), fd([&](double x) { return cst::capillary_pressure(x, p); })));
      worst = std::max(worst, rel(cst::drelative_permeability_ds(s, p),
                                  fd([&](double x) { return cst::relative_permeability(x, p); })));
      worst = std::max(worst, rel(cst::water_mobility(s, p).d_ds,
                                  fd([&](double x) { return cst::water_mobility(x, p).value; })));
    }
    ok = worst <= 1e-6;
    return fmt::format("max rel err {:.3e}", worst);
  }));

  out.push_back(check("jacobian_analytic_vs_fd", [](bool& ok) {
    auto mesh = tiny_mesh();
    auto p = MaterialParams::wetting(0.15);
    std::vector<BoundaryCondition> bcs{{"left", Unknown::saturation, BoundaryValue::constant(0.8)},
                                       {"left", Unknown::co2, BoundaryValue::constant(1.0)}};
    SolverOptions opt;
    opt.lumped_storage = false;
    const auto n = static_cast<Eigen::Index>(mesh->num_nodes());
    TransportSolver solver(mesh, p, Eigen::VectorXd::Constant(n, p.theta_0), {}, bcs, opt);
    FieldState old = uniform_state(*mesh, 0.4, 0.0, p.c_CaOH2_0);
    FieldState trial = old;
    for (Eigen::Index i = 0; i < n; ++i) {
      trial.S[i] = 0.4 + 0.3 * mesh->node(static_cast<std::size_t>(i)).x / 0.01;
      trial.c_co2[i] = 0.05 + 0.5 * (1.0 - mesh->node(static_cast<std::size_t>(i)).x / 0.01);
      trial.c_ch[i] = p.c_CaOH2_0 * (0.6 + 0.3 * mesh->node(static_cast<std::size_t>(i)).y / 0.01);
    }
    const double err = solver.jacobian_check(trial, old, 100.0);
    ok = err <= 1e-5;
    return fmt::format("max column rel diff {:.3e}", err);
  }));

  out.push_back(check("zero_flux_water_conservation", [](bool& ok) {
    auto mesh = tiny_mesh();
    auto p = MaterialParams::wetting(0.15);
    SolverOptions opt;
    opt.carbonation = false;
    const auto n = static_cast<Eigen::Index>(mesh->num_nodes());
    TransportSolver solver(mesh, p, Eigen::VectorXd::Constant(n, p.theta_0), {}, {}, opt);
    FieldState s = uniform_state(*mesh, 0.5, 0.0, p.c_CaOH2_0);
    for (Eigen::Index i = 0; i < n; ++i) s.S[i] = 0.3 + 0.5 * mesh->node(static_cast<std::size_t>(i)).x / 0.01;
    TimeStepPlan plan;
    plan.t_end = 1.0;
    plan.newton_tol = 1e-13;
    double worst = 0.0;
    const double w0 = solver.water_content(s);
    for (int k = 0; k < 5; ++k) {
      auto r = solver.solve_time_step(s, 600.0, plan);
      if (!r.converged) throw std::runtime_error("step did not converge");
      worst = std::max(worst, std::abs(solver.water_content(r.state) - solver.water_content(s)) / w0);
      s = r.state;
    }
    ok = worst <= 1e-10;
    return fmt::format("max relative change per step {:.3e}", worst);
  }));

  out.push_back(check("maximum_principle_wetting", [](bool& ok) {
    auto mesh = tiny_mesh();
    auto p = MaterialParams::wetting(0.15);
    SolverOptions opt;
    opt.carbonation = false;
    const auto n = static_cast<Eigen::Index>(mesh->num_nodes());
    TransportSolver solver(mesh, p, Eigen::VectorXd::Constant(n, p.theta_0), {},
                           {{"bottom", Unknown::saturation, BoundaryValue::constant(0.95)}}, opt);
    TimeStepPlan plan;
    plan.t_end = 3600.0;
    plan.dt_init = 1.0;
    double lo = 1.0, hi = 0.0;
    RunCallbacks cb;
    cb.on_step = [&](const FieldState& s) {
      lo = std::min(lo, s.S.minCoeff());
      hi = std::max(hi, s.S.maxCoeff());
    };
    run_simulation(solver, uniform_state(*mesh, 0.3, 0.0, p.c_CaOH2_0), plan, {}, cb);
    ok = lo >= 0.3 - 1e-9 && hi <= 0.95 + 1e-9;
    return fmt::format("S range [{:.6f}, {:.6f}] within [0.3, 0.95]", lo, hi);
  }));

  out.push_back(check("caoh2_bounds_under_carbonation", [](bool& ok) {
    auto mesh = tiny_mesh();
    auto p = MaterialParams::wetting(0.15);
    const auto n = static_cast<Eigen::Index>(mesh->num_nodes());
    TransportSolver solver(mesh, p, Eigen::VectorXd::Constant(n, p.theta_0), {},
                           {{"left", Unknown::co2, BoundaryValue::constant(1e-5)}});
    TimeStepPlan plan;
    plan.t_end = 10 * kDay;
    plan.dt_init = 100.0;
    double lo = 1e300, hi = -1e300, cmin = 1e300;
    RunCallbacks cb;
    cb.on_step = [&](const FieldState& s) {
      lo = std::min(lo, s.c_ch.minCoeff());
      hi = std::max(hi, s.c_ch.maxCoeff());
      cmin = std::min(cmin, s.c_co2.minCoeff());
    };
    run_simulation(solver, uniform_state(*mesh, 0.5, 0.0, p.c_CaOH2_0), plan, {}, cb);
    ok = lo >= -1e-12 && hi <= p.c_CaOH2_0 * (1 + 1e-12) && cmin >= -1e-12 && lo < p.c_CaOH2_0;
    return fmt::format("c_CaOH2 in [{:.3e}, {:.3e}], min c_CO2 {:.3e}", lo, hi, cmin);
  }));

  out.push_back(check("phase_field_bounds_and_symmetry", [](bool& ok) {
    const double ell = 1e-3;
    auto mesh = Mesh::rectangle(0.02, 0.004, 100, 4);
    CrackSpec crack{{0.01, 0.0}, {0.01, 0.004}, ell, 1e-4, 0.5};
    const auto phi = regularize_crack(mesh, crack);
    double asym = 0.0;
    for (std::size_t i = 0; i < mesh.num_nodes(); ++i) {
      const Point q = mesh.node(i);
      const int j = mesh.nearest_node({0.02 - q.x, q.y});
      asym = std::max(asym, std::abs(phi[static_cast<Eigen::Index>(i)] - phi[j]));
    }
    ok = phi.minCoeff() >= 0.0 && phi.maxCoeff() <= 1.0 + 1e-12 && asym <= 1e-10;
    return fmt::format("phi in [{:.3e}, {:.6f}], asymmetry {:.3e}", phi.minCoeff(), phi.maxCoeff(), asym);
  }));

  out.push_back(check("case5_boundary_cycle", [](bool& ok) {
    const auto b = case5_boundary_saturation();
    const double a = b.at(0.0), c = b.at(7 * kDay), d = b.at(14 * kDay);
    ok = std::abs(a - 0.4) < 1e-12 && std::abs(c - 0.8) < 1e-12 && std::abs(d - 0.4) < 1e-12;
    return fmt::format("S(0)={:.15g} S(7 d)={:.15g} S(14 d)={:.15g}", a, c, d);
  }));

  out.push_back(check("preset_config_round_trip", [](bool& ok) {
    int bad = 0;
    for (const auto& name : preset_names()) {
      RunConfig c;
      c.preset = name;
      c.scenario = preset(name);
      if (!(parse_config(serialize_config(c)) == c)) ++bad;
    }
    ok = bad == 0;
    return fmt::format("{} of {} presets differ after round trip", bad, preset_names().size());
  }));

  out.push_back(check("config_rejects_nonphysical_beta", [](bool& ok) {
    try {
      parse_config("preset = case1\n[material]\nbeta = 0.5\n");
      ok = false;
      return std::string("accepted beta = 0.5");
    } catch (const ConfigError& e) {
      ok = true;
      return std::string(e.what());
    }
  }));

  return out;
}

}  // namespace carbsim
