#include "carbsim/constitutive.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <string>

namespace carbsim {

std::string_view to_string(IsothermBranch branch) {
  return branch == IsothermBranch::wetting ? "wetting" : "drying";
}

IsothermBranch isotherm_branch_from_string(std::string_view text) {
  if (text == "wetting") return IsothermBranch::wetting;
  if (text == "drying") return IsothermBranch::drying;
  throw std::invalid_argument("unknown isotherm branch '" + std::string(text) + "'");
}

MaterialParams MaterialParams::wetting(double theta_0) {
  MaterialParams p;
  p.alpha = 0.9e6;
  p.beta = 3.85;
  p.perm_const_C = 1.29e2;
  p.theta_0 = theta_0;
  return p;
}

MaterialParams MaterialParams::drying(double theta_0) {
  MaterialParams p;
  p.alpha = 18.62e6;
  p.beta = 2.27;
  p.perm_const_C = 7.4e6;
  p.theta_0 = theta_0;
  return p;
}

MaterialParams MaterialParams::for_branch(IsothermBranch branch, double theta_0) {
  return branch == IsothermBranch::wetting ? wetting(theta_0) : drying(theta_0);
}

void MaterialParams::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("material parameter invariant violated: ") + what);
  };
  require(std::isfinite(alpha) && alpha > 0.0, "alpha > 0");
  require(std::isfinite(beta) && beta > 1.0, "beta > 1");
  require(std::isfinite(perm_const_C) && perm_const_C > 0.0, "perm_const_C > 0");
  require(theta_c > 0.0, "theta_c > 0");
  require(theta_c < theta_0, "theta_c < theta_0");
  require(theta_0 < 1.0, "theta_0 < 1");
  require(eta > 0.0, "eta > 0");
  require(rho_s > 0.0, "rho_s > 0");
  require(rho_l > 0.0, "rho_l > 0");
  require(M_l > 0.0, "M_l > 0");
  require(R_gas > 0.0, "R_gas > 0");
  require(T > 0.0, "T > 0");
  require(henry_H > 0.0, "henry_H > 0");
  require(k_n > 0.0, "k_n > 0");
  require(c_OH_eq > 0.0, "c_OH_eq > 0");
  require(c_CaOH2_0 > 0.0, "c_CaOH2_0 > 0");
  require(i_max > 0.0, "i_max > 0");
  require(k_fit > 0.0, "k_fit > 0");
  require(theta_crit > 0.0 && theta_crit < 1.0, "0 < theta_crit < 1");
  require(phi_t > 0.0 && phi_t < 1.0, "0 < phi_t < 1");
}

double co2_concentration_from_fraction(double volume_fraction, double temperature, double R_gas) {
  return volume_fraction * kAtmosphericPressure / (R_gas * temperature);
}

}  // namespace carbsim

namespace carbsim::constitutive {

namespace {

std::atomic<std::uint64_t> g_negative_concentrations{0};

[[noreturn]] void domain_error(const char* what) { throw std::domain_error(what); }

}  // namespace

double clamp_saturation(double s) {
  return std::clamp(s, kSaturationFloor, 1.0 - kSaturationFloor);
}

double capillary_pressure(double s, const MaterialParams& p) {
  if (!(s > 0.0) || s > 1.0) domain_error("capillary_pressure: saturation outside (0, 1]");
  const double u = std::expm1(-p.beta * std::log(s));
  if (u <= 0.0) return 0.0;
  return p.alpha * std::pow(u, 1.0 - 1.0 / p.beta);
}

double dpc_ds(double s, const MaterialParams& p) {
  if (!(s > 0.0) || !(s < 1.0)) domain_error("dpc_ds: saturation outside (0, 1)");
  const double m = 1.0 - 1.0 / p.beta;
  const double u = std::expm1(-p.beta * std::log(s));
  const double du = -p.beta * std::pow(s, -p.beta - 1.0);
  return p.alpha * m * std::pow(u, m - 1.0) * du;
}

double d2pc_ds2(double s, const MaterialParams& p) {
  if (!(s > 0.0) || !(s < 1.0)) domain_error("d2pc_ds2: saturation outside (0, 1)");
  const double m = 1.0 - 1.0 / p.beta;
  const double u = std::expm1(-p.beta * std::log(s));
  const double du = -p.beta * std::pow(s, -p.beta - 1.0);
  const double d2u = p.beta * (p.beta + 1.0) * std::pow(s, -p.beta - 2.0);
  return p.alpha * m * ((m - 1.0) * std::pow(u, m - 2.0) * du * du + std::pow(u, m - 1.0) * d2u);
}

double kelvin_pc(double h_r, const MaterialParams& p) {
  if (!(h_r > 0.0) || h_r > 1.0) domain_error("kelvin_pc: relative humidity outside (0, 1]");
  return -p.rho_l * p.R_gas * p.T * std::log(h_r) / p.M_l;
}

double saturation_from_humidity(double h_r, const MaterialParams& p) {
  const double pc = kelvin_pc(h_r, p);
  if (pc == 0.0) return 1.0;
  const double x = std::pow(pc / p.alpha, p.beta / (p.beta - 1.0));
  return std::pow(1.0 + x, -1.0 / p.beta);
}

double relative_permeability(double s, const MaterialParams& p) {
  s = std::clamp(s, 0.0, 1.0);
  if (s == 1.0) return 1.0;
  // 1 - (1 - s^beta)^(1/beta) without cancellation at small s
  const double g = -std::expm1(std::log1p(-std::pow(s, p.beta)) / p.beta);
  return std::sqrt(s) * g * g;
}

double drelative_permeability_ds(double s, const MaterialParams& p) {
  s = clamp_saturation(s);
  const double a = std::pow(s, p.beta);
  const double g = -std::expm1(std::log1p(-a) / p.beta);
  const double dg = std::pow(1.0 - a, 1.0 / p.beta - 1.0) * std::pow(s, p.beta - 1.0);
  return 0.5 / std::sqrt(s) * g * g + std::sqrt(s) * 2.0 * g * dg;
}

Mobility water_mobility(double s, const MaterialParams& p) {
  const double sc = clamp_saturation(s);
  const double kr = relative_permeability(sc, p);
  const double dpc = dpc_ds(sc, p);
  Mobility m{kr * (-dpc) / p.eta, 0.0};
  if (sc == s) {
    m.d_ds = (drelative_permeability_ds(sc, p) * (-dpc) + kr * (-d2pc_ds2(sc, p))) / p.eta;
  }
  return m;
}

double bulk_permeability(double theta, const MaterialParams& p) {
  if (!(theta > 0.0) || !(theta < 1.0)) domain_error("bulk_permeability: porosity outside (0, 1)");
  return std::pow(theta, 8) / (p.perm_const_C * p.rho_s * p.rho_s);
}

double dbulk_permeability_dtheta(double theta, const MaterialParams& p) {
  if (!(theta > 0.0) || !(theta < 1.0)) domain_error("bulk_permeability: porosity outside (0, 1)");
  return 8.0 * std::pow(theta, 7) / (p.perm_const_C * p.rho_s * p.rho_s);
}

double co2_diffusivity(double theta, double s, double phi) {
  return co2_diffusivity_with_derivatives(theta, s, phi).value;
}

Co2Diffusivity co2_diffusivity_with_derivatives(double theta, double s, double phi) {
  s = std::clamp(s, 0.0, 1.0);
  phi = std::clamp(phi, 0.0, 1.0);
  const double phi10 = std::pow(phi, 10);
  const double por = theta + (1.0 - theta) * phi10;
  const double wet = 1.0 - s;
  const double por_f = std::pow(por, 1.8);
  const double wet_f = std::pow(wet, 2.2);
  Co2Diffusivity d{};
  d.value = kCo2DiffusivityScale * por_f * wet_f;
  d.d_dtheta = kCo2DiffusivityScale * 1.8 * std::pow(por, 0.8) * (1.0 - phi10) * wet_f;
  d.d_ds = -kCo2DiffusivityScale * por_f * 2.2 * std::pow(wet, 1.2);
  return d;
}

double neutralization_rate(double c_co2, double c_ch, const MaterialParams& p) {
  if (c_co2 < 0.0 || c_ch < 0.0) {
    g_negative_concentrations.fetch_add(1, std::memory_order_relaxed);
    c_co2 = std::max(c_co2, 0.0);
    c_ch = std::max(c_ch, 0.0);
  }
  return p.reaction_coefficient() * c_co2 * c_ch;
}

std::uint64_t negative_concentration_count() {
  return g_negative_concentrations.load(std::memory_order_relaxed);
}

void reset_negative_concentration_count() { g_negative_concentrations.store(0); }

double corrosion_current_density(double theta, double s, const MaterialParams& p) {
  const double d = theta - p.theta_crit;
  const double shape = 0.5 * (1.0 + d / std::sqrt(p.k_fit + d * d));
  return p.i_max * shape * std::clamp(s, 0.0, 1.0);
}

double carbonation_front(double c_ch, double c_ch0) {
  return std::clamp(1.0 - c_ch / c_ch0, 0.0, 1.0);
}

double porosity_from_front(double varphi, double theta_0, double theta_c) {
  return theta_0 + varphi * (theta_c - theta_0);
}

double porosity_from_front(double varphi, const MaterialParams& p) {
  return porosity_from_front(varphi, p.theta_0, p.theta_c);
}

double ph_from_caoh2(double c_ch) {
  if (!(c_ch > 0.0)) return kPhFloor;
  return std::max(kPhFloor, 14.0 + std::log10(2e3 * c_ch));
}

double caoh2_at_ph(double ph) { return std::pow(10.0, ph - 14.0) / 2e3; }

}  // namespace carbsim::constitutive
