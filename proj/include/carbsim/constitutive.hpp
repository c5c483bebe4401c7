#pragma once

#include <cstdint>

#include "carbsim/params.hpp"

// Closed-form material laws for water transport, carbonation and corrosion.
// All functions are pure apart from the negative-concentration counter.
namespace carbsim::constitutive {

/// Saturation floor; the solver keeps S in [kSaturationFloor, 1 - kSaturationFloor].
inline constexpr double kSaturationFloor = 1e-6;
/// pH of fully carbonated pore solution; lower bound of ph_from_caoh2.
inline constexpr double kPhFloor = 8.3;
/// pH below which steel is considered depassivated.
inline constexpr double kDepassivationPh = 9.0;
/// Prefactor of the CO2 diffusivity law, m^2/s.
inline constexpr double kCo2DiffusivityScale = 1.64e-6;

double clamp_saturation(double s);

/// Van Genuchten capillary pressure, Pa. Requires s in (0, 1].
double capillary_pressure(double s, const MaterialParams& p);
/// dp_c/dS, Pa. Requires s in (0, 1).
double dpc_ds(double s, const MaterialParams& p);
/// d²p_c/dS², Pa. Requires s in (0, 1).
double d2pc_ds2(double s, const MaterialParams& p);

/// Kelvin law, Pa. Requires h_r in (0, 1].
double kelvin_pc(double h_r, const MaterialParams& p);
/// Sorption isotherm S_l(h_r).
double saturation_from_humidity(double h_r, const MaterialParams& p);

/// Mualem / van Genuchten relative permeability. s is clamped to [0, 1].
double relative_permeability(double s, const MaterialParams& p);
double drelative_permeability_ds(double s, const MaterialParams& p);

/// Water mobility (k_r / eta) * (-dp_c/dS) with its S derivative, at a clamped saturation.
struct Mobility {
  double value;
  double d_ds;
};
Mobility water_mobility(double s, const MaterialParams& p);

/// Isotropic bulk permeability theta^8 / (C rho_s^2), m². Requires theta in (0, 1).
double bulk_permeability(double theta, const MaterialParams& p);
double dbulk_permeability_dtheta(double theta, const MaterialParams& p);

struct Co2Diffusivity {
  double value;
  double d_dtheta;
  double d_ds;
};
/// Effective CO2 diffusivity including the phase-field crack enhancement, m²/s.
double co2_diffusivity(double theta, double s, double phi);
Co2Diffusivity co2_diffusivity_with_derivatives(double theta, double s, double phi);

/// Neutralization rate R_n = H R T k_n c_OH c_CO2 c_CaOH2, mol m^-3 s^-1.
/// Negative concentrations are treated as zero and counted.
double neutralization_rate(double c_co2, double c_ch, const MaterialParams& p);
std::uint64_t negative_concentration_count();
void reset_negative_concentration_count();

/// Corrosion current density, µA/cm².
double corrosion_current_density(double theta, double s, const MaterialParams& p);

/// Carbonation front variable 1 - c/c0, clamped to [0, 1].
double carbonation_front(double c_ch, double c_ch0);
double porosity_from_front(double varphi, const MaterialParams& p);
double porosity_from_front(double varphi, double theta_0, double theta_c);
/// pH of the pore solution, floored at kPhFloor.
double ph_from_caoh2(double c_ch);
/// Ca(OH)2 concentration at which ph_from_caoh2 equals the given pH (above the floor).
double caoh2_at_ph(double ph);

}  // namespace carbsim::constitutive
