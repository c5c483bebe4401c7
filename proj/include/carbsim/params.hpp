#pragma once

#include <string>
#include <string_view>

namespace carbsim {

/// Which sorption isotherm (and matching permeability constant) a run uses.
enum class IsothermBranch { wetting, drying };

std::string_view to_string(IsothermBranch branch);
IsothermBranch isotherm_branch_from_string(std::string_view text);

/// Material and physical constants, strict SI except i_max (µA/cm²).
///
/// Defaults reproduce the calibrated concrete parameter set; the isotherm
/// constants (alpha, beta, perm_const_C) differ between the wetting and
/// drying branches, see wetting() and drying().
struct MaterialParams {
  double alpha = 0.9e6;          // Pa
  double beta = 3.85;            // -
  double perm_const_C = 1.29e2;  // m^4 kg^-2
  double eta = 1e-3;             // Pa s
  double rho_s = 2285.0;         // kg m^-3
  double rho_l = 1000.0;         // kg m^-3
  double M_l = 0.018;            // kg mol^-1
  double R_gas = 8.314;          // J mol^-1 K^-1
  double T = 293.15;             // K
  double theta_0 = 0.12;         // initial porosity
  double theta_c = 0.11;         // porosity of fully carbonated concrete
  double henry_H = 3.375e-4;     // mol Pa^-1 m^-3
  double k_n = 8.3;              // m^3 mol^-1 s^-1
  double c_OH_eq = 43.2;         // mol m^-3
  double c_CaOH2_0 = 1.2e-4;     // mol m^-3
  double i_max = 3.7;            // µA cm^-2
  double k_fit = 1e-3;           // -
  double theta_crit = 0.185;     // -
  double phi_t = 0.5;            // -

  static MaterialParams wetting(double theta_0);
  static MaterialParams drying(double theta_0);
  static MaterialParams for_branch(IsothermBranch branch, double theta_0);

  /// Throws std::invalid_argument naming the first violated invariant.
  void validate() const;

  /// H R T k_n c_OH: the bilinear rate coefficient of the neutralization reaction.
  double reaction_coefficient() const { return henry_H * R_gas * T * k_n * c_OH_eq; }

  bool operator==(const MaterialParams&) const = default;
};

/// Atmospheric pressure used to convert a CO2 volume fraction into a gas concentration.
inline constexpr double kAtmosphericPressure = 101325.0;  // Pa

/// Ideal-gas CO2 concentration (mol/m^3) for a given volume fraction.
double co2_concentration_from_fraction(double volume_fraction, double temperature,
                                       double R_gas = 8.314);

}  // namespace carbsim
