#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "carbsim/mesh.hpp"
#include "carbsim/params.hpp"
#include "carbsim/solver.hpp"

namespace carbsim {

/// Relative water mass loss in percent: 100 (W0 - W) / W0 with W = sum V_i theta_i S_i.
/// Throws std::invalid_argument when the initial water content is zero.
double relative_mass_loss(const Eigen::VectorXd& theta, const Eigen::VectorXd& S, const Eigen::VectorXd& theta0,
                          const Eigen::VectorXd& S0, const Eigen::VectorXd& volumes);

/// Largest distance from the facets carrying `exposed_marker` at which c_CaOH2 <= c_threshold,
/// with linear interpolation of the crossing along element edges (in log concentration).
/// Returns 0 when no node is below the threshold. Throws on unknown markers.
double front_depth(const Mesh& mesh, const Eigen::VectorXd& c_ch, const std::string& exposed_marker,
                   double c_threshold);

/// Carbonation depth: front_depth at pH 9.
double carbonation_depth(const Mesh& mesh, const Eigen::VectorXd& c_ch, const std::string& exposed_marker);

/// Nodal pH of the pore solution.
Eigen::VectorXd ph_field(const Eigen::VectorXd& c_ch);

/// First time at which the pH series falls to the threshold, interpolated linearly
/// between records; nullopt when it never does.
std::optional<double> corrosion_onset_time(const std::vector<double>& times, const std::vector<double>& ph,
                                           double threshold = 9.0);

/// Corrosion current at a point: 0 while passive (pH > 9), the saturation law afterwards.
double corrosion_current(double ph, double theta, double S, const MaterialParams& params);

}  // namespace carbsim
