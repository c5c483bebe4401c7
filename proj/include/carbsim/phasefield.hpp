#pragma once

#include <array>
#include <vector>

#include <Eigen/Core>

#include "carbsim/mesh.hpp"
#include "carbsim/params.hpp"

namespace carbsim {

/// A prescribed straight crack: phi = 1 is pinned on the mesh nodes lying on
/// the segment [start, end] and smeared over the length scale `ell`.
struct CrackSpec {
  Point start;
  Point end;
  double ell = 0.0;    // m
  double w_cr = 0.0;   // m, crack opening
  double phi_t = 0.5;  // threshold above which the crack counts as open
  bool operator==(const CrackSpec&) const = default;
};

void validate(const CrackSpec& spec);

/// Nodes on the crack segment (to a tolerance of 1e-6 ell).
std::vector<int> seed_nodes(const Mesh& mesh, const CrackSpec& spec);

/// Throws unless every element within 2 ell of the crack is at most ell/5 wide
/// across the crack.
void check_crack_resolution(const Mesh& mesh, const CrackSpec& spec);

/// Solves phi - ell^2 lap(phi) = 0 with phi = 1 on the seed nodes and natural
/// conditions elsewhere. Throws std::invalid_argument when there are no seeds.
Eigen::VectorXd regularize_crack(const Mesh& mesh, const CrackSpec& spec, bool check_resolution = true);

/// Crack opening w(phi): w_cr where phi >= phi_t, zero otherwise.
double crack_opening(double phi, const CrackSpec& spec);

/// Laminar-flow crack permeability phi w^2/12 (1 - n n), n = grad(phi)/|grad(phi)|.
/// Vanishes where |grad(phi)| < 1e-8 / ell.
Eigen::Matrix2d crack_permeability(double phi, const Eigen::Vector2d& grad_phi, const CrackSpec& spec);

/// Full intrinsic permeability K_m + K_c at a point.
Eigen::Matrix2d permeability_tensor(double theta, double phi, const Eigen::Vector2d& grad_phi,
                                    const CrackSpec& spec, const MaterialParams& params);

/// A regularized crack: its spec and nodal phase field.
struct CrackField {
  CrackSpec spec;
  Eigen::VectorXd phi;
};

std::vector<CrackField> regularize_cracks(const Mesh& mesh, const std::vector<CrackSpec>& specs,
                                          bool check_resolution = true);

/// Combined nodal phase field (pointwise maximum over cracks); zeros without cracks.
Eigen::VectorXd combined_phase_field(const Mesh& mesh, const std::vector<CrackField>& cracks);

/// Time-independent crack data at every quadrature point: the summed crack
/// permeability tensors and the combined phase-field value.
struct CrackQuadratureData {
  QuadratureRule rule = QuadratureRule::gauss;
  std::vector<std::array<Eigen::Matrix2d, 4>> permeability;
  std::vector<std::array<double, 4>> phi;
};

CrackQuadratureData crack_quadrature_data(const Mesh& mesh, const std::vector<CrackField>& cracks,
                                          QuadratureRule rule = QuadratureRule::gauss);

/// Per-quadrature-point symmetric permeability tensors, m².
using PermeabilityTensorField = std::vector<std::array<Eigen::Matrix2d, 4>>;

PermeabilityTensorField permeability_tensor_field(const Mesh& mesh, const Eigen::VectorXd& theta,
                                                  const CrackQuadratureData& cracks,
                                                  const MaterialParams& params);

}  // namespace carbsim
