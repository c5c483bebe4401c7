#include "carbsim/phasefield.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/SparseCholesky>

#include "carbsim/constitutive.hpp"

namespace carbsim {

void validate(const CrackSpec& spec) {
  if (!(spec.ell > 0.0)) throw std::invalid_argument("crack: ell must be positive");
  if (!(spec.w_cr >= 0.0)) throw std::invalid_argument("crack: w_cr must be non-negative");
  if (!(spec.phi_t > 0.0 && spec.phi_t < 1.0)) throw std::invalid_argument("crack: phi_t must lie in (0, 1)");
}

std::vector<int> seed_nodes(const Mesh& mesh, const CrackSpec& spec) {
  std::vector<int> seeds;
  const double tol = 1e-6 * spec.ell;
  for (std::size_t i = 0; i < mesh.num_nodes(); ++i)
    if (distance_to_segment(mesh.node(i), spec.start, spec.end) <= tol) seeds.push_back(static_cast<int>(i));
  return seeds;
}

void check_crack_resolution(const Mesh& mesh, const CrackSpec& spec) {
  const double len = distance(spec.start, spec.end);
  Eigen::Vector2d n(1.0, 0.0);
  if (len > 0.0) n = Eigen::Vector2d(-(spec.end.y - spec.start.y) / len, (spec.end.x - spec.start.x) / len);
  const double limit = spec.ell / 5.0 * (1.0 + 1e-6);
  for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
    if (distance_to_segment(mesh.centroid(e), spec.start, spec.end) > 2.0 * spec.ell) continue;
    const auto ext = mesh.element_extent(e);
    const double across = std::abs(n[0]) * ext.hx + std::abs(n[1]) * ext.hy;
    if (across > limit) {
      throw std::invalid_argument("crack: element size " + std::to_string(across) +
                                  " m across the crack exceeds ell/5 = " + std::to_string(spec.ell / 5.0) + " m");
    }
  }
}

Eigen::VectorXd regularize_crack(const Mesh& mesh, const CrackSpec& spec, bool check_resolution) {
  validate(spec);
  const auto seeds = seed_nodes(mesh, spec);
  if (seeds.empty()) throw std::invalid_argument("crack: no mesh nodes on the crack segment");
  if (check_resolution) check_crack_resolution(mesh, spec);

  const auto n = static_cast<Eigen::Index>(mesh.num_nodes());
  Eigen::SparseMatrix<double> A = assemble_mass(mesh) + spec.ell * spec.ell * assemble_stiffness(mesh);

  std::vector<int> free_index(static_cast<std::size_t>(n), -1);
  std::vector<bool> pinned(static_cast<std::size_t>(n), false);
  for (int s : seeds) pinned[static_cast<std::size_t>(s)] = true;
  Eigen::Index n_free = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    if (!pinned[static_cast<std::size_t>(i)]) free_index[static_cast<std::size_t>(i)] = static_cast<int>(n_free++);

  Eigen::VectorXd phi = Eigen::VectorXd::Zero(n);
  for (int s : seeds) phi[s] = 1.0;
  if (n_free == 0) return phi;

  std::vector<Eigen::Triplet<double>> trips;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n_free);
  for (Eigen::Index col = 0; col < A.outerSize(); ++col) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(A, col); it; ++it) {
      const int fi = free_index[static_cast<std::size_t>(it.row())];
      if (fi < 0) continue;
      const int fj = free_index[static_cast<std::size_t>(it.col())];
      if (fj >= 0) {
        trips.emplace_back(fi, fj, it.value());
      } else {
        rhs[fi] -= it.value();  // pinned value 1
      }
    }
  }
  Eigen::SparseMatrix<double> Aff(n_free, n_free);
  Aff.setFromTriplets(trips.begin(), trips.end());
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(Aff);
  if (ldlt.info() != Eigen::Success) throw std::runtime_error("crack: phase-field system is singular");
  const Eigen::VectorXd x = ldlt.solve(rhs);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int fi = free_index[static_cast<std::size_t>(i)];
    if (fi >= 0) phi[i] = std::clamp(x[fi], 0.0, 1.0);
  }
  return phi;
}

double crack_opening(double phi, const CrackSpec& spec) { return phi >= spec.phi_t ? spec.w_cr : 0.0; }

Eigen::Matrix2d crack_permeability(double phi, const Eigen::Vector2d& grad_phi, const CrackSpec& spec) {
  const double g = grad_phi.norm();
  const double w = crack_opening(phi, spec);
  if (w == 0.0 || phi <= 0.0 || g < 1e-8 / spec.ell) return Eigen::Matrix2d::Zero();
  const Eigen::Vector2d n = grad_phi / g;
  return phi * w * w / 12.0 * (Eigen::Matrix2d::Identity() - n * n.transpose());
}

Eigen::Matrix2d permeability_tensor(double theta, double phi, const Eigen::Vector2d& grad_phi,
                                    const CrackSpec& spec, const MaterialParams& params) {
  return constitutive::bulk_permeability(theta, params) * Eigen::Matrix2d::Identity() +
         crack_permeability(phi, grad_phi, spec);
}

std::vector<CrackField> regularize_cracks(const Mesh& mesh, const std::vector<CrackSpec>& specs,
                                          bool check_resolution) {
  std::vector<CrackField> out;
  out.reserve(specs.size());
  for (const auto& s : specs) out.push_back({s, regularize_crack(mesh, s, check_resolution)});
  return out;
}

Eigen::VectorXd combined_phase_field(const Mesh& mesh, const std::vector<CrackField>& cracks) {
  Eigen::VectorXd phi = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(mesh.num_nodes()));
  for (const auto& c : cracks) phi = phi.cwiseMax(c.phi);
  return phi;
}

CrackQuadratureData crack_quadrature_data(const Mesh& mesh, const std::vector<CrackField>& cracks,
                                          QuadratureRule rule) {
  CrackQuadratureData data;
  data.rule = rule;
  data.permeability.resize(mesh.num_elements());
  data.phi.resize(mesh.num_elements());
  for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
    for (std::size_t q = 0; q < 4; ++q) {
      const auto& qp = mesh.quadrature(e, rule)[q];
      Eigen::Matrix2d K = Eigen::Matrix2d::Zero();
      double phi_max = 0.0;
      for (const auto& c : cracks) {
        const double phi = value_at(mesh, e, qp, c.phi);
        K += crack_permeability(phi, gradient_at(mesh, e, qp, c.phi), c.spec);
        phi_max = std::max(phi_max, phi);
      }
      data.permeability[e][q] = K;
      data.phi[e][q] = std::clamp(phi_max, 0.0, 1.0);
    }
  }
  return data;
}

PermeabilityTensorField permeability_tensor_field(const Mesh& mesh, const Eigen::VectorXd& theta,
                                                  const CrackQuadratureData& cracks,
                                                  const MaterialParams& params) {
  PermeabilityTensorField field(mesh.num_elements());
  for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
    for (std::size_t q = 0; q < 4; ++q) {
      const double th = value_at(mesh, e, mesh.quadrature(e, cracks.rule)[q], theta);
      field[e][q] = constitutive::bulk_permeability(th, params) * Eigen::Matrix2d::Identity();
      if (!cracks.permeability.empty()) field[e][q] += cracks.permeability[e][q];
    }
  }
  return field;
}

}  // namespace carbsim
