#include <cmath>

#include <doctest.h>

#include "carbsim/constitutive.hpp"
#include "carbsim/phasefield.hpp"

using namespace carbsim;

namespace {

// vertical crack through the middle of a strip 20 ell wide
struct Strip {
  Mesh mesh;
  CrackSpec crack;
};

Strip strip(double ell, int per_ell) {
  const int nx = 20 * per_ell;
  const double w = 20 * ell, h = 2 * ell;
  return {Mesh::rectangle(w, h, nx, 2), CrackSpec{{w / 2, 0.0}, {w / 2, h}, ell, 1e-4, 0.5}};
}

double phi_at(const Strip& s, const Eigen::VectorXd& phi, double d) {
  return s.mesh.interpolate(phi, {s.crack.start.x + d, s.crack.start.y + s.crack.ell});
}

}  // namespace

TEST_SUITE("phasefield") {

TEST_CASE("transverse profile approaches exp(-d/ell)") {
  const double ell = 1e-3;
  auto s = strip(ell, 7);
  const auto phi = regularize_crack(s.mesh, s.crack);
  CHECK(phi_at(s, phi, 0.0) == doctest::Approx(1.0));
  CHECK(phi_at(s, phi, ell * std::log(2.0)) == doctest::Approx(0.5).epsilon(0.05));
  CHECK(phi_at(s, phi, -ell * std::log(2.0)) == doctest::Approx(0.5).epsilon(0.05));
  CHECK(phi_at(s, phi, 3 * ell) == doctest::Approx(std::exp(-3.0)).epsilon(0.05));
  CHECK(phi.minCoeff() >= 0.0);
  CHECK(phi.maxCoeff() <= 1.0 + 1e-12);
}

TEST_CASE("self-convergence beyond ell/7 is second order") {
  const double ell = 1e-3;
  // values 2 ell from the seed on meshes h = ell/7, ell/14, ell/28
  double v[3];
  for (int k = 0; k < 3; ++k) {
    auto s = strip(ell, 7 << k);
    v[k] = phi_at(s, regularize_crack(s.mesh, s.crack), 2 * ell);
  }
  const double d1 = std::abs(v[1] - v[0]), d2 = std::abs(v[2] - v[1]);
  CHECK(std::log2(d1 / d2) >= 1.8);
  CHECK(d2 <= 1e-3 * v[2]);
}

TEST_CASE("resolution is enforced across the crack") {
  auto s = strip(1e-3, 2);
  CHECK_THROWS_AS(regularize_crack(s.mesh, s.crack), std::invalid_argument);
  CHECK_NOTHROW(regularize_crack(s.mesh, s.crack, false));
  auto ok = strip(1e-3, 5);
  CHECK_NOTHROW(check_crack_resolution(ok.mesh, ok.crack));
}

TEST_CASE("spec validation and seeds") {
  auto s = strip(1e-3, 7);
  CrackSpec bad = s.crack;
  bad.ell = 0.0;
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);
  CHECK(seed_nodes(s.mesh, s.crack).size() == 3);
  CrackSpec off = s.crack;
  off.start.x = off.end.x = 0.01 + 0.5 * 20e-3 / 140.0;  // between grid lines
  CHECK_THROWS_AS(regularize_crack(s.mesh, off), std::invalid_argument);
}

TEST_CASE("crack opening and laminar permeability") {
  CrackSpec c{{0, 0}, {0, 1}, 1e-3, 2e-4, 0.5};
  CHECK(crack_opening(0.49, c) == 0.0);
  CHECK(crack_opening(0.5, c) == 2e-4);
  // gradient across the crack (x): conductance only along y
  const Eigen::Matrix2d K = crack_permeability(0.8, Eigen::Vector2d(-500.0, 0.0), c);
  CHECK(K(0, 0) == doctest::Approx(0.0));
  CHECK(K(1, 1) == doctest::Approx(0.8 * 4e-8 / 12.0));
  CHECK(K(0, 1) == doctest::Approx(0.0));
  const Eigen::Matrix2d diag = crack_permeability(0.8, Eigen::Vector2d(300.0, 300.0), c);
  CHECK(diag(0, 0) == doctest::Approx(0.5 * 0.8 * 4e-8 / 12.0));
  CHECK(diag(0, 1) == doctest::Approx(-0.5 * 0.8 * 4e-8 / 12.0));
  CHECK(crack_permeability(0.3, Eigen::Vector2d(1.0, 0.0), c).norm() == 0.0);
  CHECK(crack_permeability(1.0, Eigen::Vector2d(0.0, 0.0), c).norm() == 0.0);
  const auto p = MaterialParams::wetting(0.12);
  const Eigen::Matrix2d total = permeability_tensor(0.12, 0.8, Eigen::Vector2d(-500.0, 0.0), c, p);
  CHECK(total(0, 0) == doctest::Approx(constitutive::bulk_permeability(0.12, p)));
  CHECK(total(1, 1) == doctest::Approx(constitutive::bulk_permeability(0.12, p) + 0.8 * 4e-8 / 12.0));
}

TEST_CASE("combined field takes the pointwise maximum") {
  const double ell = 1e-3;
  auto m = Mesh::rectangle(0.02, 0.02, 140, 140);
  CrackSpec a{{0.01, 0.0}, {0.01, 0.02}, ell, 1e-4, 0.5};
  CrackSpec b{{0.0, 0.01}, {0.02, 0.01}, ell, 1e-4, 0.5};
  auto fields = regularize_cracks(m, {a, b});
  REQUIRE(fields.size() == 2);
  const auto phi = combined_phase_field(m, fields);
  CHECK((phi - fields[0].phi.cwiseMax(fields[1].phi)).cwiseAbs().maxCoeff() == 0.0);
  CHECK(combined_phase_field(m, {}).cwiseAbs().maxCoeff() == 0.0);
  const auto data = crack_quadrature_data(m, fields);
  CHECK(data.permeability.size() == m.num_elements());
}

}  // TEST_SUITE
