#include <cmath>

#include <doctest.h>

#include "carbsim/constitutive.hpp"
#include "carbsim/observables.hpp"

using namespace carbsim;

TEST_SUITE("observables") {

TEST_CASE("relative mass loss") {
  Eigen::VectorXd v(3), th0(3), s0(3);
  v << 1.0, 2.0, 1.0;
  th0.setConstant(0.1);
  s0.setConstant(0.8);
  CHECK(relative_mass_loss(th0, s0, th0, s0, v) == 0.0);
  Eigen::VectorXd s = s0 * 0.75;
  CHECK(relative_mass_loss(th0, s, th0, s0, v) == doctest::Approx(25.0));
  // porosity growth at constant S counts as a gain
  CHECK(relative_mass_loss(th0 * 1.1, s0, th0, s0, v) == doctest::Approx(-10.0));
  CHECK_THROWS_AS(relative_mass_loss(th0, s0, th0, Eigen::VectorXd::Zero(3), v), std::invalid_argument);
}

TEST_CASE("front depth interpolates in log concentration") {
  auto m = Mesh::rectangle(0.01, 0.001, 10, 1, {"exposed", "far", "side", "side"});
  const double c0 = 1.2e-4;
  Eigen::VectorXd ch(static_cast<Eigen::Index>(m.num_nodes()));
  // exponential profile c0 exp(x/a - b): log-linear, so interpolation is exact
  const double a = 1e-3, xf = 3.4e-3, thr = 0.5 * c0;
  for (std::size_t i = 0; i < m.num_nodes(); ++i)
    ch[static_cast<Eigen::Index>(i)] = thr * std::exp((m.node(i).x - xf) / a);
  CHECK(front_depth(m, ch, "exposed", thr) == doctest::Approx(xf).epsilon(1e-12));
  CHECK(front_depth(m, Eigen::VectorXd::Constant(ch.size(), c0), "exposed", thr) == 0.0);
  CHECK(front_depth(m, Eigen::VectorXd::Zero(ch.size()), "exposed", thr) == doctest::Approx(0.01));
  CHECK_THROWS_AS(front_depth(m, ch, "nope", thr), std::invalid_argument);
  const double ph9 = constitutive::caoh2_at_ph(9.0);
  for (std::size_t i = 0; i < m.num_nodes(); ++i)
    ch[static_cast<Eigen::Index>(i)] = ph9 * std::exp((m.node(i).x - 2e-3) / a);
  CHECK(carbonation_depth(m, ch, "exposed") == doctest::Approx(2e-3).epsilon(1e-9));
}

TEST_CASE("pH field and onset interpolation") {
  Eigen::VectorXd c(2);
  c << 1.2e-4, 5e-9;
  const auto ph = ph_field(c);
  CHECK(ph[0] == doctest::Approx(14 + std::log10(0.24)));
  CHECK(ph[1] == doctest::Approx(9.0));
  CHECK(*corrosion_onset_time({0, 10, 20}, {12.0, 10.0, 8.0}, 9.0) == doctest::Approx(15.0));
  CHECK(*corrosion_onset_time({0, 10}, {8.5, 8.0}) == 0.0);
  CHECK_FALSE(corrosion_onset_time({0, 10}, {12.0, 11.0}).has_value());
  CHECK_THROWS_AS(corrosion_onset_time({0}, {1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("corrosion current switches on at depassivation") {
  const auto p = MaterialParams::wetting(0.15);
  CHECK(corrosion_current(9.5, 0.16, 0.8, p) == 0.0);
  CHECK(corrosion_current(9.0, 0.16, 0.8, p) == constitutive::corrosion_current_density(0.16, 0.8, p));
}

}  // TEST_SUITE
