#include "carbsim/observables.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "carbsim/constitutive.hpp"

namespace carbsim {

double relative_mass_loss(const Eigen::VectorXd& theta, const Eigen::VectorXd& S, const Eigen::VectorXd& theta0,
                          const Eigen::VectorXd& S0, const Eigen::VectorXd& volumes) {
  const double w0 = volumes.dot(theta0.cwiseProduct(S0));
  if (!(w0 > 0.0)) throw std::invalid_argument("relative_mass_loss: zero initial water content");
  const double w = volumes.dot(theta.cwiseProduct(S));
  return 100.0 * (w0 - w) / w0;
}

namespace {

double distance_to_facets(Point p, const Mesh& mesh, const std::vector<const Facet*>& facets) {
  double d = std::numeric_limits<double>::infinity();
  for (const Facet* f : facets)
    d = std::min(d, distance_to_segment(p, mesh.node(static_cast<std::size_t>(f->nodes[0])),
                                        mesh.node(static_cast<std::size_t>(f->nodes[1]))));
  return d;
}

}  // namespace

double front_depth(const Mesh& mesh, const Eigen::VectorXd& c_ch, const std::string& exposed_marker,
                   double c_threshold) {
  if (!mesh.has_marker(exposed_marker)) throw std::invalid_argument("unknown marker '" + exposed_marker + "'");
  const auto facets = mesh.marker_facets(exposed_marker);
  const auto n = mesh.num_nodes();
  std::vector<char> below(n);
  bool any = false;
  for (std::size_t i = 0; i < n; ++i) {
    below[i] = c_ch[static_cast<Eigen::Index>(i)] <= c_threshold;
    any = any || below[i];
  }
  if (!any) return 0.0;

  // work in log concentration, where the front profile is closer to linear
  const double floor = 1e-300;
  auto lg = [&](double c) { return std::log(std::max(c, floor)); };
  const double lt = lg(c_threshold);
  double depth = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    if (below[i]) depth = std::max(depth, distance_to_facets(mesh.node(i), mesh, facets));
  for (const auto& el : mesh.elements()) {
    for (int k = 0; k < 4; ++k) {
      const auto a = static_cast<std::size_t>(el[k]);
      const auto b = static_cast<std::size_t>(el[(k + 1) % 4]);
      if (below[a] == below[b]) continue;
      const double la = lg(c_ch[static_cast<Eigen::Index>(a)]);
      const double lb = lg(c_ch[static_cast<Eigen::Index>(b)]);
      const double s = la == lb ? 0.5 : std::clamp((lt - la) / (lb - la), 0.0, 1.0);
      const Point pa = mesh.node(a), pb = mesh.node(b);
      const Point p{pa.x + s * (pb.x - pa.x), pa.y + s * (pb.y - pa.y)};
      depth = std::max(depth, distance_to_facets(p, mesh, facets));
    }
  }
  return depth;
}

double carbonation_depth(const Mesh& mesh, const Eigen::VectorXd& c_ch, const std::string& exposed_marker) {
  return front_depth(mesh, c_ch, exposed_marker, constitutive::caoh2_at_ph(constitutive::kDepassivationPh));
}

Eigen::VectorXd ph_field(const Eigen::VectorXd& c_ch) {
  return c_ch.unaryExpr([](double c) { return constitutive::ph_from_caoh2(c); });
}

std::optional<double> corrosion_onset_time(const std::vector<double>& times, const std::vector<double>& ph,
                                           double threshold) {
  if (times.size() != ph.size()) throw std::invalid_argument("corrosion_onset_time: series length mismatch");
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (ph[k] > threshold) continue;
    if (k == 0 || ph[k - 1] == ph[k]) return times[k];
    const double s = (ph[k - 1] - threshold) / (ph[k - 1] - ph[k]);
    return times[k - 1] + s * (times[k] - times[k - 1]);
  }
  return std::nullopt;
}

double corrosion_current(double ph, double theta, double S, const MaterialParams& params) {
  if (ph > constitutive::kDepassivationPh) return 0.0;
  return constitutive::corrosion_current_density(theta, S, params);
}

}  // namespace carbsim
