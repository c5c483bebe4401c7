#include "carbsim/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>

namespace carbsim {

double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

double distance_to_segment(Point p, Point a, Point b) {
  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  if (len2 == 0.0) return distance(p, a);
  const double t = std::clamp(((p.x - a.x) * dx + (p.y - a.y) * dy) / len2, 0.0, 1.0);
  return distance(p, Point{a.x + t * dx, a.y + t * dy});
}

std::vector<double> uniform_axis(double length, int n) {
  if (!(length > 0.0) || n < 1) throw std::invalid_argument("uniform_axis: need positive length and n >= 1");
  std::vector<double> xs(static_cast<std::size_t>(n) + 1);
  for (int i = 0; i <= n; ++i) xs[static_cast<std::size_t>(i)] = length * i / n;
  xs.back() = length;
  return xs;
}

std::vector<double> graded_axis(const AxisSpec& spec) {
  if (!(spec.length > 0.0) || !(spec.base_h > 0.0))
    throw std::invalid_argument("graded_axis: length and base size must be positive");
  if (!(spec.grading >= 1.0)) throw std::invalid_argument("graded_axis: grading must be >= 1");
  for (const auto& r : spec.refinements) {
    if (!(r.h > 0.0) || r.hi < r.lo) throw std::invalid_argument("graded_axis: invalid refinement interval");
  }

  const auto target = [&](double x) {
    double h = spec.base_h;
    for (const auto& r : spec.refinements) {
      const double d = x < r.lo ? r.lo - x : (x > r.hi ? x - r.hi : 0.0);
      h = std::min(h, r.h + (spec.grading - 1.0) * d);
    }
    return h;
  };

  std::vector<double> breaks{0.0, spec.length};
  for (double p : spec.pinned) breaks.push_back(p);
  for (const auto& r : spec.refinements) {
    breaks.push_back(r.lo);
    breaks.push_back(r.hi);
  }
  std::erase_if(breaks, [&](double b) { return b < 0.0 || b > spec.length; });
  std::sort(breaks.begin(), breaks.end());
  const double tol = 1e-12 * spec.length;
  breaks.erase(std::unique(breaks.begin(), breaks.end(), [&](double a, double b) { return b - a < tol; }),
               breaks.end());
  breaks.back() = spec.length;

  std::vector<double> xs{0.0};
  constexpr int kSamples = 4000;
  for (std::size_t s = 0; s + 1 < breaks.size(); ++s) {
    const double a = breaks[s];
    const double b = breaks[s + 1];
    // Equidistribute the cell count density 1/h(x) over [a, b].
    std::vector<double> cumulative(kSamples + 1, 0.0);
    const double dx = (b - a) / kSamples;
    for (int i = 0; i < kSamples; ++i) {
      const double xm = a + (i + 0.5) * dx;
      cumulative[static_cast<std::size_t>(i) + 1] = cumulative[static_cast<std::size_t>(i)] + dx / target(xm);
    }
    const double total = cumulative.back();
    const int n = std::max(1, static_cast<int>(std::ceil(total - 1e-9)));
    std::size_t j = 0;
    for (int k = 1; k < n; ++k) {
      const double level = total * k / n;
      while (cumulative[j + 1] < level) ++j;
      const double frac = (level - cumulative[j]) / (cumulative[j + 1] - cumulative[j]);
      xs.push_back(a + (static_cast<double>(j) + frac) * dx);
    }
    xs.push_back(b);
  }
  return xs;
}

Mesh Mesh::rectangle(double width, double height, int nx, int ny, const BoundaryMarkers& markers) {
  if (!(width > 0.0) || !(height > 0.0)) throw std::invalid_argument("mesh: dimensions must be positive");
  if (nx < 1 || ny < 1) throw std::invalid_argument("mesh: element counts must be >= 1");
  return tensor(uniform_axis(width, nx), uniform_axis(height, ny), markers);
}

Mesh Mesh::tensor(const std::vector<double>& xs, const std::vector<double>& ys, const BoundaryMarkers& markers) {
  if (xs.size() < 2 || ys.size() < 2) throw std::invalid_argument("mesh: need at least one element per direction");
  for (std::size_t i = 1; i < xs.size(); ++i)
    if (!(xs[i] > xs[i - 1])) throw std::invalid_argument("mesh: x coordinates must increase");
  for (std::size_t j = 1; j < ys.size(); ++j)
    if (!(ys[j] > ys[j - 1])) throw std::invalid_argument("mesh: y coordinates must increase");
  if (xs.front() != 0.0 || ys.front() != 0.0) throw std::invalid_argument("mesh: axes must start at 0");

  Mesh m;
  m.width_ = xs.back();
  m.height_ = ys.back();
  const int nx = static_cast<int>(xs.size()) - 1;
  const int ny = static_cast<int>(ys.size()) - 1;
  m.nodes_.reserve(xs.size() * ys.size());
  for (double y : ys)
    for (double x : xs) m.nodes_.push_back({x, y});
  const auto id = [&](int i, int j) { return j * (nx + 1) + i; };
  m.elements_.reserve(static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny));
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i)
      m.elements_.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)});
  m.finalize(nullptr, {}, markers);
  return m;
}

Mesh Mesh::without_elements(const std::function<bool(Point)>& remove, const std::string& marker) const {
  Mesh m;
  m.width_ = width_;
  m.height_ = height_;
  std::vector<int> remap(nodes_.size(), -1);
  for (std::size_t e = 0; e < elements_.size(); ++e) {
    if (remove(centroid(e))) continue;
    std::array<int, 4> conn{};
    for (int a = 0; a < 4; ++a) {
      const auto old = static_cast<std::size_t>(elements_[e][static_cast<std::size_t>(a)]);
      if (remap[old] < 0) {
        remap[old] = static_cast<int>(m.nodes_.size());
        m.nodes_.push_back(nodes_[old]);
      }
      conn[static_cast<std::size_t>(a)] = remap[old];
    }
    m.elements_.push_back(conn);
  }
  if (m.elements_.empty()) throw std::invalid_argument("mesh: element removal left no elements");
  // Carry existing facet markers over in the new numbering.
  std::vector<Facet> previous;
  for (const auto& f : facets_) {
    const int a = remap[static_cast<std::size_t>(f.nodes[0])];
    const int b = remap[static_cast<std::size_t>(f.nodes[1])];
    if (a >= 0 && b >= 0) previous.push_back({{a, b}, -1, f.marker});
  }
  m.finalize(&previous, marker, outer_markers_);
  return m;
}

void Mesh::finalize(const std::vector<Facet>* previous, const std::string& new_marker,
                    const BoundaryMarkers& markers) {
  outer_markers_ = markers;

  const double g = 1.0 / std::sqrt(3.0);
  const std::array<std::array<double, 2>, 4> gauss{{{-g, -g}, {g, -g}, {g, g}, {-g, g}}};
  const std::array<std::array<double, 2>, 4> corners{{{-1, -1}, {1, -1}, {1, 1}, {-1, 1}}};
  auto fill = [&](std::vector<Quadrature>& out, const std::array<std::array<double, 2>, 4>& ref) {
    out.resize(elements_.size());
    for (std::size_t e = 0; e < elements_.size(); ++e) {
      const auto& conn = elements_[e];
      for (std::size_t q = 0; q < 4; ++q) {
        const double xi = ref[q][0];
        const double eta = ref[q][1];
        const std::array<double, 4> N{(1 - xi) * (1 - eta) / 4, (1 + xi) * (1 - eta) / 4,
                                      (1 + xi) * (1 + eta) / 4, (1 - xi) * (1 + eta) / 4};
        const std::array<double, 4> dxi{-(1 - eta) / 4, (1 - eta) / 4, (1 + eta) / 4, -(1 + eta) / 4};
        const std::array<double, 4> deta{-(1 - xi) / 4, -(1 + xi) / 4, (1 + xi) / 4, (1 - xi) / 4};
        double j11 = 0, j12 = 0, j21 = 0, j22 = 0;
        Point x{};
        for (std::size_t a = 0; a < 4; ++a) {
          const Point& p = nodes_[static_cast<std::size_t>(conn[a])];
          j11 += dxi[a] * p.x;
          j12 += dxi[a] * p.y;
          j21 += deta[a] * p.x;
          j22 += deta[a] * p.y;
          x.x += N[a] * p.x;
          x.y += N[a] * p.y;
        }
        const double det = j11 * j22 - j12 * j21;
        if (!(det > 0.0)) throw std::invalid_argument("mesh: non-positive Jacobian in element " + std::to_string(e));
        QuadraturePoint& qp = out[e][q];
        qp.weight = det;  // both rules have unit weights on the reference square
        qp.x = x;
        qp.N = N;
        for (std::size_t a = 0; a < 4; ++a) {
          qp.dN[a][0] = (j22 * dxi[a] - j12 * deta[a]) / det;
          qp.dN[a][1] = (-j21 * dxi[a] + j11 * deta[a]) / det;
        }
      }
    }
  };
  fill(quadrature_, gauss);
  fill(nodal_quadrature_, corners);

  // Boundary facets are the element edges used exactly once.
  std::map<std::pair<int, int>, std::pair<int, Facet>> edges;
  for (std::size_t e = 0; e < elements_.size(); ++e) {
    for (int a = 0; a < 4; ++a) {
      const int n0 = elements_[e][static_cast<std::size_t>(a)];
      const int n1 = elements_[e][static_cast<std::size_t>((a + 1) % 4)];
      auto key = std::minmax(n0, n1);
      auto [it, inserted] = edges.try_emplace({key.first, key.second}, 0, Facet{{n0, n1}, static_cast<int>(e), {}});
      ++it->second.first;
    }
  }
  std::map<std::pair<int, int>, std::string> old_markers;
  if (previous) {
    for (const auto& f : *previous) {
      auto key = std::minmax(f.nodes[0], f.nodes[1]);
      old_markers[{key.first, key.second}] = f.marker;
    }
  }
  const double tol = 1e-10 * std::max(width_, height_);
  facets_.clear();
  for (auto& [key, entry] : edges) {
    if (entry.first != 1) continue;
    Facet f = entry.second;
    const Point& a = nodes_[static_cast<std::size_t>(f.nodes[0])];
    const Point& b = nodes_[static_cast<std::size_t>(f.nodes[1])];
    if (std::abs(a.x) < tol && std::abs(b.x) < tol) {
      f.marker = markers.left;
    } else if (std::abs(a.x - width_) < tol && std::abs(b.x - width_) < tol) {
      f.marker = markers.right;
    } else if (std::abs(a.y) < tol && std::abs(b.y) < tol) {
      f.marker = markers.bottom;
    } else if (std::abs(a.y - height_) < tol && std::abs(b.y - height_) < tol) {
      f.marker = markers.top;
    } else if (auto it = old_markers.find(key); it != old_markers.end()) {
      f.marker = it->second;
    } else {
      f.marker = new_marker;
    }
    if (f.marker.empty()) throw std::invalid_argument("mesh: boundary facet without marker");
    facets_.push_back(std::move(f));
  }
}

void Mesh::relabel_facets(
    const std::function<std::optional<std::string>(Point midpoint, const std::string& marker)>& relabel) {
  for (auto& f : facets_) {
    const Point& a = nodes_[static_cast<std::size_t>(f.nodes[0])];
    const Point& b = nodes_[static_cast<std::size_t>(f.nodes[1])];
    if (auto m = relabel({0.5 * (a.x + b.x), 0.5 * (a.y + b.y)}, f.marker)) f.marker = *m;
  }
}

ElementExtent Mesh::element_extent(std::size_t e) const {
  double xmin = std::numeric_limits<double>::max(), xmax = -xmin, ymin = xmin, ymax = -xmin;
  for (int n : elements_[e]) {
    const Point& p = nodes_[static_cast<std::size_t>(n)];
    xmin = std::min(xmin, p.x);
    xmax = std::max(xmax, p.x);
    ymin = std::min(ymin, p.y);
    ymax = std::max(ymax, p.y);
  }
  return {xmax - xmin, ymax - ymin};
}

double Mesh::element_size(std::size_t e) const {
  const auto ext = element_extent(e);
  return std::max(ext.hx, ext.hy);
}

Point Mesh::centroid(std::size_t e) const {
  Point c{};
  for (int n : elements_[e]) {
    c.x += 0.25 * nodes_[static_cast<std::size_t>(n)].x;
    c.y += 0.25 * nodes_[static_cast<std::size_t>(n)].y;
  }
  return c;
}

bool Mesh::has_marker(const std::string& marker) const {
  return std::any_of(facets_.begin(), facets_.end(), [&](const Facet& f) { return f.marker == marker; });
}

std::vector<std::string> Mesh::markers() const {
  std::set<std::string> s;
  for (const auto& f : facets_) s.insert(f.marker);
  return {s.begin(), s.end()};
}

std::vector<int> Mesh::marker_nodes(const std::string& marker) const {
  std::set<int> s;
  for (const auto& f : facets_) {
    if (f.marker != marker) continue;
    s.insert(f.nodes[0]);
    s.insert(f.nodes[1]);
  }
  return {s.begin(), s.end()};
}

std::vector<const Facet*> Mesh::marker_facets(const std::string& marker) const {
  std::vector<const Facet*> out;
  for (const auto& f : facets_)
    if (f.marker == marker) out.push_back(&f);
  return out;
}

int Mesh::nearest_node(Point p) const {
  int best = 0;
  double best_d = std::numeric_limits<double>::max();
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const double d = distance(p, nodes_[i]);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(i);
    }
  }
  return best;
}

std::optional<Mesh::Location> Mesh::locate(Point p) const {
  const double tol = 1e-12 * std::max(width_, height_);
  for (std::size_t e = 0; e < elements_.size(); ++e) {
    const auto& conn = elements_[e];
    double xmin = std::numeric_limits<double>::max(), xmax = -xmin, ymin = xmin, ymax = -xmin;
    for (int n : conn) {
      const Point& q = nodes_[static_cast<std::size_t>(n)];
      xmin = std::min(xmin, q.x);
      xmax = std::max(xmax, q.x);
      ymin = std::min(ymin, q.y);
      ymax = std::max(ymax, q.y);
    }
    if (p.x < xmin - tol || p.x > xmax + tol || p.y < ymin - tol || p.y > ymax + tol) continue;
    // Invert the bilinear map by Newton iteration.
    double xi = 0.0, eta = 0.0;
    std::array<double, 4> N{};
    for (int it = 0; it < 20; ++it) {
      N = {(1 - xi) * (1 - eta) / 4, (1 + xi) * (1 - eta) / 4, (1 + xi) * (1 + eta) / 4, (1 - xi) * (1 + eta) / 4};
      const std::array<double, 4> dxi{-(1 - eta) / 4, (1 - eta) / 4, (1 + eta) / 4, -(1 + eta) / 4};
      const std::array<double, 4> deta{-(1 - xi) / 4, -(1 + xi) / 4, (1 + xi) / 4, (1 - xi) / 4};
      double x = 0, y = 0, j11 = 0, j12 = 0, j21 = 0, j22 = 0;
      for (std::size_t a = 0; a < 4; ++a) {
        const Point& q = nodes_[static_cast<std::size_t>(conn[a])];
        x += N[a] * q.x;
        y += N[a] * q.y;
        j11 += dxi[a] * q.x;
        j21 += dxi[a] * q.y;
        j12 += deta[a] * q.x;
        j22 += deta[a] * q.y;
      }
      const double rx = p.x - x;
      const double ry = p.y - y;
      const double det = j11 * j22 - j12 * j21;
      const double dxi_step = (j22 * rx - j12 * ry) / det;
      const double deta_step = (-j21 * rx + j11 * ry) / det;
      xi += dxi_step;
      eta += deta_step;
      if (std::abs(dxi_step) + std::abs(deta_step) < 1e-14) break;
    }
    if (std::abs(xi) > 1.0 + 1e-9 || std::abs(eta) > 1.0 + 1e-9) continue;
    N = {(1 - xi) * (1 - eta) / 4, (1 + xi) * (1 - eta) / 4, (1 + xi) * (1 + eta) / 4, (1 - xi) * (1 + eta) / 4};
    return Location{static_cast<int>(e), N};
  }
  return std::nullopt;
}

double Mesh::interpolate(const Eigen::VectorXd& field, Point p) const {
  if (static_cast<std::size_t>(field.size()) != nodes_.size())
    throw std::invalid_argument("interpolate: field length does not match node count");
  if (auto loc = locate(p)) {
    double v = 0.0;
    for (std::size_t a = 0; a < 4; ++a) v += loc->N[a] * field[elements_[static_cast<std::size_t>(loc->element)][a]];
    return v;
  }
  return field[nearest_node(p)];
}

namespace {

void check_length(const Mesh& mesh, const Eigen::VectorXd& nodal) {
  if (static_cast<std::size_t>(nodal.size()) != mesh.num_nodes())
    throw std::invalid_argument("field length does not match node count");
}

}  // namespace

double value_at(const Mesh& mesh, std::size_t e, const QuadraturePoint& qp, const Eigen::VectorXd& nodal) {
  double v = 0.0;
  const auto& conn = mesh.element(e);
  for (std::size_t a = 0; a < 4; ++a) v += qp.N[a] * nodal[conn[a]];
  return v;
}

Eigen::Vector2d gradient_at(const Mesh& mesh, std::size_t e, const QuadraturePoint& qp,
                            const Eigen::VectorXd& nodal) {
  Eigen::Vector2d g = Eigen::Vector2d::Zero();
  const auto& conn = mesh.element(e);
  for (std::size_t a = 0; a < 4; ++a) {
    g[0] += qp.dN[a][0] * nodal[conn[a]];
    g[1] += qp.dN[a][1] * nodal[conn[a]];
  }
  return g;
}

double integrate(const Mesh& mesh, const Eigen::VectorXd& nodal) {
  check_length(mesh, nodal);
  return integrate(mesh, [&](std::size_t e, const QuadraturePoint& qp) { return value_at(mesh, e, qp, nodal); });
}

double integrate(const Mesh& mesh, const std::function<double(std::size_t e, const QuadraturePoint& qp)>& f) {
  double sum = 0.0;
  for (std::size_t e = 0; e < mesh.num_elements(); ++e)
    for (const auto& qp : mesh.quadrature(e)) sum += qp.weight * f(e, qp);
  return sum;
}

Eigen::SparseMatrix<double> assemble_mass(const Mesh& mesh) {
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(mesh.num_elements() * 16);
  for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
    const auto& conn = mesh.element(e);
    for (std::size_t a = 0; a < 4; ++a)
      for (std::size_t b = 0; b < 4; ++b) {
        double v = 0.0;
        for (const auto& qp : mesh.quadrature(e)) v += qp.weight * qp.N[a] * qp.N[b];
        trips.emplace_back(conn[a], conn[b], v);
      }
  }
  const auto n = static_cast<Eigen::Index>(mesh.num_nodes());
  Eigen::SparseMatrix<double> M(n, n);
  M.setFromTriplets(trips.begin(), trips.end());
  return M;
}

Eigen::VectorXd lumped_mass(const Mesh& mesh) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(mesh.num_nodes()));
  for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
    const auto& conn = mesh.element(e);
    for (const auto& qp : mesh.quadrature(e))
      for (std::size_t a = 0; a < 4; ++a) v[conn[a]] += qp.weight * qp.N[a];
  }
  return v;
}

Eigen::SparseMatrix<double> assemble_stiffness(
    const Mesh& mesh, const std::function<Eigen::Matrix2d(std::size_t e, std::size_t q)>& coefficient) {
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(mesh.num_elements() * 16);
  for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
    const auto& conn = mesh.element(e);
    double local[4][4] = {};
    for (std::size_t q = 0; q < 4; ++q) {
      const auto& qp = mesh.quadrature(e)[q];
      const Eigen::Matrix2d A = coefficient(e, q);
      for (std::size_t a = 0; a < 4; ++a) {
        const Eigen::Vector2d ga(qp.dN[a][0], qp.dN[a][1]);
        const Eigen::Vector2d Aga = A.transpose() * ga;
        for (std::size_t b = 0; b < 4; ++b)
          local[a][b] += qp.weight * (Aga[0] * qp.dN[b][0] + Aga[1] * qp.dN[b][1]);
      }
    }
    for (std::size_t a = 0; a < 4; ++a)
      for (std::size_t b = 0; b < 4; ++b) trips.emplace_back(conn[a], conn[b], local[a][b]);
  }
  const auto n = static_cast<Eigen::Index>(mesh.num_nodes());
  Eigen::SparseMatrix<double> K(n, n);
  K.setFromTriplets(trips.begin(), trips.end());
  return K;
}

Eigen::SparseMatrix<double> assemble_stiffness(const Mesh& mesh, double coefficient) {
  const Eigen::Matrix2d A = coefficient * Eigen::Matrix2d::Identity();
  return assemble_stiffness(mesh, [&](std::size_t, std::size_t) { return A; });
}

}  // namespace carbsim
