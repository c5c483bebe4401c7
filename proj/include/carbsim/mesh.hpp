#pragma once

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace carbsim {

struct Point {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Point&) const = default;
};

double distance(Point a, Point b);
double distance_to_segment(Point p, Point a, Point b);

/// Interval of an axis meshed with a target element size.
struct AxisRefinement {
  double lo = 0.0;
  double hi = 0.0;
  double h = 0.0;
  bool operator==(const AxisRefinement&) const = default;
};

/// One coordinate axis of a structured grid. Element sizes grow geometrically
/// (ratio `grading`) away from refinement intervals up to `base_h`; `pinned`
/// coordinates are guaranteed to be grid lines.
struct AxisSpec {
  double length = 1.0;
  double base_h = 1.0;
  std::vector<AxisRefinement> refinements;
  std::vector<double> pinned;
  double grading = 1.2;
  bool operator==(const AxisSpec&) const = default;
};

std::vector<double> graded_axis(const AxisSpec& spec);
std::vector<double> uniform_axis(double length, int n);

struct BoundaryMarkers {
  std::string left = "left";
  std::string right = "right";
  std::string bottom = "bottom";
  std::string top = "top";
};

struct Facet {
  std::array<int, 2> nodes;
  int element;
  std::string marker;
};

/// Values of the bilinear shape functions at one quadrature point.
/// `weight` already includes the Jacobian determinant.
struct QuadraturePoint {
  double weight;
  Point x;
  std::array<double, 4> N;
  std::array<std::array<double, 2>, 4> dN;
};

/// 2x2 Gauss points, or the four element corners (trapezoidal rule).
enum class QuadratureRule { gauss, nodal };

struct ElementExtent {
  double hx;
  double hy;
};

/// Bilinear quadrilateral mesh. Immutable once built apart from facet relabelling.
class Mesh {
 public:
  using Quadrature = std::array<QuadraturePoint, 4>;

  static Mesh rectangle(double width, double height, int nx, int ny,
                        const BoundaryMarkers& markers = {});
  static Mesh tensor(const std::vector<double>& xs, const std::vector<double>& ys,
                     const BoundaryMarkers& markers = {});

  /// Copy of the mesh without the elements whose centroid satisfies `remove`.
  /// New boundary facets inside the bounding box get `marker`.
  Mesh without_elements(const std::function<bool(Point)>& remove, const std::string& marker) const;

  /// Re-marks boundary facets; `relabel` returns the new marker or nullopt to keep it.
  void relabel_facets(
      const std::function<std::optional<std::string>(Point midpoint, const std::string& marker)>& relabel);

  std::size_t num_nodes() const { return nodes_.size(); }
  std::size_t num_elements() const { return elements_.size(); }
  const std::vector<Point>& nodes() const { return nodes_; }
  const Point& node(std::size_t i) const { return nodes_[i]; }
  const std::vector<std::array<int, 4>>& elements() const { return elements_; }
  const std::array<int, 4>& element(std::size_t e) const { return elements_[e]; }
  const std::vector<Facet>& facets() const { return facets_; }
  const Quadrature& quadrature(std::size_t e) const { return quadrature_[e]; }
  /// Corner points in element node order; N is the identity there.
  const Quadrature& nodal_quadrature(std::size_t e) const { return nodal_quadrature_[e]; }
  const Quadrature& quadrature(std::size_t e, QuadratureRule rule) const {
    return rule == QuadratureRule::gauss ? quadrature_[e] : nodal_quadrature_[e];
  }

  double width() const { return width_; }
  double height() const { return height_; }
  ElementExtent element_extent(std::size_t e) const;
  /// Characteristic element size H_e: the longer side of the element.
  double element_size(std::size_t e) const;
  Point centroid(std::size_t e) const;

  bool has_marker(const std::string& marker) const;
  std::vector<std::string> markers() const;
  /// Sorted unique nodes on facets with the given marker.
  std::vector<int> marker_nodes(const std::string& marker) const;
  std::vector<const Facet*> marker_facets(const std::string& marker) const;
  int nearest_node(Point p) const;

  /// Element containing p with the shape-function values there, if any.
  struct Location {
    int element;
    std::array<double, 4> N;
  };
  std::optional<Location> locate(Point p) const;
  /// Field value at p; falls back to the nearest node outside the mesh.
  double interpolate(const Eigen::VectorXd& field, Point p) const;

 private:
  void finalize(const std::vector<Facet>* previous, const std::string& new_marker,
                const BoundaryMarkers& markers);

  std::vector<Point> nodes_;
  std::vector<std::array<int, 4>> elements_;
  std::vector<Facet> facets_;
  std::vector<Quadrature> quadrature_;
  std::vector<Quadrature> nodal_quadrature_;
  BoundaryMarkers outer_markers_;
  double width_ = 0.0;
  double height_ = 0.0;
};

/// A named nodal field with its unit, used for export.
struct NodalField {
  std::string name;
  std::string unit;
  Eigen::VectorXd values;
};

// Galerkin integrals with 2x2 Gauss quadrature.

double integrate(const Mesh& mesh, const Eigen::VectorXd& nodal);
/// Integrates f evaluated at every quadrature point.
double integrate(const Mesh& mesh,
                 const std::function<double(std::size_t e, const QuadraturePoint& qp)>& f);
double value_at(const Mesh& mesh, std::size_t e, const QuadraturePoint& qp,
                const Eigen::VectorXd& nodal);
Eigen::Vector2d gradient_at(const Mesh& mesh, std::size_t e, const QuadraturePoint& qp,
                            const Eigen::VectorXd& nodal);

Eigen::SparseMatrix<double> assemble_mass(const Mesh& mesh);
/// Row-sum lumped mass, i.e. the nodal control volumes.
Eigen::VectorXd lumped_mass(const Mesh& mesh);
/// Stiffness matrix of -div(A grad u) for a per-quadrature-point tensor coefficient.
Eigen::SparseMatrix<double> assemble_stiffness(
    const Mesh& mesh, const std::function<Eigen::Matrix2d(std::size_t e, std::size_t q)>& coefficient);
Eigen::SparseMatrix<double> assemble_stiffness(const Mesh& mesh, double coefficient = 1.0);

}  // namespace carbsim
