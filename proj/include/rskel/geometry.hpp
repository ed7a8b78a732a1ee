#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace rskel {

using Vec2 = Eigen::Vector2d;

enum class Orientation { outer, hole };

/// Closed curve given by cubic-spline knots. The curve is implicitly periodic:
/// the last knot connects back to the first.
struct CurveSpec {
  std::vector<Vec2> knots;
  int n_nodes = 0;
  Orientation orientation = Orientation::outer;
};

class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Natural periodic cubic spline through a closed knot sequence, parametrized
/// uniformly by knot index on [0, K).
class PeriodicSpline {
 public:
  explicit PeriodicSpline(std::vector<Vec2> knots);

  int num_knots() const { return static_cast<int>(knots_.size()); }
  Vec2 eval(double t) const;
  Vec2 derivative(double t) const;
  Vec2 second_derivative(double t) const;

 private:
  // Segment index and local coordinate in [0, 1).
  std::pair<int, double> locate(double t) const;

  std::vector<Vec2> knots_;
  std::vector<Vec2> moments_;  // second derivatives at the knots
};

struct Curve {
  int id = 0;
  CurveSpec spec;  // knots normalized to the orientation convention
  std::vector<Vec2> points;
  std::vector<Vec2> normals;  // unit, pointing out of the fluid domain
  std::vector<double> weights;
  std::vector<double> curvatures;
  Vec2 center = Vec2::Zero();  // interior point, holes only

  double arclength() const;
};

struct Perturbation;
struct PerturbationResult;

/// Multiply-connected boundary: curve 0 is the outer curve, the rest are
/// holes. Per-node data is also kept in flat arrays indexed by global node
/// number (curves are laid out contiguously in order).
class Boundary {
 public:
  Boundary() = default;

  static Boundary build(const std::vector<CurveSpec>& specs);

  const std::vector<Curve>& curves() const { return curves_; }
  int num_curves() const { return static_cast<int>(curves_.size()); }
  int num_holes() const { return num_curves() > 0 ? num_curves() - 1 : 0; }
  int num_nodes() const { return static_cast<int>(points_.size()); }

  const std::vector<Vec2>& points() const { return points_; }
  const std::vector<Vec2>& normals() const { return normals_; }
  const std::vector<double>& weights() const { return weights_; }
  const std::vector<double>& curvatures() const { return curvatures_; }
  /// Curve position (index into curves()) of each node.
  const std::vector<int>& curve_of_node() const { return curve_of_node_; }

  /// Global node range [first, last) of curve position `c`.
  std::pair<int, int> node_range(int c) const {
    return {offsets_[c], offsets_[c + 1]};
  }
  /// Curve position for a curve id, or -1.
  int curve_index(int id) const;
  std::vector<Vec2> hole_centers() const;

  /// Scalar DOFs of node `k` are k*dofs_per_node + c, c < dofs_per_node.
  std::vector<int> dofs_of_nodes(const std::vector<int>& nodes,
                                 int dofs_per_node) const;

  int next_curve_id() const { return next_id_; }

 private:
  friend PerturbationResult apply_perturbation(const Boundary&,
                                               const Perturbation&);
  void assemble();

  std::vector<Curve> curves_;
  std::vector<int> offsets_;
  std::vector<Vec2> points_;
  std::vector<Vec2> normals_;
  std::vector<double> weights_;
  std::vector<double> curvatures_;
  std::vector<int> curve_of_node_;
  int next_id_ = 0;
};

/// Builds a single curve (nodes, weights, normals, curvatures) from a spec.
Curve build_curve(const CurveSpec& spec, int id);

/// True iff x has winding number +-1 about the outer curve and 0 about every
/// hole. Points within 1e-12 of a curve are reported outside.
bool point_in_domain(const Boundary& b, const Vec2& x);

/// Smallest distance from x to any boundary node polyline segment.
double distance_to_boundary(const Boundary& b, const Vec2& x);

struct MoveHole {
  int curve_id;
  Vec2 translation;
};
struct AddHole {
  CurveSpec spec;
};
struct DeleteHole {
  int curve_id;
};
using Edit = std::variant<MoveHole, AddHole, DeleteHole>;

struct Perturbation {
  std::vector<Edit> edits;
};

struct PerturbationResult {
  Boundary boundary;
  /// Old global node -> new global node, -1 for nodes of edited or deleted
  /// curves.
  std::vector<int> old_to_new;
  /// Old node indices whose data no longer exists (moved or deleted holes).
  std::vector<int> removed_nodes;
  /// New node indices that did not exist before (moved or added holes).
  std::vector<int> inserted_nodes;

  bool empty() const { return removed_nodes.empty() && inserted_nodes.empty(); }
  /// DOFs of every edited, added or deleted hole. Moved holes count once.
  std::size_t modified_dof_count(const Boundary& before,
                                 int dofs_per_node) const;
};

/// Applies edits in order. Unmodified curves are copied bitwise. Throws
/// GeometryError if a hole leaves the outer curve or two curves intersect.
PerturbationResult apply_perturbation(const Boundary& b, const Perturbation& p);

/// Checks that every hole lies inside the outer curve and that all curves are
/// pairwise disjoint. Throws GeometryError with the offending distance.
void validate_layout(const Boundary& b);

}  // namespace rskel
