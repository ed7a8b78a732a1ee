#include "rskel/geometry.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace rskel {

namespace {

constexpr int kSamplesPerSegment = 8;

double signed_area(const std::vector<Vec2>& poly) {
  double a = 0.0;
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& p = poly[i];
    const Vec2& q = poly[(i + 1) % n];
    a += p.x() * q.y() - q.x() * p.y();
  }
  return 0.5 * a;
}

double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

bool segments_intersect(const Vec2& a, const Vec2& b, const Vec2& c,
                        const Vec2& d) {
  const double d1 = cross(b - a, c - a);
  const double d2 = cross(b - a, d - a);
  const double d3 = cross(d - c, a - c);
  const double d4 = cross(d - c, b - c);
  return ((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) &&
         ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0));
}

double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  double t = len2 > 0 ? (p - a).dot(ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return (a + t * ab - p).norm();
}

// Winding number of a closed polyline about x.
int winding_number(const std::vector<Vec2>& poly, const Vec2& x) {
  int wn = 0;
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[(i + 1) % n];
    if (a.y() <= x.y()) {
      if (b.y() > x.y() && cross(b - a, x - a) > 0) ++wn;
    } else {
      if (b.y() <= x.y() && cross(b - a, x - a) < 0) --wn;
    }
  }
  return wn;
}

double polyline_distance(const std::vector<Vec2>& poly, const Vec2& x) {
  double best = std::numeric_limits<double>::infinity();
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    best = std::min(best, point_segment_distance(x, poly[i], poly[(i + 1) % n]));
  }
  return best;
}

std::vector<Vec2> sample_curve(const std::vector<Vec2>& knots) {
  PeriodicSpline spline(knots);
  const int m = kSamplesPerSegment * spline.num_knots();
  std::vector<Vec2> out(m);
  for (int i = 0; i < m; ++i) {
    out[i] = spline.eval(static_cast<double>(i) / kSamplesPerSegment);
  }
  return out;
}

bool polylines_intersect(const std::vector<Vec2>& p, const std::vector<Vec2>& q) {
  const std::size_t n = p.size(), m = q.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      if (segments_intersect(p[i], p[(i + 1) % n], q[j], q[(j + 1) % m])) {
        return true;
      }
    }
  }
  return false;
}

double polylines_distance(const std::vector<Vec2>& p, const std::vector<Vec2>& q) {
  double best = std::numeric_limits<double>::infinity();
  for (const Vec2& x : p) best = std::min(best, polyline_distance(q, x));
  return best;
}

bool self_intersects(const std::vector<Vec2>& p) {
  const std::size_t n = p.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 2; j < n; ++j) {
      if (i == 0 && j == n - 1) continue;  // adjacent through closure
      if (segments_intersect(p[i], p[i + 1], p[j], p[(j + 1) % n])) return true;
    }
  }
  return false;
}

Vec2 polygon_centroid(const std::vector<Vec2>& poly) {
  double a = 0.0;
  Vec2 c = Vec2::Zero();
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& p = poly[i];
    const Vec2& q = poly[(i + 1) % n];
    const double w = p.x() * q.y() - q.x() * p.y();
    a += w;
    c += w * (p + q);
  }
  return c / (3.0 * a);
}

}  // namespace

PeriodicSpline::PeriodicSpline(std::vector<Vec2> knots) : knots_(std::move(knots)) {
  const int k = num_knots();
  if (k < 4) throw GeometryError("spline needs at least 4 knots");
  // Cyclic tridiagonal system M[i-1] + 4 M[i] + M[i+1] = 6 (P[i+1] - 2P[i] + P[i-1]).
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(k, k);
  Eigen::MatrixXd rhs(k, 2);
  for (int i = 0; i < k; ++i) {
    a(i, (i + k - 1) % k) += 1.0;
    a(i, i) += 4.0;
    a(i, (i + 1) % k) += 1.0;
    const Vec2 d = 6.0 * (knots_[(i + 1) % k] - 2.0 * knots_[i] + knots_[(i + k - 1) % k]);
    rhs(i, 0) = d.x();
    rhs(i, 1) = d.y();
  }
  const Eigen::MatrixXd m = a.partialPivLu().solve(rhs);
  moments_.resize(k);
  for (int i = 0; i < k; ++i) moments_[i] = Vec2(m(i, 0), m(i, 1));
}

std::pair<int, double> PeriodicSpline::locate(double t) const {
  const int k = num_knots();
  double s = std::fmod(t, static_cast<double>(k));
  if (s < 0) s += k;
  int seg = static_cast<int>(std::floor(s));
  if (seg >= k) seg = k - 1;
  return {seg, s - seg};
}

Vec2 PeriodicSpline::eval(double t) const {
  const auto [i, u] = locate(t);
  const int j = (i + 1) % num_knots();
  const double v = 1.0 - u;
  return v * knots_[i] + u * knots_[j] + ((v * v * v - v) / 6.0) * moments_[i] +
         ((u * u * u - u) / 6.0) * moments_[j];
}

Vec2 PeriodicSpline::derivative(double t) const {
  const auto [i, u] = locate(t);
  const int j = (i + 1) % num_knots();
  const double v = 1.0 - u;
  return knots_[j] - knots_[i] + ((1.0 - 3.0 * v * v) / 6.0) * moments_[i] +
         ((3.0 * u * u - 1.0) / 6.0) * moments_[j];
}

Vec2 PeriodicSpline::second_derivative(double t) const {
  const auto [i, u] = locate(t);
  const int j = (i + 1) % num_knots();
  return (1.0 - u) * moments_[i] + u * moments_[j];
}

double Curve::arclength() const {
  double s = 0.0;
  for (double w : weights) s += w;
  return s;
}

Curve build_curve(const CurveSpec& spec, int id) {
  if (spec.knots.size() < 4) {
    throw GeometryError("curve needs at least 4 knots, got " +
                        std::to_string(spec.knots.size()));
  }
  if (spec.n_nodes < static_cast<int>(spec.knots.size())) {
    throw GeometryError("n_nodes must be at least the knot count");
  }
  Curve c;
  c.id = id;
  c.spec = spec;
  // Outer curves run counterclockwise, holes clockwise.
  const double area = signed_area(spec.knots);
  const bool want_ccw = spec.orientation == Orientation::outer;
  if ((area > 0) != want_ccw) {
    std::reverse(c.spec.knots.begin() + 1, c.spec.knots.end());
  }
  if (self_intersects(sample_curve(c.spec.knots))) {
    throw GeometryError("curve " + std::to_string(id) + " is self-intersecting");
  }

  PeriodicSpline spline(c.spec.knots);
  const int n = spec.n_nodes;
  const double dt = static_cast<double>(spline.num_knots()) / n;
  c.points.resize(n);
  c.normals.resize(n);
  c.weights.resize(n);
  c.curvatures.resize(n);
  for (int i = 0; i < n; ++i) {
    const double t = i * dt;
    const Vec2 d1 = spline.derivative(t);
    const Vec2 d2 = spline.second_derivative(t);
    const double speed = d1.norm();
    const Vec2 tangent = d1 / speed;
    const Vec2 normal(tangent.y(), -tangent.x());
    c.points[i] = spline.eval(t);
    c.normals[i] = normal;
    c.weights[i] = speed * dt;
    c.curvatures[i] = -d2.dot(normal) / (speed * speed);
  }
  if (spec.orientation == Orientation::hole) {
    c.center = polygon_centroid(c.points);
    if (winding_number(c.points, c.center) == 0) {
      throw GeometryError("centroid of hole " + std::to_string(id) +
                          " is not inside the hole");
    }
  }
  return c;
}

Boundary Boundary::build(const std::vector<CurveSpec>& specs) {
  if (specs.empty()) throw GeometryError("boundary needs at least one curve");
  if (specs.front().orientation != Orientation::outer) {
    throw GeometryError("first curve must be the outer curve");
  }
  Boundary b;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (i > 0 && specs[i].orientation != Orientation::hole) {
      throw GeometryError("only the first curve may be an outer curve");
    }
    b.curves_.push_back(build_curve(specs[i], b.next_id_++));
  }
  b.assemble();
  validate_layout(b);
  return b;
}

void Boundary::assemble() {
  offsets_.assign(1, 0);
  points_.clear();
  normals_.clear();
  weights_.clear();
  curvatures_.clear();
  curve_of_node_.clear();
  for (std::size_t c = 0; c < curves_.size(); ++c) {
    const Curve& cv = curves_[c];
    points_.insert(points_.end(), cv.points.begin(), cv.points.end());
    normals_.insert(normals_.end(), cv.normals.begin(), cv.normals.end());
    weights_.insert(weights_.end(), cv.weights.begin(), cv.weights.end());
    curvatures_.insert(curvatures_.end(), cv.curvatures.begin(), cv.curvatures.end());
    curve_of_node_.insert(curve_of_node_.end(), cv.points.size(), static_cast<int>(c));
    offsets_.push_back(static_cast<int>(points_.size()));
  }
}

int Boundary::curve_index(int id) const {
  for (int c = 0; c < num_curves(); ++c) {
    if (curves_[c].id == id) return c;
  }
  return -1;
}

std::vector<Vec2> Boundary::hole_centers() const {
  std::vector<Vec2> out;
  for (int c = 1; c < num_curves(); ++c) out.push_back(curves_[c].center);
  return out;
}

std::vector<int> Boundary::dofs_of_nodes(const std::vector<int>& nodes,
                                         int dofs_per_node) const {
  std::vector<int> out;
  out.reserve(nodes.size() * dofs_per_node);
  for (int k : nodes) {
    for (int c = 0; c < dofs_per_node; ++c) out.push_back(k * dofs_per_node + c);
  }
  return out;
}

double distance_to_boundary(const Boundary& b, const Vec2& x) {
  double best = std::numeric_limits<double>::infinity();
  for (const Curve& c : b.curves()) best = std::min(best, polyline_distance(c.points, x));
  return best;
}

bool point_in_domain(const Boundary& b, const Vec2& x) {
  if (b.num_curves() == 0 || !x.allFinite()) return false;
  const auto& curves = b.curves();
  if (std::abs(winding_number(curves[0].points, x)) != 1) return false;
  for (int c = 1; c < b.num_curves(); ++c) {
    if (winding_number(curves[c].points, x) != 0) return false;
  }
  return distance_to_boundary(b, x) > 1e-12;
}

void validate_layout(const Boundary& b) {
  std::vector<std::vector<Vec2>> samples;
  for (const Curve& c : b.curves()) samples.push_back(sample_curve(c.spec.knots));
  for (int i = 1; i < b.num_curves(); ++i) {
    const bool crosses_outer = polylines_intersect(samples[0], samples[i]);
    if (crosses_outer || winding_number(samples[0], samples[i][0]) == 0) {
      std::ostringstream msg;
      msg << "hole " << b.curves()[i].id << " is not inside the outer curve"
          << " (distance " << polylines_distance(samples[i], samples[0]) << ")";
      throw GeometryError(msg.str());
    }
    for (int j = 1; j < i; ++j) {
      if (polylines_intersect(samples[i], samples[j]) ||
          winding_number(samples[i], samples[j][0]) != 0 ||
          winding_number(samples[j], samples[i][0]) != 0) {
        std::ostringstream msg;
        msg << "holes " << b.curves()[j].id << " and " << b.curves()[i].id
            << " overlap (distance "
            << polylines_distance(samples[i], samples[j]) << ")";
        throw GeometryError(msg.str());
      }
    }
  }
}

std::size_t PerturbationResult::modified_dof_count(const Boundary& before,
                                                   int dofs_per_node) const {
  // Moved holes appear in both lists; count those nodes once.
  std::size_t removed_kept = 0;
  const int n_old = before.num_nodes();
  std::vector<char> moved_curve(before.num_curves(), 0);
  for (const Curve& c : boundary.curves()) {
    const int old_c = before.curve_index(c.id);
    if (old_c >= 0) moved_curve[old_c] = 1;
  }
  for (int k : removed_nodes) {
    if (k < n_old && moved_curve[before.curve_of_node()[k]]) ++removed_kept;
  }
  return (removed_nodes.size() + inserted_nodes.size() - removed_kept) *
         static_cast<std::size_t>(dofs_per_node);
}

PerturbationResult apply_perturbation(const Boundary& b, const Perturbation& p) {
  std::vector<Curve> curves = b.curves();
  std::vector<char> modified(curves.size(), 0);  // by position in `curves`
  std::vector<int> source(curves.size());        // old position or -1
  for (std::size_t i = 0; i < curves.size(); ++i) source[i] = static_cast<int>(i);
  int next_id = b.next_curve_id();

  auto position_of = [&](int id) {
    for (std::size_t i = 0; i < curves.size(); ++i) {
      if (curves[i].id == id) return static_cast<int>(i);
    }
    throw GeometryError("no curve with id " + std::to_string(id));
  };

  for (const Edit& edit : p.edits) {
    if (const auto* mv = std::get_if<MoveHole>(&edit)) {
      const int pos = position_of(mv->curve_id);
      if (pos == 0) throw GeometryError("the outer curve cannot be moved");
      CurveSpec spec = curves[pos].spec;
      for (Vec2& k : spec.knots) k += mv->translation;
      curves[pos] = build_curve(spec, mv->curve_id);
      modified[pos] = 1;
    } else if (const auto* add = std::get_if<AddHole>(&edit)) {
      if (add->spec.orientation != Orientation::hole) {
        throw GeometryError("added curves must be holes");
      }
      curves.push_back(build_curve(add->spec, next_id++));
      modified.push_back(1);
      source.push_back(-1);
    } else if (const auto* del = std::get_if<DeleteHole>(&edit)) {
      const int pos = position_of(del->curve_id);
      if (pos == 0) throw GeometryError("the outer curve cannot be deleted");
      curves.erase(curves.begin() + pos);
      modified.erase(modified.begin() + pos);
      source.erase(source.begin() + pos);
    }
  }

  PerturbationResult result;
  Boundary& nb = result.boundary;
  nb.curves_ = std::move(curves);
  nb.next_id_ = next_id;
  nb.assemble();
  validate_layout(nb);

  result.old_to_new.assign(b.num_nodes(), -1);
  std::vector<char> survived(b.num_nodes(), 0);
  for (int c = 0; c < nb.num_curves(); ++c) {
    const auto [first, last] = nb.node_range(c);
    if (modified[c]) {
      for (int k = first; k < last; ++k) result.inserted_nodes.push_back(k);
      continue;
    }
    const auto [ofirst, olast] = b.node_range(source[c]);
    for (int k = 0; k < last - first; ++k) {
      result.old_to_new[ofirst + k] = first + k;
      survived[ofirst + k] = 1;
    }
  }
  for (int k = 0; k < b.num_nodes(); ++k) {
    if (!survived[k]) result.removed_nodes.push_back(k);
  }
  return result;
}

}  // namespace rskel
