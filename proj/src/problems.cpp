#include "rskel/problems.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace rskel {

namespace {
constexpr double kPi = std::numbers::pi;
}

std::vector<Vec2> circle_knots(const Vec2& center, double radius, int count) {
  std::vector<Vec2> k(count);
  for (int i = 0; i < count; ++i) {
    const double t = 2.0 * kPi * i / count;
    k[i] = center + radius * Vec2(std::cos(t), std::sin(t));
  }
  return k;
}

std::vector<Vec2> starfish_knots(const StarfishParams& p, double scale, const Vec2& shift) {
  std::vector<Vec2> k(p.knots);
  for (int i = 0; i < p.knots; ++i) {
    const double t = 2.0 * kPi * i / p.knots;
    const double r = scale * (1.0 + p.amplitude * std::cos(p.arms * t));
    k[i] = shift + r * Vec2(std::cos(t), std::sin(t));
  }
  return k;
}

Vec2 hole_path(const StarfishParams& p, double theta) {
  const double r = p.path_scale * (1.0 + p.amplitude * std::cos(p.arms * theta));
  return r * Vec2(std::cos(theta), std::sin(theta));
}

Boundary make_circle(int n_nodes, double radius, int knots) {
  return Boundary::build({{circle_knots(Vec2::Zero(), radius, knots), n_nodes, Orientation::outer}});
}

Boundary make_annulus(int n_nodes, double r_inner, double r_outer, int knots) {
  const int n_in = n_nodes / 3;
  knots = std::min(knots, n_in);
  return Boundary::build(
      {{circle_knots(Vec2::Zero(), r_outer, knots), n_nodes - n_in, Orientation::outer},
       {circle_knots(Vec2::Zero(), r_inner, knots), n_in, Orientation::hole}});
}

int starfish_hole_nodes(int n_nodes, const StarfishParams& p) {
  return static_cast<int>(std::lround(n_nodes * p.hole_fraction));
}

Boundary make_starfish(int n_nodes, const std::vector<double>& thetas, const StarfishParams& p) {
  const int n_hole = starfish_hole_nodes(n_nodes, p);
  const int n_outer = n_nodes - n_hole * static_cast<int>(thetas.size());
  if (n_outer < p.knots) throw GeometryError("too few nodes left for the outer curve");
  std::vector<CurveSpec> specs;
  specs.push_back({starfish_knots(p, 1.0, Vec2::Zero()), n_outer, Orientation::outer});
  for (double th : thetas) {
    specs.push_back({starfish_knots(p, p.hole_scale, hole_path(p, th)), n_hole, Orientation::hole});
  }
  return Boundary::build(specs);
}

MoveHole move_along_path(const StarfishParams& p, int curve_id, double from, double to) {
  return MoveHole{curve_id, hole_path(p, to) - hole_path(p, from)};
}

DataPreset parse_data_preset(const std::string& name) {
  if (name == "zero") return DataPreset::zero;
  if (name == "neumann_source_sink") return DataPreset::neumann_source_sink;
  if (name == "dirichlet_source_sink") return DataPreset::dirichlet_source_sink;
  if (name == "annulus_couette") return DataPreset::annulus_couette;
  if (name == "harmonic_x") return DataPreset::harmonic_x;
  if (name == "constants") return DataPreset::constants;
  throw std::invalid_argument("unknown boundary data preset '" + name + "'");
}

std::string to_string(DataPreset d) {
  switch (d) {
    case DataPreset::zero: return "zero";
    case DataPreset::neumann_source_sink: return "neumann_source_sink";
    case DataPreset::dirichlet_source_sink: return "dirichlet_source_sink";
    case DataPreset::annulus_couette: return "annulus_couette";
    case DataPreset::harmonic_x: return "harmonic_x";
    case DataPreset::constants: return "constants";
  }
  return "unknown";
}

Vec2 couette_velocity(const Vec2& x, double r_inner, double r_outer) {
  // A r_o + B / r_o = r_o (unit angular speed), A r_i + B / r_i = 0.
  const double b = -r_inner * r_inner * r_outer * r_outer /
                   (r_outer * r_outer - r_inner * r_inner);
  const double a = 1.0 - b / (r_outer * r_outer);
  const double r = x.norm();
  const double ut = a * r + b / r;
  return ut / r * Vec2(-x.y(), x.x());
}

Vector boundary_data(const SystemSpec& spec, const Boundary& b, const DataSpec& d) {
  const int per = spec.dof_per_node;
  const bool stokes = spec.pde == Pde::stokes_dirichlet;
  Vector f = Vector::Zero(spec.num_dofs(b));
  const auto& curve = b.curve_of_node();
  const auto& n = b.normals();
  const auto& x = b.points();
  auto need_holes = [&](int k) {
    if (b.num_holes() < k) {
      throw std::invalid_argument(to_string(d.preset) + " data needs " + std::to_string(k) +
                                  " holes");
    }
  };
  switch (d.preset) {
    case DataPreset::zero:
      break;
    case DataPreset::neumann_source_sink:
      if (stokes) throw std::invalid_argument("neumann_source_sink is Laplace data");
      need_holes(2);
      for (int k = 0; k < b.num_nodes(); ++k) f[k] = curve[k] == 1 ? 1.0 : curve[k] == 2 ? -1.0 : 0.0;
      break;
    case DataPreset::dirichlet_source_sink:
      if (!stokes) throw std::invalid_argument("dirichlet_source_sink is Stokes data");
      need_holes(2);
      for (int k = 0; k < b.num_nodes(); ++k) {
        Vec2 v = Vec2::Zero();
        if (curve[k] == 0) v = Vec2(1.0, 0.0);
        if (curve[k] == 1) v = n[k];
        if (curve[k] == 2) v = -n[k];
        f.segment<2>(2 * k) = v;
      }
      break;
    case DataPreset::annulus_couette: {
      if (!stokes) throw std::invalid_argument("annulus_couette is Stokes data");
      for (int k = 0; k < b.num_nodes(); ++k) f.segment<2>(2 * k) = couette_velocity(x[k]);
      break;
    }
    case DataPreset::harmonic_x:
      if (stokes) throw std::invalid_argument("harmonic_x is Laplace data");
      for (int k = 0; k < b.num_nodes(); ++k) f[k] = n[k].x();
      break;
    case DataPreset::constants:
      if (static_cast<int>(d.per_curve.size()) != b.num_curves()) {
        throw std::invalid_argument("constants data needs one entry per curve");
      }
      for (int k = 0; k < b.num_nodes(); ++k) {
        const auto& v = d.per_curve[curve[k]];
        if (static_cast<int>(v.size()) != per) {
          throw std::invalid_argument("constants entry has wrong component count");
        }
        for (int c = 0; c < per; ++c) f[k * per + c] = v[c];
      }
      break;
  }
  return f;
}

std::vector<Vec2> interior_grid(const Boundary& b, int n, double margin) {
  const auto& outer = b.curves().front().points;
  Vec2 lo = outer.front(), hi = lo;
  for (const Vec2& p : outer) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  std::vector<Vec2> out;
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const Vec2 p(lo.x() + (hi.x() - lo.x()) * (i + 0.5) / n,
                   lo.y() + (hi.y() - lo.y()) * (j + 0.5) / n);
      if (point_in_domain(b, p) && distance_to_boundary(b, p) > margin) out.push_back(p);
    }
  }
  return out;
}

}  // namespace rskel
