#pragma once

#include "rskel/geometry.hpp"
#include "rskel/kernels.hpp"

#include <string>
#include <vector>

namespace rskel {

/// Five-armed star r(t) = 1 + amplitude cos(arms t), sampled at `knots`
/// spline knots. Holes are copies scaled by hole_scale whose centers travel
/// on the outer curve scaled by path_scale.
struct StarfishParams {
  int arms = 5;
  double amplitude = 0.15;
  int knots = 20;
  double hole_scale = 0.16;
  double path_scale = 0.6;
  /// Fraction of the nodes on each hole; the outer curve takes the rest.
  double hole_fraction = 1.0 / 6.0;
};

std::vector<Vec2> circle_knots(const Vec2& center, double radius, int count);
std::vector<Vec2> starfish_knots(const StarfishParams& p, double scale, const Vec2& shift);

/// Center of a hole at path parameter theta.
Vec2 hole_path(const StarfishParams& p, double theta);

Boundary make_circle(int n_nodes, double radius = 1.0, int knots = 64);
/// Concentric circles; the outer one gets 2/3 of the nodes. The knot count is
/// capped by the inner node count.
Boundary make_annulus(int n_nodes, double r_inner = 0.5, double r_outer = 1.0, int knots = 256);
Boundary make_starfish(int n_nodes, const std::vector<double>& thetas,
                       const StarfishParams& p = {});
/// Nodes on each hole for a starfish problem of n_nodes total.
int starfish_hole_nodes(int n_nodes, const StarfishParams& p);

/// Edit moving hole `curve_id` from path parameter `from` to `to`.
MoveHole move_along_path(const StarfishParams& p, int curve_id, double from, double to);

enum class DataPreset {
  zero,
  neumann_source_sink,    // 0 on the outer curve, +1 / -1 on holes 1 / 2
  dirichlet_source_sink,  // (1, 0) outer, n on hole 1, -n on hole 2
  annulus_couette,        // rigid outer rotation, fixed inner circle
  harmonic_x,             // Neumann data of u = x_1
  constants               // one value (Laplace) or vector (Stokes) per curve
};

DataPreset parse_data_preset(const std::string& name);
std::string to_string(DataPreset d);

struct DataSpec {
  DataPreset preset = DataPreset::zero;
  std::vector<std::vector<double>> per_curve;  // for DataPreset::constants
};

Vector boundary_data(const SystemSpec& spec, const Boundary& b, const DataSpec& d);

/// Exact Couette velocity for the default annulus: u_theta = A r + B / r with
/// u_theta(1) = 1 and u_theta(1/2) = 0.
Vec2 couette_velocity(const Vec2& x, double r_inner = 0.5, double r_outer = 1.0);

/// Points of an n x n lattice over the bounding box of the outer curve that
/// lie in the domain at least `margin` away from the boundary.
std::vector<Vec2> interior_grid(const Boundary& b, int n, double margin);

}  // namespace rskel
