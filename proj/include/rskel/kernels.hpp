#pragma once

#include "rskel/geometry.hpp"

#include <Eigen/Core>

#include <span>
#include <vector>

namespace rskel {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Pde { laplace_neumann, stokes_dirichlet };

/// Selects the boundary integral equation. Both systems use the jump
/// coefficient -1/2; Stokes carries two scalar DOFs per node and is augmented
/// with Stokeslets and rotlets whenever the domain has holes.
struct SystemSpec {
  Pde pde = Pde::laplace_neumann;
  double jump_coefficient = -0.5;
  int dof_per_node = 1;
  bool augmented = false;

  static SystemSpec make(Pde pde, const Boundary& b);
  int num_dofs(const Boundary& b) const { return b.num_nodes() * dof_per_node; }
};

/// Entry (i, j) of the second-kind system matrix: jump * delta_ij plus the
/// weighted kernel and nullspace-completion terms. Laplace uses
/// (-1/2 I - D + N) with D the n(x) double layer and N mu = int mu; Stokes uses
/// (-1/2 I + D + N) with the stresslet D and N = n(x) (x) n(y).
double system_entry(const SystemSpec& spec, const Boundary& b, int row, int col);

/// Dense sub-block of the system matrix.
Matrix eval_block(const SystemSpec& spec, const Boundary& b,
                  std::span<const int> rows, std::span<const int> cols);

/// Dense system matrix over all DOFs (tests and small problems only).
Matrix eval_full(const SystemSpec& spec, const Boundary& b);

/// Interior evaluation operator rows: one row per target for Laplace, two
/// (velocity components) for Stokes. No jump and no nullspace terms. Throws
/// GeometryError for targets outside the domain.
Matrix eval_forward_block(const SystemSpec& spec, const Boundary& b,
                          std::span<const Vec2> targets, std::span<const int> cols);

/// Stokeslet/rotlet completion of the Stokes double layer. H has two
/// Stokeslet columns and one rotlet column per hole (unweighted point values);
/// Psi has the matching three nullspace functionals as weighted rows.
struct AugmentationData {
  Matrix H;    // [2N x 3p]
  Matrix Psi;  // [3p x 2N]
  std::vector<Vec2> hole_centers;

  int size() const { return static_cast<int>(H.cols()); }
};

AugmentationData build_augmentation(const Boundary& b);

/// H evaluated at arbitrary points (two rows per point).
Matrix completion_columns(const Boundary& b, std::span<const Vec2> points);

/// Discretized nullspace vectors of (-1/2 I + D + N) on a multiply connected
/// domain: columns e1, e2 and x^perp restricted to each hole.
Matrix stokes_nullspace(const Boundary& b);

struct ProxyNodes {
  std::vector<Vec2> points;
  std::vector<double> weights;
};

/// `count` equispaced points on a circle with trapezoid weights 2 pi r / count.
ProxyNodes proxy_nodes(const Vec2& center, double radius, int count);

/// Rows standing in for targets outside the proxy circle, acting on source
/// DOFs `cols`: potentials at the proxy points plus the nullspace functional.
Matrix proxy_outgoing(const SystemSpec& spec, const Boundary& b,
                      const ProxyNodes& proxy, std::span<const int> cols,
                      double scale);

/// Rows standing in for sources outside the proxy circle, acting on target
/// DOFs `cols` (already transposed into column form).
Matrix proxy_incoming(const SystemSpec& spec, const Boundary& b,
                      const ProxyNodes& proxy, std::span<const int> cols,
                      double scale);

/// Weighted net flux of Stokes Dirichlet data, sum_j w_j f_j . n_j, and the
/// weighted L1 magnitude sum_j w_j |f_j| it is compared against.
struct FluxReport {
  double flux = 0.0;
  double magnitude = 0.0;
  bool consistent(double rel_tol) const {
    return std::abs(flux) <= rel_tol * magnitude;
  }
};
FluxReport net_flux(const Boundary& b, const Vector& f);

}  // namespace rskel
