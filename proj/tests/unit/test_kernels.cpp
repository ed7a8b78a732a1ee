#include "rskel/kernels.hpp"
#include "rskel/problems.hpp"
#include "rskel/dense.hpp"
#include "rskel/tree.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <numeric>

using namespace rskel;

namespace {

constexpr double kPi = std::numbers::pi;

int node_at_angle(const Boundary& b, int curve, double angle) {
  const auto [lo, hi] = b.node_range(curve);
  for (int k = lo; k < hi; ++k) {
    const Vec2& x = b.points()[k];
    double d = std::atan2(x.y(), x.x()) - angle;
    d -= 2 * kPi * std::round(d / (2 * kPi));
    if (std::abs(d) < 1e-12) return k;
  }
  return -1;
}

}  // namespace

TEST(Kernels, StokesOffDiagonalTangentPairIsNullspaceTermOnly) {
  // Outer node at 60 degrees sees the inner node at 0 degrees along a line
  // orthogonal to the inner normal: 0.5 cos(60) - 0.25 = 0.
  const Boundary b = Boundary::build({{circle_knots(Vec2::Zero(), 1.0, 12), 60, Orientation::outer},
                                      {circle_knots(Vec2::Zero(), 0.5, 12), 24, Orientation::hole}});
  const SystemSpec spec = SystemSpec::make(Pde::stokes_dirichlet, b);
  const int i = node_at_angle(b, 0, kPi / 3), j = node_at_angle(b, 1, 0.0);
  ASSERT_GE(i, 0);
  ASSERT_GE(j, 0);
  const Vec2 &x = b.points()[i], &y = b.points()[j], &ni = b.normals()[i], &nj = b.normals()[j];
  ASSERT_LT(std::abs((x - y).dot(nj)), 1e-14);
  const double w = b.weights()[j];
  for (int a = 0; a < 2; ++a) {
    for (int c = 0; c < 2; ++c) {
      EXPECT_NEAR(system_entry(spec, b, 2 * i + a, 2 * j + c), w * ni[a] * nj[c], 1e-15);
    }
  }
}

TEST(Kernels, LaplaceSelfEntry) {
  const Boundary b = make_circle(64);
  const SystemSpec spec = SystemSpec::make(Pde::laplace_neumann, b);
  // Unit circle: curvature 1 with the normal pointing out of the disk.
  const double w = b.weights()[5], kappa = b.curvatures()[5];
  EXPECT_NEAR(kappa, 1.0, 2e-3);  // spline second derivative is O(h^2)
  EXPECT_NEAR(system_entry(spec, b, 5, 5), -0.5 + w * (kappa / (4 * kPi) + 1.0), 1e-15);
}

TEST(Kernels, FourNodeCircleMatchesScalarFormula) {
  const Boundary b = make_circle(4, 1.0, 4);
  const SystemSpec spec = SystemSpec::make(Pde::laplace_neumann, b);
  const Matrix a = eval_full(spec, b);
  ASSERT_EQ(a.rows(), 4);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      const Vec2 xi = b.points()[i], xj = b.points()[j], ni = b.normals()[i];
      const double w = b.weights()[j];
      double expect;
      if (i == j) {
        expect = -0.5 + w * (b.curvatures()[i] / (4 * kPi) + 1.0);
      } else {
        const Vec2 d = xi - xj;
        expect = w * (d.dot(ni) / (2 * kPi * d.squaredNorm()) + 1.0);
      }
      EXPECT_NEAR(a(i, j), expect, 1e-15) << i << "," << j;
    }
  }
}

TEST(Kernels, LaplaceSingleLayerAtUnitDistanceVanishes) {
  const Boundary b = make_circle(64, 2.0);
  const SystemSpec spec = SystemSpec::make(Pde::laplace_neumann, b);
  const std::vector<Vec2> targets{Vec2(1.0, 0.0)};
  const std::vector<int> cols{0};
  ASSERT_NEAR((b.points()[0] - targets[0]).norm(), 1.0, 1e-15);
  EXPECT_NEAR(eval_forward_block(spec, b, targets, cols)(0, 0), 0.0, 1e-16);
}

TEST(Kernels, ForwardRejectsExteriorTargets) {
  const Boundary b = make_circle(64);
  const SystemSpec spec = SystemSpec::make(Pde::laplace_neumann, b);
  const std::vector<Vec2> targets{Vec2(3.0, 0.0)};
  const std::vector<int> cols{0};
  EXPECT_THROW(eval_forward_block(spec, b, targets, cols), GeometryError);
}

TEST(Kernels, StokesletAndRotletColumns) {
  const Boundary b = make_annulus(384);
  ASSERT_LT(b.hole_centers()[0].norm(), 1e-14);
  const std::vector<Vec2> pts{Vec2(1.0, 0.0)};
  const Matrix h = completion_columns(b, pts);
  ASSERT_EQ(h.rows(), 2);
  ASSERT_EQ(h.cols(), 3);
  const double s = 1.0 / (4 * kPi);
  EXPECT_NEAR(h(0, 0), s, 1e-14);
  EXPECT_NEAR(h(1, 0), 0.0, 1e-14);
  EXPECT_NEAR(h(0, 1), 0.0, 1e-14);
  EXPECT_NEAR(h(1, 1), 0.0, 1e-14);
  EXPECT_NEAR(h(0, 2), 0.0, 1e-14);
  EXPECT_NEAR(h(1, 2), s, 1e-14);
}

TEST(Kernels, AugmentationShapes) {
  const Boundary b = make_starfish(600, {0.0, kPi});
  const AugmentationData aug = build_augmentation(b);
  EXPECT_EQ(aug.H.rows(), 1200);
  EXPECT_EQ(aug.H.cols(), 6);
  EXPECT_EQ(aug.Psi.rows(), 6);
  EXPECT_EQ(aug.Psi.cols(), 1200);
  const AugmentationData none = build_augmentation(make_circle(64));
  EXPECT_EQ(none.size(), 0);
  EXPECT_FALSE(SystemSpec::make(Pde::stokes_dirichlet, make_circle(64)).augmented);
}

TEST(Kernels, ProxyNodes) {
  const ProxyNodes p = proxy_nodes(Vec2::Zero(), 1.0, 4);
  const std::vector<Vec2> expect{{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
  for (int k = 0; k < 4; ++k) {
    EXPECT_NEAR((p.points[k] - expect[k]).norm(), 0.0, 1e-15);
    EXPECT_DOUBLE_EQ(p.weights[k], kPi / 2);
  }
  const ProxyNodes q = proxy_nodes(Vec2(0.3, -0.2), 0.7, 37);
  EXPECT_NEAR(std::accumulate(q.weights.begin(), q.weights.end(), 0.0), 2 * kPi * 0.7, 1e-14);
}

TEST(Kernels, NullspaceVectorsAnnihilatedUnderRefinement) {
  double prev = 0;
  for (int n : {384, 768}) {
    const Boundary b = make_annulus(n);
    const SystemSpec spec = SystemSpec::make(Pde::stokes_dirichlet, b);
    const Matrix a = eval_full(spec, b);
    const Matrix psi = stokes_nullspace(b);
    ASSERT_EQ(psi.cols(), 3);
    const double r = (a * psi).cwiseAbs().maxCoeff() / psi.cwiseAbs().maxCoeff();
    EXPECT_LT(r, 1e-5);
    if (prev > 0) EXPECT_LT(r, prev);
    prev = r;
  }
}

TEST(Kernels, NetFlux) {
  const Boundary b = make_annulus(384);
  const SystemSpec spec = SystemSpec::make(Pde::stokes_dirichlet, b);
  Vector f = boundary_data(spec, b, {DataPreset::annulus_couette, {}});
  EXPECT_TRUE(net_flux(b, f).consistent(1e-10));
  for (int k = 0; k < b.num_nodes(); ++k) f.segment<2>(2 * k) = b.points()[k];  // radial
  EXPECT_FALSE(net_flux(b, f).consistent(1e-10));
}

// Proxy rows stand in for everything outside the proxy circle: an ID built
// from near-field plus proxy rows must interpolate the full far field.
TEST(Kernels, ProxyCompressionCoversFarField) {
  for (Pde pde : {Pde::laplace_neumann, Pde::stokes_dirichlet}) {
    const Boundary b = make_starfish(2048, {0.0, kPi});
    const SystemSpec spec = SystemSpec::make(pde, b);
    const Tree t = Tree::build(b, 64);
    const BoxKey key = t.leaves()[t.leaves().size() / 2];
    const Box& box = *t.find(key);
    const double radius = 1.5 * std::sqrt(2.0) * box.half_width;
    const std::vector<int> bdofs = b.dofs_of_nodes(box.nodes, spec.dof_per_node);
    std::vector<int> near, far;
    for (int k = 0; k < b.num_nodes(); ++k) {
      if (std::binary_search(box.nodes.begin(), box.nodes.end(), k)) continue;
      ((b.points()[k] - box.center).norm() < radius ? near : far).push_back(k);
    }
    const auto nd = b.dofs_of_nodes(near, spec.dof_per_node);
    const auto fd = b.dofs_of_nodes(far, spec.dof_per_node);
    double wmean = 0;
    for (int k : box.nodes) wmean += b.weights()[k];
    wmean /= box.nodes.size();
    const ProxyNodes proxy = proxy_nodes(box.center, radius, 64);
    const Matrix a_in = eval_block(spec, b, nd, bdofs);
    const Matrix a_out = eval_block(spec, b, bdofs, nd).transpose();
    const Matrix po = proxy_outgoing(spec, b, proxy, bdofs, 1.0);
    const Matrix pi = proxy_incoming(spec, b, proxy, bdofs, wmean);
    Matrix all(a_in.rows() + a_out.rows() + po.rows() + pi.rows(), bdofs.size());
    all << a_in, a_out, po, pi;
    const double tol = 1e-10;
    const IDResult id = interpolative_decomposition(all, tol);
    ASSERT_GT(id.redundant.size(), 0u);
    auto pick = [](const Matrix& m, const std::vector<int>& c) {
      Matrix out(m.rows(), c.size());
      for (std::size_t j = 0; j < c.size(); ++j) out.col(j) = m.col(c[j]);
      return out;
    };
    const Matrix kfb = eval_block(spec, b, fd, bdofs);
    const Matrix kbf_t = eval_block(spec, b, bdofs, fd).transpose();
    const double r_in = (pick(kfb, id.redundant) - pick(kfb, id.skeleton) * id.T).norm();
    const double r_out = (pick(kbf_t, id.redundant) - pick(kbf_t, id.skeleton) * id.T).norm();
    EXPECT_LE(r_in, 10 * tol * kfb.norm());
    EXPECT_LE(r_out, 10 * tol * kbf_t.norm());
  }
}
