#include "rskel/skel.hpp"
#include "rskel/problems.hpp"

#include <Eigen/LU>
#include <gtest/gtest.h>

#include <numbers>
#include <random>

using namespace rskel;

namespace {

constexpr double kPi = std::numbers::pi;

Vector random_vector(int n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1, 1);
  Vector v(n);
  for (int i = 0; i < n; ++i) v[i] = u(rng);
  return v;
}

struct Problem {
  Boundary b;
  SystemSpec spec;
  Tree t;
  Factorization f;
};

Problem make(Pde pde, Boundary b, double tol, int cap = 32, int workers = 1) {
  Problem p{std::move(b), {}, {}, {}};
  p.spec = SystemSpec::make(pde, p.b);
  p.t = Tree::build(p.b, cap);
  FactorOptions o;
  o.tol = tol;
  o.workers = workers;
  p.f = Factorization::factor(p.spec, p.b, p.t, o);
  return p;
}

double rel(const Vector& a, const Vector& b) { return (a - b).norm() / b.norm(); }

}  // namespace

TEST(Factor, CircleLaplaceMatchesDenseLu) {
  const Problem p = make(Pde::laplace_neumann, make_circle(256), 1e-10);
  const Matrix a = assemble_dense(p.spec, p.b);
  const Vector rhs = random_vector(256, 1);
  const Vector exact = a.partialPivLu().solve(rhs);
  EXPECT_LE(rel(p.f.solve(rhs), exact), 1e-8);
}

TEST(Factor, StarfishStokesMatchesAugmentedDenseLu) {
  const double tol = 1e-10;
  const Problem p = make(Pde::stokes_dirichlet, make_starfish(512, {0.0, kPi}), tol);
  ASSERT_EQ(p.f.size(), 2 * 512 + 6);
  const Matrix a = assemble_dense(p.spec, p.b);
  const Vector f = boundary_data(p.spec, p.b, {DataPreset::dirichlet_source_sink, {}});
  Vector rhs = Vector::Zero(p.f.size());
  rhs.head(f.size()) = f;
  const Vector exact = a.partialPivLu().solve(rhs);
  const Solution s = p.f.solve_density(f);
  EXPECT_LE(rel(p.f.solve(rhs), exact), 100 * tol);
  EXPECT_LE((s.mu - exact.head(1024)).norm() / exact.head(1024).norm(), 100 * tol);
  EXPECT_LE((s.lambda - exact.tail(6)).norm() / exact.tail(6).norm(), 100 * tol);
}

TEST(Factor, ApplyMatchesDenseProduct) {
  const double tol = 1e-10;
  const Problem p = make(Pde::stokes_dirichlet, make_starfish(256, {0.0, kPi}), tol, 16);
  const Matrix a = assemble_dense(p.spec, p.b);
  const double anorm = a.norm();
  for (unsigned s = 0; s < 10; ++s) {
    const Vector x = random_vector(p.f.size(), s);
    EXPECT_LE((p.f.apply(x) - a * x).norm() / (anorm * x.norm()), 10 * tol);
    EXPECT_LE(rel(apply_dense(p.spec, p.b, x), a * x), 1e-14);
  }
}

TEST(Factor, ApplyIsLinearAndZeroPreserving) {
  const Problem p = make(Pde::laplace_neumann, make_starfish(512, {0.0, kPi}), 1e-8);
  const Vector x = random_vector(p.f.size(), 3), y = random_vector(p.f.size(), 4);
  EXPECT_EQ(p.f.apply(Vector::Zero(p.f.size())).norm(), 0.0);
  const Vector lhs = p.f.apply(2.5 * x - 0.5 * y), rhs = 2.5 * p.f.apply(x) - 0.5 * p.f.apply(y);
  EXPECT_LE((lhs - rhs).norm(), 1e-13 * rhs.norm());
}

TEST(Factor, SolveInvertsApply) {
  const Problem p = make(Pde::stokes_dirichlet, make_starfish(1024, {0.0, kPi}), 1e-10);
  const Vector x = random_vector(p.f.size(), 5);
  EXPECT_LE(rel(p.f.solve(p.f.apply(x)), x), 1e-9);
  // Several right-hand sides at once agree with one at a time.
  const Vector y = random_vector(p.f.size(), 15);
  Matrix rhs(p.f.size(), 2);
  rhs << x, y;
  const Matrix xs = p.f.solve(rhs);
  EXPECT_LE((xs.col(0) - p.f.solve(x)).norm(), 1e-14 * xs.col(0).norm());
  EXPECT_LE((xs.col(1) - p.f.solve(y)).norm(), 1e-14 * xs.col(1).norm());
}

TEST(Factor, WorkerCountDoesNotChangeResults) {
  const Problem p1 = make(Pde::stokes_dirichlet, make_starfish(2048, {0.0, kPi}), 1e-8, 32, 1);
  const Problem p4 = make(Pde::stokes_dirichlet, make_starfish(2048, {0.0, kPi}), 1e-8, 32, 4);
  EXPECT_EQ(p1.f.skeleton_sets(), p4.f.skeleton_sets());
  const Vector x = random_vector(p1.f.size(), 6);
  EXPECT_TRUE(p1.f.solve(x) == p4.f.solve(x));
  EXPECT_TRUE(p1.f.apply(x) == p4.f.apply(x));
}

TEST(Factor, PlainAndAugmentedRhsFormsAgree) {
  const Problem p = make(Pde::stokes_dirichlet, make_starfish(512, {0.0, kPi}), 1e-10);
  const Vector f = random_vector(1024, 7);
  Vector padded = Vector::Zero(p.f.size());
  padded.head(1024) = f;
  EXPECT_TRUE(p.f.solve(f) == p.f.solve(padded));
  // Without holes there is nothing to augment.
  const Problem q = make(Pde::stokes_dirichlet, make_circle(256), 1e-10);
  EXPECT_EQ(q.f.size(), 512);
  EXPECT_EQ(q.f.solve_density(random_vector(512, 8)).lambda.size(), 0);
}

TEST(Factor, LevelParallelCompressionLosesNothing) {
  const double tol = 1e-10;
  const Boundary b = make_starfish(1024, {0.0, kPi});
  const SystemSpec spec = SystemSpec::make(Pde::stokes_dirichlet, b);
  const Tree t = Tree::build(b, 32);
  FactorOptions o;
  o.tol = tol;
  const Factorization par = Factorization::factor(spec, b, t, o);
  o.propagate_within_level = true;
  const Factorization seq = Factorization::factor(spec, b, t, o);
  const Matrix a = assemble_dense(spec, b);
  const Vector x = random_vector(par.size(), 9);
  const Vector exact = a.partialPivLu().solve(x);
  EXPECT_LE(rel(par.solve(x), exact), 100 * tol);
  EXPECT_LE(rel(seq.solve(x), exact), 100 * tol);
}

TEST(Factor, ResidualTracksTolerance) {
  const Boundary b = make_starfish(1024, {0.0, kPi});
  const SystemSpec spec = SystemSpec::make(Pde::stokes_dirichlet, b);
  const Vector f = boundary_data(spec, b, {DataPreset::dirichlet_source_sink, {}});
  for (double tol : {1e-4, 1e-7, 1e-10}) {
    FactorOptions o;
    o.tol = tol;
    const Factorization fac = Factorization::factor(spec, b, Tree::build(b, 32), o);
    Vector rhs = Vector::Zero(fac.size());
    rhs.head(f.size()) = f;
    EXPECT_LE((apply_dense(spec, b, fac.solve(rhs)) - rhs).norm() / rhs.norm(), 100 * tol) << tol;
  }
}

TEST(Evaluate, HarmonicNeumannData) {
  const Problem p = make(Pde::laplace_neumann, make_starfish(2048, {0.0, kPi}), 1e-12);
  const Vector f = boundary_data(p.spec, p.b, {DataPreset::harmonic_x, {}});
  const Solution s = p.f.solve_density(f);
  const std::vector<Vec2> pts{{0, 0}, {0.3, 0.1}, {-0.2, -0.35}, {0.1, 0.5}};
  const Vector u = p.f.evaluate_interior(s, pts);
  for (std::size_t i = 1; i < pts.size(); ++i) {
    EXPECT_NEAR(u[i] - u[0], pts[i].x() - pts[0].x(), 1e-6);
  }
  const double h = 1e-3;
  const std::vector<Vec2> stencil{{h, 0}, {-h, 0}, {0, h}, {0, -h}};
  const Vector v = p.f.evaluate_interior(s, stencil);
  EXPECT_NEAR((v[0] - v[1]) / (2 * h), 1.0, 1e-6);
  EXPECT_NEAR((v[2] - v[3]) / (2 * h), 0.0, 1e-6);
}

TEST(Evaluate, ZeroDataZeroField) {
  const Problem p = make(Pde::stokes_dirichlet, make_starfish(512, {0.0, kPi}), 1e-10);
  const Solution s = p.f.solve_density(Vector::Zero(1024));
  const std::vector<Vec2> pts{{0, 0}, {0.2, 0.3}};
  EXPECT_EQ(p.f.evaluate_interior(s, pts).norm(), 0.0);
}

TEST(Evaluate, AnnulusCouette) {
  const Problem p = make(Pde::stokes_dirichlet, make_annulus(2048), 1e-10, 64);
  const Vector f = boundary_data(p.spec, p.b, {DataPreset::annulus_couette, {}});
  const Solution s = p.f.solve_density(f);
  const std::vector<Vec2> pts{{0.75, 0}, {0, -0.6}, {-0.5, 0.5}, {0.3, 0.8}};
  const Vector u = p.f.evaluate_interior(s, pts);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    EXPECT_LE((u.segment<2>(2 * i) - couette_velocity(pts[i])).norm(), 1e-6);
  }
}

namespace {

void expect_update_exact(Pde pde, const Perturbation& pert) {
  const Problem p = make(pde, make_starfish(2048, {0.0, kPi}), 1e-10, 32);
  const PerturbationResult r = apply_perturbation(p.b, pert);
  const Factorization up = p.f.updated(r.boundary, r, 1);
  FactorOptions o;
  o.tol = 1e-10;
  const Factorization fresh = Factorization::factor(SystemSpec::make(pde, r.boundary), r.boundary,
                                                    Tree::build(r.boundary, 32, p.t.root_box()), o);
  EXPECT_TRUE(up.tree().same_structure(fresh.tree()));
  EXPECT_EQ(up.skeleton_sets(), fresh.skeleton_sets());
  EXPECT_GT(up.stats().boxes_reused, 0);
  for (unsigned s = 0; s < 3; ++s) {
    const Vector x = random_vector(up.size(), 20 + s);
    EXPECT_LE(rel(up.solve(x), fresh.solve(x)), 1e-14);
  }
}

}  // namespace

TEST(Update, MovedHoleEqualsRefactor) {
  StarfishParams sp;
  expect_update_exact(Pde::stokes_dirichlet, {{move_along_path(sp, 1, 0.0, 0.15)}});
  expect_update_exact(Pde::laplace_neumann, {{move_along_path(sp, 2, kPi, kPi - 0.3)}});
}

TEST(Update, DeletedAndAddedHolesEqualRefactor) {
  StarfishParams sp;
  const CurveSpec hole{starfish_knots(sp, sp.hole_scale, hole_path(sp, kPi / 2)), 341,
                       Orientation::hole};
  expect_update_exact(Pde::stokes_dirichlet, {{DeleteHole{1}}});
  expect_update_exact(Pde::stokes_dirichlet, {{AddHole{hole}}});
}

TEST(Update, EmptyPerturbationChangesNothing) {
  const Problem p = make(Pde::stokes_dirichlet, make_starfish(1024, {0.0, kPi}), 1e-10);
  const PerturbationResult r = apply_perturbation(p.b, {});
  const Factorization up = p.f.updated(r.boundary, r, 1);
  EXPECT_EQ(up.stats().boxes_compressed, 0);
  const Vector x = random_vector(up.size(), 30);
  EXPECT_TRUE(up.solve(x) == p.f.solve(x));
}
