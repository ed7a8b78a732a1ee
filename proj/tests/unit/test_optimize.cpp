#include "rskel/optimize.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace rskel;

namespace {
constexpr double kPi = std::numbers::pi;
}

TEST(FiniteDifference, FourthOrderSine) {
  const auto f = sequential([](const Params& t) { return std::sin(t[0]); });
  const Params g = fd_gradient(f, {1.0}, 1e-2);
  EXPECT_LE(std::abs(g[0] - std::cos(1.0)), 1e-7);
  // Halving h cuts the error by about 16.
  const double e1 = std::abs(fd_gradient(f, {1.0}, 4e-2)[0] - std::cos(1.0));
  const double e2 = std::abs(fd_gradient(f, {1.0}, 2e-2)[0] - std::cos(1.0));
  EXPECT_NEAR(e1 / e2, 16.0, 1.0);
}

TEST(FiniteDifference, ProbeLayout) {
  const auto probes = fd_probes({1.0, 2.0}, 0.1);
  ASSERT_EQ(probes.size(), 8u);
  EXPECT_DOUBLE_EQ(probes[0][0], 1.2);
  EXPECT_DOUBLE_EQ(probes[3][0], 0.8);
  EXPECT_DOUBLE_EQ(probes[5][1], 2.1);
  EXPECT_DOUBLE_EQ(probes[5][0], 1.0);
}

TEST(Feasibility, SeparationIsPeriodic) {
  Feasibility f;
  EXPECT_TRUE(f.feasible({0.0, kPi}));
  EXPECT_FALSE(f.feasible({0.1, 0.1 + kPi / 4}));
  EXPECT_FALSE(f.feasible({0.1, 2 * kPi - 0.2}));
  EXPECT_NEAR(periodic_distance(0.1, 2 * kPi - 0.2), 0.3, 1e-15);
}

TEST(Feasibility, ProjectionLandsOnBoundary) {
  Feasibility f;
  const Params t = f.project({1.0, 1.2});
  EXPECT_TRUE(f.feasible(t));
  EXPECT_NEAR(periodic_distance(t[0], t[1]), kPi / 4, 1e-8);
  EXPECT_NEAR(0.5 * (t[0] + t[1]), 1.1, 1e-12);  // symmetric push
  const Params across = f.project({0.1, 2 * kPi - 0.1});
  EXPECT_TRUE(f.feasible(across));
  EXPECT_NEAR(periodic_distance(across[0], across[1]), kPi / 4, 1e-8);
  const Params ok{0.5, 3.0};
  EXPECT_EQ(f.project(ok), ok);
}

TEST(Maximize, ConcaveQuadraticConverges) {
  for (Direction d : {Direction::gradient, Direction::bfgs}) {
    const double a = 1.0, b = 4.0;
    const auto f = sequential(
        [&](const Params& t) { return -(t[0] - a) * (t[0] - a) - (t[1] - b) * (t[1] - b); });
    OptimizeOptions o;
    o.direction = d;
    o.max_iters = 100;
    o.grad_tol = 1e-5;
    const OptimizeResult r = maximize(f, {0.2, 3.0}, o);
    EXPECT_EQ(r.status, "converged");
    EXPECT_NEAR(r.theta[0], a, 1e-4);
    EXPECT_NEAR(r.theta[1], b, 1e-4);
    for (std::size_t i = 1; i < r.log.size(); ++i) {
      EXPECT_GE(r.log[i].objective, r.log[i - 1].objective);
    }
  }
}

TEST(Maximize, FixedStartMatchesPlainBacktracking) {
  const auto f = sequential([](const Params& t) { return -(t[0] - 1) * (t[0] - 1) - (t[1] - 4) * (t[1] - 4); });
  OptimizeOptions o;
  o.direction = Direction::gradient;
  o.line_search.growth = 1.0;
  o.max_iters = 100;
  o.grad_tol = 1e-5;
  const OptimizeResult r = maximize(f, {0.2, 3.0}, o);
  EXPECT_EQ(r.status, "converged");
  for (const auto& it : r.log) {
    if (it.step > 0) EXPECT_DOUBLE_EQ(it.step, 0.1);
  }
}

TEST(Maximize, ConstrainedOptimumStaysFeasible) {
  // Unconstrained maximum has both holes at the same place.
  const auto f = sequential([](const Params& t) {
    return -std::pow(t[0] - 2.0, 2) - std::pow(t[1] - 2.0, 2);
  });
  OptimizeOptions o;
  o.max_iters = 30;
  const OptimizeResult r = maximize(f, {1.0, 3.0}, o);
  for (const auto& it : r.log) EXPECT_TRUE(o.feasibility.feasible(it.theta));
  EXPECT_TRUE(o.feasibility.feasible(r.theta));
  EXPECT_NEAR(periodic_distance(r.theta[0], r.theta[1]), kPi / 4, 1e-3);
}

TEST(Maximize, LineSearchFailureReported) {
  // Noisy gradient that points uphill while every step goes down.
  int calls = 0;
  const BatchObjective f = [&](const std::vector<Params>& pts) {
    std::vector<double> out;
    for (const auto& p : pts) {
      out.push_back(pts.size() > 1 ? p[0] : (calls++ == 0 ? 0.0 : -1.0));
    }
    return out;
  };
  OptimizeOptions o;
  const OptimizeResult r = maximize(f, {0.0, 3.0}, o);
  EXPECT_EQ(r.status, "line_search_failed");
  EXPECT_EQ(r.log.back().line_search_evals, o.line_search.max_halvings + 1);
}

TEST(Maximize, RejectsInfeasibleStart) {
  EXPECT_THROW(maximize(sequential([](const Params&) { return 0.0; }), {0.0, 0.1}, {}),
               std::invalid_argument);
}

TEST(Schemes, WorkerSplit) {
  EXPECT_EQ(scheme_split(Scheme::A, 8), std::make_pair(1, 8));
  EXPECT_EQ(scheme_split(Scheme::B, 8), std::make_pair(2, 4));
  EXPECT_EQ(scheme_split(Scheme::C, 8), std::make_pair(8, 1));
  EXPECT_EQ(scheme_split(Scheme::B, 1), std::make_pair(1, 1));
  EXPECT_EQ(parse_scheme("B"), Scheme::B);
  EXPECT_THROW(parse_scheme("D"), std::invalid_argument);
}

TEST(ShapeObjective, SchemesGiveIdenticalValues) {
  ShapeProblem p;
  p.n_nodes = 1024;
  p.factor.tol = 1e-8;
  const Params theta{0.3, 2.5};
  const auto probes = fd_probes(theta, 1e-3);
  std::vector<double> ref;
  for (Scheme s : {Scheme::A, Scheme::B, Scheme::C}) {
    ShapeObjective obj(p, theta, 4, s);
    const auto v = obj.evaluate(probes);
    if (ref.empty()) {
      ref = v;
    } else {
      EXPECT_EQ(v, ref) << to_string(s);
    }
  }
}

TEST(ShapeObjective, UpdateMatchesFreshFactorization) {
  ShapeProblem p;
  p.n_nodes = 1024;
  p.factor.tol = 1e-10;
  ShapeObjective moved(p, {0.3, 2.5}, 1, Scheme::A);
  const double via_update = moved.value_at({0.35, 2.45}, 1);
  ShapeObjective fresh(p, {0.35, 2.45}, 1, Scheme::A);
  EXPECT_NEAR(via_update, fresh.value_at({0.35, 2.45}, 1), 1e-8);
  moved.recenter({0.35, 2.45});
  EXPECT_EQ(moved.value_at({0.35, 2.45}, 1), via_update);
}
