#pragma once

#include "rskel/problems.hpp"
#include "rskel/skel.hpp"
#include "rskel/tree.hpp"

#include <functional>
#include <string>
#include <vector>

namespace rskel {

using Params = std::vector<double>;

/// Evaluates the objective at every point of a batch. Implementations may
/// evaluate concurrently but must return values independent of scheduling.
using BatchObjective = std::function<std::vector<double>(const std::vector<Params>&)>;

/// Scalar objective wrapped as a sequential batch objective.
BatchObjective sequential(std::function<double(const Params&)> f);

/// The 4 * dim probe points of the centered fourth-order stencil, ordered
/// (x+2h, x+h, x-h, x-2h) per coordinate.
std::vector<Params> fd_probes(const Params& x, double h);
/// Gradient from objective values at fd_probes(x, h).
Params fd_gradient_from(const std::vector<double>& values, std::size_t dim, double h);
Params fd_gradient(const BatchObjective& f, const Params& x, double h);

/// Fourth-order centered difference of g at x with spacing h.
double fd4(double gpp, double gp, double gm, double gmm, double h);

/// Pairwise separation constraint on periodic hole path parameters.
struct Feasibility {
  double min_separation = 0.7853981633974483;  // pi / 4
  /// Separation strictly above min_separation, measured mod 2 pi.
  bool feasible(const Params& theta) const;
  /// Wraps into [0, 2 pi) and pushes violating pairs apart symmetrically onto
  /// the constraint boundary (plus a tiny margin). Identity on feasible input.
  Params project(const Params& theta) const;
};

double periodic_distance(double a, double b);

struct LineSearchOptions {
  double initial_step = 0.1;
  double armijo = 1e-4;
  double shrink = 0.5;
  int max_halvings = 30;
  /// Start each search at max(initial_step, growth * last accepted step),
  /// capped at max_step. growth 1 keeps the start fixed.
  double growth = 2.0;
  double max_step = 1.0;
};

enum class Direction {
  gradient,  // steepest ascent
  bfgs,      // quasi-Newton ascent from FD gradient differences
};

struct OptimizeOptions {
  Direction direction = Direction::bfgs;
  int max_iters = 50;
  double fd_step = 1e-3;
  double grad_tol = 1e-3;
  LineSearchOptions line_search;
  Feasibility feasibility;
};

struct IterationRecord {
  int iter = 0;
  Params theta;        // iterate at the start of the step
  double objective = 0.0;
  Params gradient;
  double grad_norm = 0.0;
  Params direction;
  double step = 0.0;   // accepted step length, 0 if none
  int gradient_evals = 0;
  int line_search_evals = 0;
  double gradient_seconds = 0.0;
  double seconds = 0.0;  // whole step
};

struct OptimizeResult {
  std::vector<IterationRecord> log;
  Params theta;
  double objective = 0.0;
  Params gradient;
  double grad_norm = 0.0;
  /// converged, max_iters or line_search_failed
  std::string status;
};

/// Gradient ascent with finite-difference gradients and Armijo backtracking.
/// `on_accept` is called with each accepted iterate before the next
/// gradient; a PDE objective uses it to move its base factorization.
OptimizeResult maximize(const BatchObjective& f, const Params& theta0,
                        const OptimizeOptions& opt,
                        const std::function<void(const Params&)>& on_accept = {});

/// Worker allocation for concurrent objective evaluations: A runs every
/// update on one worker, B on two, C on all workers one after another.
enum class Scheme { A, B, C };
Scheme parse_scheme(const std::string& s);
std::string to_string(Scheme s);
/// Workers per update and number of concurrent updates for a budget.
std::pair<int, int> scheme_split(Scheme s, int workers);

enum class ShapeObjectiveKind {
  heat_x_derivative,  // du/dx at the origin (Laplace)
  stokes_leftward,    // -u_1 at the origin (Stokes)
};

struct ShapeProblem {
  Pde pde = Pde::laplace_neumann;
  int n_nodes = 4096;
  StarfishParams params;
  DataSpec data{DataPreset::neumann_source_sink, {}};
  FactorOptions factor;
  int leaf_cap = 64;
  Vec2 probe = Vec2::Zero();
  double probe_spacing = 1e-3;
};

/// Objective of the two-hole starfish problem as a function of the hole path
/// parameters. Holds a factorization at the current iterate; each trial
/// point is a factorization update of it.
class ShapeObjective {
 public:
  ShapeObjective(ShapeProblem p, const Params& theta0, int workers, Scheme scheme);

  double value_at(const Params& theta, int workers) const;
  std::vector<double> evaluate(const std::vector<Params>& points) const;
  /// Moves the base factorization to theta.
  void recenter(const Params& theta);

  BatchObjective batch() const;
  const Params& theta() const { return theta_; }
  const Factorization& base() const { return base_; }
  int evaluations() const { return evals_; }

 private:
  double objective_of(const Factorization& f) const;
  PerturbationResult perturbation_to(const Params& theta) const;

  ShapeProblem p_;
  Params theta_;
  std::vector<int> hole_ids_;
  Factorization base_;
  int workers_;
  Scheme scheme_;
  mutable int evals_ = 0;
};

}  // namespace rskel
