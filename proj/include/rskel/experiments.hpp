#pragma once

#include "rskel/geometry.hpp"
#include "rskel/kernels.hpp"
#include "rskel/optimize.hpp"
#include "rskel/problems.hpp"
#include "rskel/skel.hpp"

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace rskel {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Boundary data that the integral equation cannot satisfy.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GeometryConfig {
  std::string preset = "starfish";  // starfish, annulus, circle or curves
  int n_nodes = 4096;
  std::vector<double> thetas{0.0, 3.141592653589793};  // starfish hole positions
  StarfishParams starfish;
  double r_inner = 0.5;
  double r_outer = 1.0;
  std::vector<CurveSpec> curves;  // preset "curves"
};

/// One edit of an update step. Holes are named by curve id: the outer curve
/// is 0 and the initial holes are 1, 2, ... in config order; added holes take
/// the next free id.
struct EditConfig {
  enum class Kind { move_path, translate, remove, add_path, add_curve } kind = Kind::move_path;
  int hole = 1;
  std::optional<double> to_theta;  // move_path: absolute path parameter
  double dtheta = 0.0;             // move_path: relative, when to_theta is unset
  Vec2 by = Vec2::Zero();          // translate
  double theta = 0.0;              // add_path
  CurveSpec curve;                 // add_curve
};

struct UpdateStep {
  std::vector<EditConfig> edits;
};

struct ExperimentConfig {
  std::string experiment = "solve";  // solve, scaling, update or optimize
  Pde pde = Pde::stokes_dirichlet;
  GeometryConfig geometry;
  DataSpec data{DataPreset::dirichlet_source_sink, {}};
  double tol = 1e-10;
  int leaf_cap = 64;
  int threads = 1;
  int grid_resolution = 50;
  double grid_margin = -1.0;  // negative: 5 times the largest node spacing
  std::string output_dir = "out";
  unsigned seed = 1;

  // scaling
  std::vector<int> n_list{2048, 4096, 8192, 16384, 32768};
  std::vector<int> thread_list;  // optional thread sweep at n_list.back()
  int repeats = 1;

  // update
  std::vector<UpdateStep> updates;
  int random_rhs = 10;

  // optimize
  Params theta0{0.3, 2.5};
  int max_iters = 50;
  double fd_step = 1e-3;
  double grad_tol = 1e-3;
  Scheme scheme = Scheme::A;
  Direction direction = Direction::bfgs;
};

ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);
/// Rejects non-positive numeric fields and inconsistent combinations.
void validate_config(const ExperimentConfig& cfg);

/// Boundary for the configured geometry, optionally at another node count.
Boundary build_geometry(const ExperimentConfig& cfg, int n_nodes = 0);
FactorOptions factor_options(const ExperimentConfig& cfg);
/// Flux check for Stokes Dirichlet data; throws DataError.
void check_data(const SystemSpec& spec, const Boundary& b, const Vector& f);

struct Timings {
  std::map<std::string, double> seconds;
};

struct SolveReport {
  int n_nodes = 0;
  int size = 0;
  int top_size = 0;
  double residual = 0.0;
  std::optional<double> max_rel_error;  // when an exact field is known
  int grid_points = 0;
  double factor_seconds = 0.0;
  double solve_seconds = 0.0;
  double eval_seconds = 0.0;
  std::vector<Vec2> grid;
  Vector field;
  FactorStats stats;
};

struct ScalingRow {
  int n_nodes = 0;
  int size = 0;
  int threads = 1;
  double factor_seconds = 0.0;
  double solve_seconds = 0.0;
  double apply_seconds = 0.0;
  int top_size = 0;
  std::vector<int> k_levels;  // max skeleton per level, deepest first
};

struct ScalingReport {
  std::vector<ScalingRow> rows;
  double slope = 0.0;  // least squares of log factor time vs log N (1 thread)
};

struct UpdateRow {
  int step = 0;
  std::size_t modified_dofs = 0;
  double seconds = 0.0;
  double speedup = 0.0;
  int boxes_marked = 0;
  int boxes_reused = 0;
  int boxes_compressed = 0;
};

struct UpdateReport {
  double factor_seconds = 0.0;
  std::vector<UpdateRow> rows;
  double mean = 0.0;
  double stddev = 0.0;
  double refactor_seconds = 0.0;  // fresh factor of the final geometry
  double max_rel_diff = 0.0;      // updated vs fresh solves on random rhs
  bool same_tree = false;
  bool same_skeletons = false;
};

struct OptimizeReport {
  OptimizeResult result;
  int evaluations = 0;
  double seconds = 0.0;
};

/// Each runner writes <name>.csv and <name>.timing.json into
/// cfg.output_dir unless it is empty.
SolveReport run_solve(const ExperimentConfig& cfg);
ScalingReport run_scaling(const ExperimentConfig& cfg);
UpdateReport run_update_bench(const ExperimentConfig& cfg);
OptimizeReport run_optimize(const ExperimentConfig& cfg);

/// Least-squares slope of log y against log x.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace rskel
