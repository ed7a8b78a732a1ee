// rskel command-line driver.
#include "rskel/experiments.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

using namespace rskel;

namespace {

struct Overrides {
  std::string config;
  std::optional<int> threads;
  std::optional<double> tol;
  std::optional<std::string> out;
  std::optional<unsigned> seed;
};

void add_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "JSON experiment config")->required();
  cmd->add_option("--threads", o.threads, "worker threads (overrides config)")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--tol", o.tol, "ID tolerance (overrides config)")->check(CLI::PositiveNumber);
  cmd->add_option("--out", o.out, "output directory (overrides config)");
  cmd->add_option("--seed", o.seed, "seed for random right-hand sides");
}

ExperimentConfig load(const Overrides& o, const std::string& experiment) {
  ExperimentConfig cfg = load_config(o.config);
  cfg.experiment = experiment;
  if (o.threads) cfg.threads = *o.threads;
  if (o.tol) cfg.tol = *o.tol;
  if (o.out) cfg.output_dir = *o.out;
  if (o.seed) cfg.seed = *o.seed;
  validate_config(cfg);
  return cfg;
}

class CheckFailed : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void solve(const ExperimentConfig& cfg) {
  const SolveReport r = run_solve(cfg);
  std::printf("solve: N=%d size=%d top=%d factor=%.3fs solve=%.3fs residual=%.3e grid=%d\n",
              r.n_nodes, r.size, r.top_size, r.factor_seconds, r.solve_seconds, r.residual,
              r.grid_points);
  if (r.max_rel_error) std::printf("max relative interior error %.3e\n", *r.max_rel_error);
}

void scaling(const ExperimentConfig& cfg) {
  const ScalingReport r = run_scaling(cfg);
  for (const auto& row : r.rows) {
    std::printf("N=%6d threads=%d factor=%8.3fs solve=%.4fs apply=%.4fs top=%d\n", row.n_nodes,
                row.threads, row.factor_seconds, row.solve_seconds, row.apply_seconds,
                row.top_size);
  }
  std::printf("log-log slope of factor time: %.3f\n", r.slope);
}

void update_bench(const ExperimentConfig& cfg) {
  const UpdateReport r = run_update_bench(cfg);
  std::printf("factor %.3fs, %zu updates: mean %.4fs sd %.4fs (speedup %.2f)\n",
              r.factor_seconds, r.rows.size(), r.mean, r.stddev,
              r.mean > 0 ? r.factor_seconds / r.mean : 0.0);
  std::printf("final refactor %.3fs, same tree %d, same skeletons %d, max rel diff %.2e\n",
              r.refactor_seconds, r.same_tree, r.same_skeletons, r.max_rel_diff);
  if (!r.same_tree || !r.same_skeletons || r.max_rel_diff > 1e-14) {
    throw CheckFailed("updated factorization differs from a fresh one");
  }
}

void optimize(const ExperimentConfig& cfg) {
  const OptimizeReport r = run_optimize(cfg);
  for (const auto& it : r.result.log) {
    std::printf("%3d f=%.12f |g|=%.3e step=%g evals=%d+%d %.2fs\n", it.iter, it.objective,
                it.grad_norm, it.step, it.gradient_evals, it.line_search_evals, it.seconds);
  }
  std::printf("%s after %zu steps: f=%.12f theta=(", r.result.status.c_str(), r.result.log.size(),
              r.result.objective);
  for (std::size_t i = 0; i < r.result.theta.size(); ++i) {
    std::printf("%s%.6f", i ? ", " : "", r.result.theta[i]);
  }
  std::printf(") %d evaluations %.1fs\n", r.evaluations, r.seconds);
  if (r.result.status == "line_search_failed") throw CheckFailed("line search failed");
}

// One line on stderr, nonzero exit; categories map to exit codes.
int fail(const char* category, int code, const std::string& what) {
  std::fprintf(stderr, "rskel: %s error: %s\n", category, what.c_str());
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fast direct solver for 2D boundary integral equations"};
  app.require_subcommand(1);
  Overrides o;
  struct Cmd {
    const char* name;
    const char* help;
    const char* experiment;
    void (*run)(const ExperimentConfig&);
  };
  const Cmd cmds[] = {
      {"solve", "factor, solve and evaluate on an interior grid", "solve", solve},
      {"scaling", "factor time against N (and threads)", "scaling", scaling},
      {"update-bench", "factorization updates after hole edits", "update", update_bench},
      {"optimize", "hole placement by finite-difference ascent", "optimize", optimize},
  };
  for (const auto& c : cmds) add_flags(app.add_subcommand(c.name, c.help), o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return fail("usage", 2, e.what());
  }

  try {
    for (const auto& c : cmds) {
      if (app.got_subcommand(c.name)) c.run(load(o, c.experiment));
    }
  } catch (const ConfigError& e) {
    return fail("config", 2, e.what());
  } catch (const GeometryError& e) {
    return fail("geometry", 3, e.what());
  } catch (const DataError& e) {
    return fail("data", 4, e.what());
  } catch (const SingularPivotError& e) {
    return fail("numerical", 5, e.what());
  } catch (const CheckFailed& e) {
    return fail("check", 6, e.what());
  } catch (const std::exception& e) {
    return fail("internal", 1, e.what());
  }
  return 0;
}
