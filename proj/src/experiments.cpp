#include "rskel/experiments.hpp"

#include "rskel/tree.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

namespace rskel {

namespace {

using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

template <class F>
double timed(F&& f) {
  const auto t0 = Clock::now();
  f();
  return seconds_since(t0);
}

Pde parse_pde(const std::string& s) {
  if (s == "laplace" || s == "laplace_neumann") return Pde::laplace_neumann;
  if (s == "stokes" || s == "stokes_dirichlet") return Pde::stokes_dirichlet;
  throw ConfigError("unknown pde '" + s + "'");
}

std::string pde_name(Pde p) { return p == Pde::stokes_dirichlet ? "stokes" : "laplace"; }

Vec2 parse_vec2(const json& j) {
  if (!j.is_array() || j.size() != 2) throw ConfigError("expected a point [x, y]");
  return Vec2(j[0].get<double>(), j[1].get<double>());
}

CurveSpec parse_curve(const json& j) {
  CurveSpec c;
  for (const auto& k : j.at("knots")) c.knots.push_back(parse_vec2(k));
  c.n_nodes = j.at("n_nodes").get<int>();
  const std::string o = j.value("orientation", "outer");
  if (o == "outer") {
    c.orientation = Orientation::outer;
  } else if (o == "hole") {
    c.orientation = Orientation::hole;
  } else {
    throw ConfigError("curve orientation must be outer or hole");
  }
  return c;
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& [k, v] : j.items()) {
    if (!allowed.count(k)) throw ConfigError("unknown key '" + k + "' in " + where);
  }
}

EditConfig parse_edit(const json& j) {
  if (!j.is_object() || j.size() != 1) {
    throw ConfigError("each edit is an object with one of move, translate, delete, add");
  }
  EditConfig e;
  const auto& [kind, body] = *j.items().begin();
  if (kind == "move") {
    e.kind = EditConfig::Kind::move_path;
    e.hole = body.at("hole").get<int>();
    if (body.contains("to_theta")) e.to_theta = body["to_theta"].get<double>();
    e.dtheta = body.value("dtheta", 0.0);
  } else if (kind == "translate") {
    e.kind = EditConfig::Kind::translate;
    e.hole = body.at("hole").get<int>();
    e.by = parse_vec2(body.at("by"));
  } else if (kind == "delete") {
    e.kind = EditConfig::Kind::remove;
    e.hole = body.at("hole").get<int>();
  } else if (kind == "add") {
    if (body.contains("knots")) {
      e.kind = EditConfig::Kind::add_curve;
      e.curve = parse_curve(body);
      e.curve.orientation = Orientation::hole;
    } else {
      e.kind = EditConfig::Kind::add_path;
      e.theta = body.at("theta").get<double>();
    }
  } else {
    throw ConfigError("unknown edit '" + kind + "'");
  }
  return e;
}

void parse_into(ExperimentConfig& c, const json& j) {
  check_keys(j,
             {"experiment", "pde", "geometry", "boundary_data", "tol", "leaf_cap", "threads",
              "grid_resolution", "grid_margin", "output_dir", "seed", "scaling", "update",
              "optimize"},
             "config");
  c.experiment = j.value("experiment", c.experiment);
  if (j.contains("pde")) c.pde = parse_pde(j["pde"].get<std::string>());

  if (j.contains("geometry")) {
    const json& g = j["geometry"];
    check_keys(g, {"preset", "n_nodes", "thetas", "starfish", "r_inner", "r_outer", "curves"},
               "geometry");
    auto& gc = c.geometry;
    gc.preset = g.value("preset", gc.preset);
    gc.n_nodes = g.value("n_nodes", gc.n_nodes);
    if (g.contains("thetas")) gc.thetas = g["thetas"].get<std::vector<double>>();
    gc.r_inner = g.value("r_inner", gc.r_inner);
    gc.r_outer = g.value("r_outer", gc.r_outer);
    if (g.contains("starfish")) {
      const json& s = g["starfish"];
      check_keys(s, {"arms", "amplitude", "knots", "hole_scale", "path_scale", "hole_fraction"},
                 "geometry.starfish");
      auto& p = gc.starfish;
      p.arms = s.value("arms", p.arms);
      p.amplitude = s.value("amplitude", p.amplitude);
      p.knots = s.value("knots", p.knots);
      p.hole_scale = s.value("hole_scale", p.hole_scale);
      p.path_scale = s.value("path_scale", p.path_scale);
      p.hole_fraction = s.value("hole_fraction", p.hole_fraction);
    }
    if (g.contains("curves")) {
      for (const auto& cj : g["curves"]) gc.curves.push_back(parse_curve(cj));
      if (!g.contains("preset")) gc.preset = "curves";
    }
  }

  // Default data follows the problem: Couette on the annulus, source/sink
  // on the starfish.
  const bool stokes = c.pde == Pde::stokes_dirichlet;
  if (c.geometry.preset == "annulus" && stokes) {
    c.data.preset = DataPreset::annulus_couette;
  } else {
    c.data.preset = stokes ? DataPreset::dirichlet_source_sink : DataPreset::neumann_source_sink;
  }
  if (j.contains("boundary_data")) {
    const json& d = j["boundary_data"];
    try {
      if (d.is_string()) {
        c.data.preset = parse_data_preset(d.get<std::string>());
      } else {
        check_keys(d, {"preset", "values"}, "boundary_data");
        c.data.preset = parse_data_preset(d.at("preset").get<std::string>());
        if (d.contains("values")) {
          for (const auto& v : d["values"]) {
            c.data.per_curve.push_back(v.is_array() ? v.get<std::vector<double>>()
                                                    : std::vector<double>{v.get<double>()});
          }
        }
      }
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }

  c.tol = j.value("tol", c.tol);
  c.leaf_cap = j.value("leaf_cap", c.leaf_cap);
  c.threads = j.value("threads", c.threads);
  c.grid_resolution = j.value("grid_resolution", c.grid_resolution);
  c.grid_margin = j.value("grid_margin", c.grid_margin);
  c.output_dir = j.value("output_dir", c.output_dir);
  c.seed = j.value("seed", c.seed);

  if (j.contains("scaling")) {
    const json& s = j["scaling"];
    check_keys(s, {"n_list", "threads", "repeats"}, "scaling");
    if (s.contains("n_list")) c.n_list = s["n_list"].get<std::vector<int>>();
    if (s.contains("threads")) c.thread_list = s["threads"].get<std::vector<int>>();
    c.repeats = s.value("repeats", c.repeats);
  }
  if (j.contains("update")) {
    const json& u = j["update"];
    check_keys(u, {"steps", "sweep", "random_rhs"}, "update");
    if (u.contains("steps")) {
      for (const auto& sj : u["steps"]) {
        UpdateStep step;
        if (sj.is_array()) {
          for (const auto& ej : sj) step.edits.push_back(parse_edit(ej));
        } else {
          step.edits.push_back(parse_edit(sj));
        }
        c.updates.push_back(std::move(step));
      }
    }
    if (u.contains("sweep")) {
      // `count` consecutive moves of one hole by dtheta along its path.
      const json& s = u["sweep"];
      check_keys(s, {"hole", "dtheta", "count"}, "update.sweep");
      const int count = s.at("count").get<int>();
      if (count <= 0) throw ConfigError("update.sweep.count must be positive");
      for (int i = 0; i < count; ++i) {
        EditConfig e;
        e.kind = EditConfig::Kind::move_path;
        e.hole = s.value("hole", 1);
        e.dtheta = s.at("dtheta").get<double>();
        c.updates.push_back({{e}});
      }
    }
    c.random_rhs = u.value("random_rhs", c.random_rhs);
  }
  if (j.contains("optimize")) {
    const json& o = j["optimize"];
    check_keys(o, {"theta0", "max_iters", "fd_step", "grad_tol", "scheme", "direction"},
               "optimize");
    if (o.contains("theta0")) c.theta0 = o["theta0"].get<Params>();
    c.max_iters = o.value("max_iters", c.max_iters);
    c.fd_step = o.value("fd_step", c.fd_step);
    c.grad_tol = o.value("grad_tol", c.grad_tol);
    if (o.contains("scheme")) {
      try {
        c.scheme = parse_scheme(o["scheme"].get<std::string>());
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }
    }
    if (o.contains("direction")) {
      const std::string d = o["direction"].get<std::string>();
      if (d == "bfgs") {
        c.direction = Direction::bfgs;
      } else if (d == "gradient") {
        c.direction = Direction::gradient;
      } else {
        throw ConfigError("optimize.direction must be bfgs or gradient");
      }
    }
  }
}

// Round-trip decimal so reruns compare byte for byte.
std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::filesystem::path prepare_dir(const ExperimentConfig& cfg) {
  std::filesystem::path dir(cfg.output_dir);
  std::filesystem::create_directories(dir);
  return dir;
}

void write_text(const std::filesystem::path& p, const std::string& s) {
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << s;
  if (!out) throw std::runtime_error("write failed for " + p.string());
}

json config_summary(const ExperimentConfig& cfg) {
  return {{"experiment", cfg.experiment}, {"pde", pde_name(cfg.pde)},
          {"geometry", cfg.geometry.preset}, {"n_nodes", cfg.geometry.n_nodes},
          {"boundary_data", to_string(cfg.data.preset)}, {"tol", cfg.tol},
          {"leaf_cap", cfg.leaf_cap}, {"threads", cfg.threads}};
}

json stats_json(const FactorStats& s) {
  json levels = json::array();
  for (const auto& l : s.levels) {
    levels.push_back({{"level", l.level}, {"boxes", l.boxes}, {"max_active", l.max_active},
                      {"max_skeleton", l.max_skeleton}, {"seconds", l.seconds}});
  }
  return {{"levels", levels},
          {"top_size", s.top_size},
          {"boxes_compressed", s.boxes_compressed},
          {"boxes_reused", s.boxes_reused},
          {"boxes_marked", s.boxes_marked},
          {"migrated", s.migrated},
          {"top_seconds", s.top_seconds},
          {"total_seconds", s.total_seconds}};
}

Vector random_vector(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Vector v(n);
  for (int i = 0; i < n; ++i) v[i] = u(rng);
  return v;
}

double grid_margin(const ExperimentConfig& cfg, const Boundary& b) {
  if (cfg.grid_margin >= 0.0) return cfg.grid_margin;
  const auto& w = b.weights();
  return 5.0 * *std::max_element(w.begin(), w.end());
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig c;
  try {
    parse_into(c, json::parse(text));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
  validate_config(c);
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void validate_config(const ExperimentConfig& c) {
  auto positive = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(std::string(what) + " must be positive");
  };
  static const std::set<std::string> experiments{"solve", "scaling", "update", "optimize"};
  if (!experiments.count(c.experiment)) {
    throw ConfigError("experiment must be solve, scaling, update or optimize");
  }
  static const std::set<std::string> presets{"starfish", "annulus", "circle", "curves"};
  if (!presets.count(c.geometry.preset)) {
    throw ConfigError("unknown geometry preset '" + c.geometry.preset + "'");
  }
  positive(c.geometry.n_nodes > 0, "geometry.n_nodes");
  positive(c.tol > 0, "tol");
  positive(c.leaf_cap > 0, "leaf_cap");
  positive(c.threads > 0, "threads");
  positive(c.grid_resolution > 0, "grid_resolution");
  positive(c.repeats > 0, "scaling.repeats");
  positive(c.max_iters > 0, "optimize.max_iters");
  positive(c.fd_step > 0, "optimize.fd_step");
  positive(c.grad_tol > 0, "optimize.grad_tol");
  positive(c.random_rhs >= 0, "update.random_rhs");
  for (int n : c.n_list) positive(n > 0, "scaling.n_list entries");
  for (int t : c.thread_list) positive(t > 0, "scaling.threads entries");
  positive(c.geometry.r_inner > 0 && c.geometry.r_outer > c.geometry.r_inner,
           "annulus radii (0 < r_inner < r_outer)");
  if (c.geometry.preset == "curves" && c.geometry.curves.empty()) {
    throw ConfigError("geometry preset curves needs a curves list");
  }
  if (c.experiment == "optimize" && c.geometry.preset != "starfish") {
    throw ConfigError("optimize runs on the starfish geometry");
  }
}

Boundary build_geometry(const ExperimentConfig& cfg, int n_nodes) {
  const auto& g = cfg.geometry;
  const int n = n_nodes > 0 ? n_nodes : g.n_nodes;
  if (g.preset == "starfish") return make_starfish(n, g.thetas, g.starfish);
  if (g.preset == "annulus") return make_annulus(n, g.r_inner, g.r_outer);
  if (g.preset == "circle") return make_circle(n);
  // Explicit curves: node counts scale with the requested total.
  std::vector<CurveSpec> specs = g.curves;
  if (n_nodes > 0) {
    int total = 0;
    for (const auto& s : specs) total += s.n_nodes;
    for (auto& s : specs) {
      s.n_nodes = static_cast<int>(std::lround(double(s.n_nodes) * n / total));
    }
  }
  return Boundary::build(specs);
}

FactorOptions factor_options(const ExperimentConfig& cfg) {
  FactorOptions o;
  o.tol = cfg.tol;
  o.workers = cfg.threads;
  return o;
}

void check_data(const SystemSpec& spec, const Boundary& b, const Vector& f) {
  if (spec.pde != Pde::stokes_dirichlet) return;
  const FluxReport r = net_flux(b, f);
  // Constant fields carry zero flux through every closed curve, so what the
  // discrete sum makes of them is the quadrature error of this geometry.
  // Consistent data may show that much flux; inconsistent data shows O(1).
  double slack = 0.0;
  for (int c = 0; c < b.num_curves(); ++c) {
    const auto [lo, hi] = b.node_range(c);
    Vec2 wn = Vec2::Zero();
    double fmax = 0.0;
    for (int k = lo; k < hi; ++k) {
      wn += b.weights()[k] * b.normals()[k];
      fmax = std::max(fmax, f.segment<2>(2 * k).norm());
    }
    slack += 10.0 * wn.norm() * fmax;
  }
  if (std::abs(r.flux) > 1e-10 * r.magnitude + slack) {
    std::ostringstream msg;
    msg << "boundary data has net flux " << r.flux << " (limit 1e-10 * " << r.magnitude
        << " + quadrature slack " << slack << ")";
    throw DataError(msg.str());
  }
}

SolveReport run_solve(const ExperimentConfig& cfg) {
  SolveReport rep;
  const Boundary b = build_geometry(cfg);
  const SystemSpec spec = SystemSpec::make(cfg.pde, b);
  Vector f;
  try {
    f = boundary_data(spec, b, cfg.data);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  check_data(spec, b, f);
  rep.n_nodes = b.num_nodes();

  const Tree t = Tree::build(b, cfg.leaf_cap);
  Factorization fac;
  rep.factor_seconds = timed([&] { fac = Factorization::factor(spec, b, t, factor_options(cfg)); });
  rep.size = fac.size();
  rep.top_size = fac.stats().top_size;
  rep.stats = fac.stats();

  Vector rhs = Vector::Zero(fac.size());
  rhs.head(f.size()) = f;
  Vector x;
  rep.solve_seconds = timed([&] { x = fac.solve(rhs); });
  const double rn = rhs.norm();
  rep.residual = rn > 0 ? (apply_dense(spec, b, x) - rhs).norm() / rn : x.norm();

  Solution sol;
  sol.mu = x.head(f.size());
  sol.lambda = x.tail(fac.size() - f.size());
  rep.grid = interior_grid(b, cfg.grid_resolution, grid_margin(cfg, b));
  rep.grid_points = static_cast<int>(rep.grid.size());
  rep.eval_seconds = timed([&] { rep.field = fac.evaluate_interior(sol, rep.grid); });

  const bool couette = cfg.data.preset == DataPreset::annulus_couette;
  Vector exact;
  if (couette && !rep.grid.empty()) {
    exact.resize(2 * rep.grid.size());
    for (std::size_t i = 0; i < rep.grid.size(); ++i) {
      exact.segment<2>(2 * i) = couette_velocity(rep.grid[i], cfg.geometry.r_inner,
                                                 cfg.geometry.r_outer);
    }
    // Pointwise error relative to the largest exact speed on the grid.
    double err = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < rep.grid.size(); ++i) {
      err = std::max(err, (rep.field.segment<2>(2 * i) - exact.segment<2>(2 * i)).norm());
      scale = std::max(scale, exact.segment<2>(2 * i).norm());
    }
    rep.max_rel_error = err / scale;
  }

  if (!cfg.output_dir.empty()) {
    const auto dir = prepare_dir(cfg);
    const bool stokes = cfg.pde == Pde::stokes_dirichlet;
    std::ostringstream csv;
    csv << (stokes ? "x,y,u1,u2" : "x,y,u") << (couette ? ",exact_u1,exact_u2" : "") << "\n";
    for (std::size_t i = 0; i < rep.grid.size(); ++i) {
      csv << num(rep.grid[i].x()) << "," << num(rep.grid[i].y());
      if (stokes) {
        csv << "," << num(rep.field[2 * i]) << "," << num(rep.field[2 * i + 1]);
      } else {
        csv << "," << num(rep.field[i]);
      }
      if (couette) csv << "," << num(exact[2 * i]) << "," << num(exact[2 * i + 1]);
      csv << "\n";
    }
    write_text(dir / "field.csv", csv.str());
    json j{{"config", config_summary(cfg)},
           {"size", rep.size},
           {"residual", rep.residual},
           {"grid_points", rep.grid_points},
           {"timings",
            {{"factor", rep.factor_seconds},
             {"solve", rep.solve_seconds},
             {"evaluate", rep.eval_seconds}}},
           {"factor_stats", stats_json(rep.stats)}};
    if (rep.max_rel_error) j["max_rel_error"] = *rep.max_rel_error;
    write_text(dir / "field.timing.json", j.dump(2) + "\n");
  }
  return rep;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n) return 0.0;
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  return sxx > 0 ? sxy / sxx : 0.0;
}

ScalingReport run_scaling(const ExperimentConfig& cfg) {
  ScalingReport rep;
  std::mt19937_64 rng(cfg.seed);
  auto measure = [&](int n, int threads) {
    const Boundary b = build_geometry(cfg, n);
    const SystemSpec spec = SystemSpec::make(cfg.pde, b);
    const Tree t = Tree::build(b, cfg.leaf_cap);
    FactorOptions fo = factor_options(cfg);
    fo.workers = threads;
    ScalingRow row;
    row.n_nodes = b.num_nodes();
    row.threads = threads;
    row.factor_seconds = 1e300;
    Factorization fac;
    for (int r = 0; r < cfg.repeats; ++r) {
      row.factor_seconds =
          std::min(row.factor_seconds, timed([&] { fac = Factorization::factor(spec, b, t, fo); }));
    }
    row.size = fac.size();
    row.top_size = fac.stats().top_size;
    for (const auto& l : fac.stats().levels) row.k_levels.push_back(l.max_skeleton);
    const Vector v = random_vector(rng, fac.size());
    row.solve_seconds = timed([&] { (void)fac.solve(v); });
    row.apply_seconds = timed([&] { (void)fac.apply(v); });
    return row;
  };

  std::vector<double> ns, ts;
  for (int n : cfg.n_list) {
    rep.rows.push_back(measure(n, cfg.threads));
    ns.push_back(rep.rows.back().n_nodes);
    ts.push_back(rep.rows.back().factor_seconds);
  }
  for (int th : cfg.thread_list) rep.rows.push_back(measure(cfg.n_list.back(), th));
  rep.slope = loglog_slope(ns, ts);

  if (!cfg.output_dir.empty()) {
    const auto dir = prepare_dir(cfg);
    std::ostringstream csv;
    csv << "n_nodes,size,threads,factor_seconds,solve_seconds,apply_seconds,top_size,k_levels\n";
    for (const auto& r : rep.rows) {
      csv << r.n_nodes << "," << r.size << "," << r.threads << "," << num(r.factor_seconds) << ","
          << num(r.solve_seconds) << "," << num(r.apply_seconds) << "," << r.top_size << ",";
      for (std::size_t i = 0; i < r.k_levels.size(); ++i) {
        csv << (i ? ";" : "") << r.k_levels[i];
      }
      csv << "\n";
    }
    write_text(dir / "scaling.csv", csv.str());
    json j{{"config", config_summary(cfg)}, {"slope", rep.slope}};
    json rows = json::array();
    for (const auto& r : rep.rows) {
      rows.push_back({{"n_nodes", r.n_nodes},
                      {"threads", r.threads},
                      {"factor", r.factor_seconds},
                      {"solve", r.solve_seconds},
                      {"apply", r.apply_seconds}});
    }
    j["timings"] = rows;
    write_text(dir / "scaling.timing.json", j.dump(2) + "\n");
  }
  return rep;
}

UpdateReport run_update_bench(const ExperimentConfig& cfg) {
  UpdateReport rep;
  const Boundary b0 = build_geometry(cfg);
  const SystemSpec spec0 = SystemSpec::make(cfg.pde, b0);
  const Tree t0 = Tree::build(b0, cfg.leaf_cap);
  const FactorOptions fo = factor_options(cfg);
  Factorization fac;
  rep.factor_seconds = timed([&] { fac = Factorization::factor(spec0, b0, t0, fo); });

  const bool starfish = cfg.geometry.preset == "starfish";
  const StarfishParams& sp = cfg.geometry.starfish;
  std::map<int, double> theta;  // path parameter per hole id (starfish only)
  if (starfish) {
    for (std::size_t i = 0; i < cfg.geometry.thetas.size(); ++i) {
      theta[b0.curves()[i + 1].id] = cfg.geometry.thetas[i];
    }
  }
  auto need_path = [&](int hole) {
    if (!starfish || !theta.count(hole)) {
      throw ConfigError("hole " + std::to_string(hole) + " has no starfish path parameter");
    }
  };

  const int per = spec0.dof_per_node;
  for (std::size_t s = 0; s < cfg.updates.size(); ++s) {
    const Boundary& cur = fac.boundary();
    Perturbation pert;
    std::map<int, double> next_theta = theta;
    int next_id = cur.next_curve_id();
    for (const auto& e : cfg.updates[s].edits) {
      switch (e.kind) {
        case EditConfig::Kind::move_path: {
          need_path(e.hole);
          const double from = next_theta[e.hole];
          const double to = e.to_theta ? *e.to_theta : from + e.dtheta;
          pert.edits.push_back(move_along_path(sp, e.hole, from, to));
          next_theta[e.hole] = to;
          break;
        }
        case EditConfig::Kind::translate:
          pert.edits.push_back(MoveHole{e.hole, e.by});
          next_theta.erase(e.hole);
          break;
        case EditConfig::Kind::remove:
          pert.edits.push_back(DeleteHole{e.hole});
          next_theta.erase(e.hole);
          break;
        case EditConfig::Kind::add_path: {
          if (!starfish) throw ConfigError("add by theta needs the starfish geometry");
          CurveSpec c{starfish_knots(sp, sp.hole_scale, hole_path(sp, e.theta)),
                      starfish_hole_nodes(cfg.geometry.n_nodes, sp), Orientation::hole};
          pert.edits.push_back(AddHole{c});
          next_theta[next_id++] = e.theta;
          break;
        }
        case EditConfig::Kind::add_curve:
          pert.edits.push_back(AddHole{e.curve});
          ++next_id;
          break;
      }
    }
    const PerturbationResult change = apply_perturbation(cur, pert);
    UpdateRow row;
    row.step = static_cast<int>(s);
    row.modified_dofs = change.modified_dof_count(cur, per);
    row.seconds = timed([&] { fac.update(change.boundary, change, cfg.threads); });
    row.speedup = row.seconds > 0 ? rep.factor_seconds / row.seconds : 0.0;
    row.boxes_marked = fac.stats().boxes_marked;
    row.boxes_reused = fac.stats().boxes_reused;
    row.boxes_compressed = fac.stats().boxes_compressed;
    rep.rows.push_back(row);
    theta = std::move(next_theta);
  }

  if (!rep.rows.empty()) {
    double sum = 0.0;
    for (const auto& r : rep.rows) sum += r.seconds;
    rep.mean = sum / rep.rows.size();
    double var = 0.0;
    for (const auto& r : rep.rows) var += (r.seconds - rep.mean) * (r.seconds - rep.mean);
    rep.stddev = std::sqrt(var / rep.rows.size());
  }

  // The updated factorization must equal a fresh one on the final geometry
  // (same root square, so the trees are comparable).
  const Boundary& bf = fac.boundary();
  const Tree tf = Tree::build(bf, cfg.leaf_cap, t0.root_box());
  Factorization fresh;
  rep.refactor_seconds = timed(
      [&] { fresh = Factorization::factor(SystemSpec::make(cfg.pde, bf), bf, tf, fo); });
  rep.same_tree = fresh.tree().same_structure(fac.tree());
  rep.same_skeletons = fresh.skeleton_sets() == fac.skeleton_sets();
  std::mt19937_64 rng(cfg.seed);
  for (int k = 0; k < cfg.random_rhs; ++k) {
    const Vector v = random_vector(rng, fac.size());
    const Vector a = fac.solve(v), c = fresh.solve(v);
    rep.max_rel_diff = std::max(rep.max_rel_diff, (a - c).norm() / c.norm());
  }

  if (!cfg.output_dir.empty()) {
    const auto dir = prepare_dir(cfg);
    std::ostringstream csv;
    csv << "step,modified_dofs,seconds,speedup,boxes_marked,boxes_reused,boxes_compressed\n";
    for (const auto& r : rep.rows) {
      csv << r.step << "," << r.modified_dofs << "," << num(r.seconds) << "," << num(r.speedup)
          << "," << r.boxes_marked << "," << r.boxes_reused << "," << r.boxes_compressed << "\n";
    }
    write_text(dir / "updates.csv", csv.str());
    json j{{"config", config_summary(cfg)},
           {"timings",
            {{"factor", rep.factor_seconds},
             {"update_mean", rep.mean},
             {"update_stddev", rep.stddev},
             {"refactor_final", rep.refactor_seconds}}},
           {"mean_speedup", rep.mean > 0 ? rep.factor_seconds / rep.mean : 0.0},
           {"same_tree", rep.same_tree},
           {"same_skeletons", rep.same_skeletons},
           {"max_rel_diff", rep.max_rel_diff}};
    write_text(dir / "updates.timing.json", j.dump(2) + "\n");
  }
  return rep;
}

OptimizeReport run_optimize(const ExperimentConfig& cfg) {
  OptimizeReport rep;
  ShapeProblem p;
  p.pde = cfg.pde;
  p.n_nodes = cfg.geometry.n_nodes;
  p.params = cfg.geometry.starfish;
  p.data = cfg.data;
  p.factor = factor_options(cfg);
  p.leaf_cap = cfg.leaf_cap;

  OptimizeOptions o;
  o.max_iters = cfg.max_iters;
  o.fd_step = cfg.fd_step;
  o.grad_tol = cfg.grad_tol;
  o.direction = cfg.direction;

  const auto t0 = Clock::now();
  ShapeObjective obj(p, cfg.theta0, cfg.threads, cfg.scheme);
  if (cfg.pde == Pde::stokes_dirichlet) {
    check_data(obj.base().spec(), obj.base().boundary(),
               boundary_data(obj.base().spec(), obj.base().boundary(), cfg.data));
  }
  rep.result = maximize(obj.batch(), cfg.theta0, o, [&](const Params& x) { obj.recenter(x); });
  rep.evaluations = obj.evaluations();
  rep.seconds = seconds_since(t0);

  if (!cfg.output_dir.empty()) {
    const auto dir = prepare_dir(cfg);
    const std::size_t dim = cfg.theta0.size();
    std::ostringstream csv;
    csv << "iter";
    for (std::size_t i = 0; i < dim; ++i) csv << ",theta" << i + 1;
    csv << ",objective";
    for (std::size_t i = 0; i < dim; ++i) csv << ",grad" << i + 1;
    csv << ",grad_norm,step,gradient_evals,line_search_evals\n";
    for (const auto& r : rep.result.log) {
      csv << r.iter;
      for (double v : r.theta) csv << "," << num(v);
      csv << "," << num(r.objective);
      for (double v : r.gradient) csv << "," << num(v);
      csv << "," << num(r.grad_norm) << "," << num(r.step) << "," << r.gradient_evals << ","
          << r.line_search_evals << "\n";
    }
    write_text(dir / "optimize.csv", csv.str());
    json steps = json::array();
    for (const auto& r : rep.result.log) {
      steps.push_back({{"iter", r.iter}, {"gradient", r.gradient_seconds}, {"step", r.seconds}});
    }
    json j{{"config", config_summary(cfg)},
           {"scheme", to_string(cfg.scheme)},
           {"status", rep.result.status},
           {"theta", rep.result.theta},
           {"objective", rep.result.objective},
           {"grad_norm", rep.result.grad_norm},
           {"evaluations", rep.evaluations},
           {"timings", {{"total", rep.seconds}, {"steps", steps}}}};
    write_text(dir / "optimize.timing.json", j.dump(2) + "\n");
  }
  return rep;
}

}  // namespace rskel
