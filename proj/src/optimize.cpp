#include "rskel/optimize.hpp"

#include "rskel/parallel.hpp"

#include <chrono>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace rskel {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double wrap(double t) {
  t = std::fmod(t, kTwoPi);
  return t < 0 ? t + kTwoPi : t;
}

double norm(const Params& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

BatchObjective sequential(std::function<double(const Params&)> f) {
  return [f = std::move(f)](const std::vector<Params>& pts) {
    std::vector<double> out;
    out.reserve(pts.size());
    for (const auto& p : pts) out.push_back(f(p));
    return out;
  };
}

double fd4(double gpp, double gp, double gm, double gmm, double h) {
  return (-gpp + 8.0 * gp - 8.0 * gm + gmm) / (12.0 * h);
}

std::vector<Params> fd_probes(const Params& x, double h) {
  std::vector<Params> out;
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (double s : {2.0, 1.0, -1.0, -2.0}) {
      Params p = x;
      p[i] += s * h;
      out.push_back(std::move(p));
    }
  }
  return out;
}

Params fd_gradient_from(const std::vector<double>& v, std::size_t dim, double h) {
  if (v.size() != 4 * dim) throw std::invalid_argument("fd_gradient_from: wrong value count");
  Params g(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    g[i] = fd4(v[4 * i], v[4 * i + 1], v[4 * i + 2], v[4 * i + 3], h);
  }
  return g;
}

Params fd_gradient(const BatchObjective& f, const Params& x, double h) {
  return fd_gradient_from(f(fd_probes(x, h)), x.size(), h);
}

double periodic_distance(double a, double b) {
  const double d = std::abs(wrap(a) - wrap(b));
  return std::min(d, kTwoPi - d);
}

bool Feasibility::feasible(const Params& t) const {
  for (std::size_t i = 0; i < t.size(); ++i) {
    for (std::size_t j = i + 1; j < t.size(); ++j) {
      if (!(periodic_distance(t[i], t[j]) > min_separation)) return false;
    }
  }
  return true;
}

Params Feasibility::project(const Params& theta) const {
  Params t = theta;
  for (double& x : t) x = wrap(x);
  if (feasible(t)) return t;
  // Pairwise symmetric push; a few sweeps settle the two-hole case exactly
  // and the general case in practice.
  const double target = min_separation * (1.0 + 1e-9);
  for (int sweep = 0; sweep < 50 && !feasible(t); ++sweep) {
    for (std::size_t i = 0; i < t.size(); ++i) {
      for (std::size_t j = i + 1; j < t.size(); ++j) {
        if (periodic_distance(t[i], t[j]) > min_separation) continue;
        // Signed shortest offset from i to j.
        double d = wrap(t[j] - t[i]);
        if (d > std::numbers::pi) d -= kTwoPi;
        const double dir = d >= 0 ? 1.0 : -1.0;
        const double push = 0.5 * (target - std::abs(d));
        t[i] = wrap(t[i] - dir * push);
        t[j] = wrap(t[j] + dir * push);
      }
    }
  }
  if (!feasible(t)) throw std::runtime_error("feasibility projection did not converge");
  return t;
}

namespace {

// Inverse-Hessian approximation of -f for the BFGS direction.
class InverseHessian {
 public:
  explicit InverseHessian(std::size_t n) : n_(n) { reset(); }
  void reset() {
    h_.assign(n_ * n_, 0.0);
    for (std::size_t i = 0; i < n_; ++i) h_[i * n_ + i] = 1.0;
    fresh_ = true;
  }
  Params ascent(const Params& g) const {
    Params d(n_, 0.0);
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t j = 0; j < n_; ++j) d[i] += h_[i * n_ + j] * g[j];
    }
    return d;
  }
  // s = step taken, y = change of the gradient of -f.
  void update(const Params& s, const Params& y) {
    double sy = 0.0, yy = 0.0, ss = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      sy += s[i] * y[i];
      yy += y[i] * y[i];
      ss += s[i] * s[i];
    }
    if (!(sy > 1e-12 * std::sqrt(ss * yy))) return;  // curvature condition fails
    if (fresh_) {
      for (double& v : h_) v *= sy / yy;
      fresh_ = false;
    }
    Params hy(n_, 0.0);
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t j = 0; j < n_; ++j) hy[i] += h_[i * n_ + j] * y[j];
    }
    double yhy = 0.0;
    for (std::size_t i = 0; i < n_; ++i) yhy += y[i] * hy[i];
    const double rho = 1.0 / sy;
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t j = 0; j < n_; ++j) {
        h_[i * n_ + j] += rho * ((1.0 + rho * yhy) * s[i] * s[j] - hy[i] * s[j] - s[i] * hy[j]);
      }
    }
  }

 private:
  std::size_t n_;
  std::vector<double> h_;
  bool fresh_ = true;
};

double periodic_diff(double a, double b) {
  double d = a - b;
  return d - kTwoPi * std::round(d / kTwoPi);
}

}  // namespace

OptimizeResult maximize(const BatchObjective& f, const Params& theta0, const OptimizeOptions& opt,
                        const std::function<void(const Params&)>& on_accept) {
  if (!opt.feasibility.feasible(theta0)) {
    throw std::invalid_argument("initial parameters violate the separation constraint");
  }
  const std::size_t n = theta0.size();
  OptimizeResult res;
  Params x = theta0;
  double fx = f({x}).front();
  res.status = "max_iters";
  const auto& ls = opt.line_search;
  InverseHessian hinv(n);
  double last_step = 0.0;
  Params prev_x, prev_g;
  for (int it = 0; it < opt.max_iters; ++it) {
    IterationRecord rec;
    const auto t0 = Clock::now();
    rec.iter = it;
    rec.theta = x;
    rec.objective = fx;
    rec.gradient = fd_gradient(f, x, opt.fd_step);
    rec.gradient_evals = static_cast<int>(4 * n);
    rec.gradient_seconds = seconds_since(t0);
    rec.grad_norm = norm(rec.gradient);
    res.gradient = rec.gradient;
    res.grad_norm = rec.grad_norm;
    if (rec.grad_norm <= opt.grad_tol) {
      rec.seconds = seconds_since(t0);
      res.log.push_back(rec);
      res.status = "converged";
      break;
    }

    if (opt.direction == Direction::bfgs && !prev_x.empty()) {
      Params s(n), y(n);
      for (std::size_t i = 0; i < n; ++i) {
        s[i] = periodic_diff(x[i], prev_x[i]);
        y[i] = prev_g[i] - rec.gradient[i];
      }
      hinv.update(s, y);
    }
    rec.direction = opt.direction == Direction::bfgs ? hinv.ascent(rec.gradient) : rec.gradient;
    double slope = 0.0;
    for (std::size_t i = 0; i < n; ++i) slope += rec.gradient[i] * rec.direction[i];
    if (!(slope > 0.0)) {
      hinv.reset();
      rec.direction = rec.gradient;
    }

    double alpha = std::min(ls.max_step, std::max(ls.initial_step, ls.growth * last_step));
    bool accepted = false;
    bool projected = false;
    for (int k = 0; k <= ls.max_halvings; ++k, alpha *= ls.shrink) {
      Params trial(n);
      for (std::size_t i = 0; i < n; ++i) trial[i] = x[i] + alpha * rec.direction[i];
      const Params raw = trial;
      trial = opt.feasibility.project(trial);
      // Directional gain along the step actually taken (projection may
      // shorten or bend it).
      double gain = 0.0;
      bool moved = false;
      for (std::size_t i = 0; i < n; ++i) {
        gain += rec.gradient[i] * periodic_diff(trial[i], x[i]);
        moved = moved || periodic_diff(trial[i], raw[i]) != 0.0;
      }
      if (gain <= 0.0) continue;
      const double ft = f({trial}).front();
      ++rec.line_search_evals;
      if (ft >= fx + ls.armijo * gain) {
        prev_x = x;
        prev_g = rec.gradient;
        x = trial;
        fx = ft;
        rec.step = alpha;
        last_step = alpha;
        accepted = true;
        projected = moved;
        break;
      }
    }
    rec.seconds = seconds_since(t0);
    res.log.push_back(rec);
    if (!accepted) {
      res.status = "line_search_failed";
      break;
    }
    // A projected step says little about curvature along the free directions.
    if (projected) {
      hinv.reset();
      prev_x.clear();
    }
    if (on_accept) on_accept(x);
  }
  res.theta = x;
  res.objective = fx;
  return res;
}

Scheme parse_scheme(const std::string& s) {
  if (s == "A" || s == "a") return Scheme::A;
  if (s == "B" || s == "b") return Scheme::B;
  if (s == "C" || s == "c") return Scheme::C;
  throw std::invalid_argument("scheme must be A, B or C, got '" + s + "'");
}

std::string to_string(Scheme s) {
  switch (s) {
    case Scheme::A: return "A";
    case Scheme::B: return "B";
    case Scheme::C: return "C";
  }
  return "?";
}

std::pair<int, int> scheme_split(Scheme s, int workers) {
  workers = std::max(workers, 1);
  switch (s) {
    case Scheme::A: return {1, workers};
    case Scheme::B: return {std::min(2, workers), std::max(workers / 2, 1)};
    case Scheme::C: return {workers, 1};
  }
  return {1, 1};
}

ShapeObjective::ShapeObjective(ShapeProblem p, const Params& theta0, int workers, Scheme scheme)
    : p_(std::move(p)), theta_(theta0), workers_(std::max(workers, 1)), scheme_(scheme) {
  const Boundary b = make_starfish(p_.n_nodes, theta_, p_.params);
  for (int c = 1; c < b.num_curves(); ++c) hole_ids_.push_back(b.curves()[c].id);
  const Tree t = Tree::build(b, p_.leaf_cap);
  FactorOptions fo = p_.factor;
  fo.workers = workers_;
  base_ = Factorization::factor(SystemSpec::make(p_.pde, b), b, t, fo);
}

PerturbationResult ShapeObjective::perturbation_to(const Params& theta) const {
  if (theta.size() != theta_.size()) throw std::invalid_argument("parameter count mismatch");
  Perturbation pert;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    if (theta[i] != theta_[i]) {
      pert.edits.push_back(move_along_path(p_.params, hole_ids_[i], theta_[i], theta[i]));
    }
  }
  return apply_perturbation(base_.boundary(), pert);
}

double ShapeObjective::objective_of(const Factorization& f) const {
  const Boundary& b = f.boundary();
  const Vector data = boundary_data(f.spec(), b, p_.data);
  const Solution s = f.solve_density(data);
  if (p_.pde == Pde::laplace_neumann) {
    const double h = p_.probe_spacing;
    std::vector<Vec2> pts;
    for (double k : {2.0, 1.0, -1.0, -2.0}) pts.push_back(p_.probe + Vec2(k * h, 0.0));
    const Vector u = f.evaluate_interior(s, pts);
    return fd4(u[0], u[1], u[2], u[3], h);
  }
  const std::vector<Vec2> pts{p_.probe};
  const Vector u = f.evaluate_interior(s, pts);
  return -u[0];
}

double ShapeObjective::value_at(const Params& theta, int workers) const {
  const PerturbationResult change = perturbation_to(theta);
  if (change.empty()) return objective_of(base_);
  const Factorization f = base_.updated(change.boundary, change, workers);
  return objective_of(f);
}

std::vector<double> ShapeObjective::evaluate(const std::vector<Params>& points) const {
  const auto [per, concurrent] = scheme_split(scheme_, workers_);
  std::vector<double> out(points.size());
  parallel_for(concurrent, points.size(),
               [&, per = per](std::size_t i) { out[i] = value_at(points[i], per); });
  evals_ += static_cast<int>(points.size());
  return out;
}

void ShapeObjective::recenter(const Params& theta) {
  const PerturbationResult change = perturbation_to(theta);
  if (!change.empty()) base_.update(change.boundary, change, workers_);
  theta_ = theta;
}

BatchObjective ShapeObjective::batch() const {
  return [this](const std::vector<Params>& pts) {
    // Single points (line search) get the whole budget.
    if (pts.size() == 1) {
      ++evals_;
      return std::vector<double>{value_at(pts.front(), workers_)};
    }
    return evaluate(pts);
  };
}

}  // namespace rskel
