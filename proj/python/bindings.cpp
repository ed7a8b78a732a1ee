#include "rskel/experiments.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <span>

namespace py = pybind11;
using namespace rskel;

namespace {

Pde pde_from(const std::string& s) {
  if (s == "laplace") return Pde::laplace_neumann;
  if (s == "stokes") return Pde::stokes_dirichlet;
  throw py::value_error("pde must be 'laplace' or 'stokes'");
}

// Node data as an (n, 2) array.
Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor> to_array(const std::vector<Vec2>& v) {
  Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor> a(v.size(), 2);
  for (std::size_t i = 0; i < v.size(); ++i) a.row(i) = v[i].transpose();
  return a;
}

std::vector<Vec2> from_array(const Eigen::Ref<const Eigen::MatrixXd>& a) {
  if (a.cols() != 2) throw py::value_error("targets must have shape (n, 2)");
  std::vector<Vec2> v(a.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i) v[i] = a.row(i).transpose();
  return v;
}

py::dict timings(const FactorStats& s) {
  py::dict d;
  d["total_seconds"] = s.total_seconds;
  d["top_seconds"] = s.top_seconds;
  d["top_size"] = s.top_size;
  d["boxes_compressed"] = s.boxes_compressed;
  d["boxes_reused"] = s.boxes_reused;
  return d;
}

}  // namespace

PYBIND11_MODULE(_rskel, m) {
  m.doc() = "Recursive skeletonization direct solver for 2D boundary integral equations";

  py::register_exception<GeometryError>(m, "GeometryError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);

  py::class_<Boundary>(m, "Boundary")
      .def_property_readonly("num_nodes", &Boundary::num_nodes)
      .def_property_readonly("num_holes", &Boundary::num_holes)
      .def_property_readonly("points", [](const Boundary& b) { return to_array(b.points()); })
      .def_property_readonly("normals", [](const Boundary& b) { return to_array(b.normals()); })
      .def_property_readonly("weights", [](const Boundary& b) { return b.weights(); })
      .def("contains", [](const Boundary& b, double x, double y) {
        return point_in_domain(b, Vec2(x, y));
      });

  m.def("make_circle", &make_circle, py::arg("n_nodes"), py::arg("radius") = 1.0,
        py::arg("knots") = 64);
  m.def("make_annulus", &make_annulus, py::arg("n_nodes"), py::arg("r_inner") = 0.5,
        py::arg("r_outer") = 1.0, py::arg("knots") = 256);
  m.def(
      "make_starfish",
      [](int n, const std::vector<double>& thetas) { return make_starfish(n, thetas); },
      py::arg("n_nodes"), py::arg("thetas") = std::vector<double>{0.0, 3.141592653589793});

  m.def(
      "boundary_data",
      [](const std::string& pde, const Boundary& b, const std::string& preset) {
        const SystemSpec spec = SystemSpec::make(pde_from(pde), b);
        return boundary_data(spec, b, {parse_data_preset(preset), {}});
      },
      py::arg("pde"), py::arg("boundary"), py::arg("preset"));

  py::class_<Factorization>(m, "Factorization")
      .def_property_readonly("size", &Factorization::size)
      .def_property_readonly("num_dofs", &Factorization::num_dofs)
      .def_property_readonly("stats", [](const Factorization& f) { return timings(f.stats()); })
      .def("apply", [](const Factorization& f, const Vector& x) { return f.apply(x); })
      .def("solve", [](const Factorization& f, const Vector& rhs) { return f.solve(rhs); })
      .def(
          "evaluate",
          [](const Factorization& f, const Vector& f_data,
             const Eigen::Ref<const Eigen::MatrixXd>& targets) {
            const std::vector<Vec2> t = from_array(targets);
            return f.evaluate_interior(f.solve_density(f_data), std::span<const Vec2>(t));
          },
          py::arg("boundary_data"), py::arg("targets"));

  m.def(
      "factor",
      [](const std::string& pde, const Boundary& b, double tol, int leaf_cap, int workers) {
        FactorOptions o;
        o.tol = tol;
        o.workers = workers;
        py::gil_scoped_release release;
        return Factorization::factor(SystemSpec::make(pde_from(pde), b), b,
                                     Tree::build(b, leaf_cap), o);
      },
      py::arg("pde"), py::arg("boundary"), py::arg("tol") = 1e-10, py::arg("leaf_cap") = 64,
      py::arg("workers") = 1);

  m.def(
      "apply_dense",
      [](const std::string& pde, const Boundary& b, const Vector& x) {
        return apply_dense(SystemSpec::make(pde_from(pde), b), b, x);
      },
      py::arg("pde"), py::arg("boundary"), py::arg("x"));

  m.def(
      "run_solve",
      [](const std::string& config_json) {
        const ExperimentConfig cfg = parse_config(config_json);
        validate_config(cfg);
        SolveReport r;
        {
          py::gil_scoped_release release;
          r = run_solve(cfg);
        }
        py::dict d;
        d["n_nodes"] = r.n_nodes;
        d["size"] = r.size;
        d["residual"] = r.residual;
        d["max_rel_error"] = r.max_rel_error ? py::cast(*r.max_rel_error) : py::none();
        d["grid_points"] = r.grid_points;
        d["factor_seconds"] = r.factor_seconds;
        d["solve_seconds"] = r.solve_seconds;
        d["field"] = r.field;
        return d;
      },
      py::arg("config_json"),
      "Runs a solve experiment from a JSON config and returns its report.");
}
