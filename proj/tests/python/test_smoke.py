import json

import numpy as np
import pytest

rskel = pytest.importorskip("rskel")


def test_starfish_geometry():
    b = rskel.make_starfish(1024)
    assert b.num_nodes == 1024
    assert b.num_holes == 2
    assert b.points.shape == (1024, 2)
    assert np.allclose(np.linalg.norm(b.normals, axis=1), 1.0)
    assert b.contains(0.0, 0.0)
    assert not b.contains(2.0, 0.0)


@pytest.mark.parametrize("pde", ["laplace", "stokes"])
def test_solve_inverts_apply(pde):
    b = rskel.make_starfish(512)
    f = rskel.factor(pde, b, tol=1e-10)
    rng = np.random.default_rng(3)
    x = rng.standard_normal(f.size)
    assert np.linalg.norm(f.solve(f.apply(x)) - x) <= 1e-8 * np.linalg.norm(x)


def test_residual_against_dense_product():
    b = rskel.make_starfish(1024)
    f = rskel.factor("stokes", b, tol=1e-8)
    rhs = np.zeros(f.size)
    rhs[: f.num_dofs] = rskel.boundary_data("stokes", b, "dirichlet_source_sink")
    x = f.solve(rhs)
    res = rskel.apply_dense("stokes", b, x) - rhs
    assert np.linalg.norm(res) <= 1e-6 * np.linalg.norm(rhs)


def test_couette_interior_field():
    b = rskel.make_annulus(1024)
    f = rskel.factor("stokes", b)
    data = rskel.boundary_data("stokes", b, "annulus_couette")
    u = f.evaluate(data, np.array([[0.75, 0.0], [0.0, -0.6]]))
    # u_theta = A r + B / r with u_theta(1) = 1, u_theta(1/2) = 0
    a, c = 4.0 / 3.0, -1.0 / 3.0
    speed = lambda r: a * r + c / r
    assert u[1] == pytest.approx(speed(0.75), abs=1e-8)
    assert u[2] == pytest.approx(speed(0.6), abs=1e-8)
    assert abs(u[0]) < 1e-8 and abs(u[3]) < 1e-8


def test_run_solve_config():
    cfg = {"experiment": "solve", "pde": "laplace", "output_dir": "",
           "geometry": {"preset": "starfish", "n_nodes": 1024}, "grid_resolution": 10}
    r = rskel.run_solve(json.dumps(cfg))
    assert r["n_nodes"] == 1024
    assert r["residual"] < 1e-8
    assert r["grid_points"] > 0


def test_bad_config_raises():
    with pytest.raises(ValueError):
        rskel.run_solve(json.dumps({"geometry": {"preset": "triangle"}}))
