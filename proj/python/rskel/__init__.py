"""Fast direct solver for 2D boundary integral equations on multiply connected domains."""

from ._rskel import (
    Boundary,
    ConfigError,
    DataError,
    Factorization,
    GeometryError,
    apply_dense,
    boundary_data,
    factor,
    make_annulus,
    make_circle,
    make_starfish,
    run_solve,
)

__all__ = [
    "Boundary",
    "ConfigError",
    "DataError",
    "Factorization",
    "GeometryError",
    "apply_dense",
    "boundary_data",
    "factor",
    "make_annulus",
    "make_circle",
    "make_starfish",
    "run_solve",
]
