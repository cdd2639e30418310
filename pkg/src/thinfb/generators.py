"""
Named boundary-data and coefficient generators.

Every boundary generator returns a full ScalarField (even in x_{n+1}); the
box-boundary values are the Dirichlet data and the interior values seed the
free-boundary search.
"""

from __future__ import annotations

import math

import numpy as np

from .exact import ProfileParams, eval_U, profile_field
from .grid import ScalarField, SlitGrid
from .solve import CoefficientField, load_field


class GeneratorError(ValueError):
    pass


def _params(p: dict, allowed: dict) -> dict:
    unknown = set(p) - set(allowed)
    if unknown:
        raise GeneratorError(f"unknown generator parameters: {sorted(unknown)}")
    return {k: p.get(k, v) for k, v in allowed.items()}


def _tilt_coords(grid: SlitGrid, phi: float):
    """t = x . nu_phi (nu_phi rotated from e_n towards e_1 by phi) and s = x_{n+1}."""
    c = grid.coords()
    if grid.n == 1:
        if phi != 0:
            raise GeneratorError("an in-slit tilt needs n = 2")
        return c[0], c[1]
    return math.sin(phi) * c[0] + math.cos(phi) * c[1], c[2]


def bent_cone(t, s, bend: float):
    """U(t, s) + bend * Re((t + i s)^{3/2}); harmonic off {t <= 0, s = 0}, zero there."""
    rho = np.hypot(t, s)
    th = np.arctan2(s, t)
    return eval_U(t, s) + bend * rho**1.5 * np.cos(1.5 * th) * (rho > 0)


def boundary_field(grid: SlitGrid, name: str, params: dict = None) -> ScalarField:
    """Evaluate a named generator on the grid.

    U-trace {}                      U
    translated-U {b}                U(x_n + b, x_{n+1})
    tilted-U {phi, bend}            U(x.nu_phi, x_{n+1}) + bend Re((x.nu_phi + i x_{n+1})^{3/2})
    constant {c}                    c
    affine {c, slope}               c + slope . x  (slope in R^n, even in x_{n+1})
    profile {a, M, xi, t0}          V_{M, xi, a}(X + t0 e_n)
    custom {path}                   a field dump written by ``dump_field``
    """
    p = dict(params or {})
    if name == "U-trace":
        _params(p, {})
        return ScalarField.from_function(grid, lambda *c: eval_U(c[-2], c[-1]), even=True)
    if name == "translated-U":
        q = _params(p, {"b": 0.0})
        b = float(q["b"])
        return ScalarField.from_function(grid, lambda *c: eval_U(c[-2] + b, c[-1]), even=True)
    if name == "tilted-U":
        q = _params(p, {"phi": 0.0, "bend": 0.0})
        phi, bend = float(q["phi"]), float(q["bend"])
        if abs(phi) > 0.5 or not 0 <= bend <= 0.15:
            raise GeneratorError("tilted-U requires |phi| <= 0.5 and 0 <= bend <= 0.15")
        t, s = _tilt_coords(grid, phi)
        vals = np.maximum(bent_cone(t, s, bend), 0.0)
        return ScalarField.from_function(grid, lambda *c: vals, even=True)
    if name == "constant":
        q = _params(p, {"c": 1.0})
        c0 = float(q["c"])
        return ScalarField(grid, np.full(grid.shape, c0), even=True)
    if name == "affine":
        q = _params(p, {"c": 0.0, "slope": [0.0] * grid.n})
        slope = np.asarray(q["slope"], dtype=float)
        if slope.shape != (grid.n,):
            raise GeneratorError(f"slope must have {grid.n} components")
        c0 = float(q["c"])
        return ScalarField.from_function(
            grid, lambda *c: c0 + sum(si * ci for si, ci in zip(slope, c[:-1])) + 0 * c[-1],
            even=True)
    if name == "profile":
        q = _params(p, {"a": 0.0, "M": None, "xi": None, "t0": 0.0})
        prof = ProfileParams(grid.n, float(q["a"]), q["M"], q["xi"], float(q["t0"]))
        return profile_field(grid, prof)
    if name == "custom":
        q = _params(p, {"path": None})
        if not q["path"]:
            raise GeneratorError("custom generator needs a path")
        u = load_field(q["path"])
        if u.grid != grid:
            raise GeneratorError("custom field grid does not match the configured grid")
        return u
    raise GeneratorError(f"unknown boundary generator {name!r}")


BOUNDARY_GENERATORS = ("U-trace", "translated-U", "tilted-U", "constant", "affine", "profile",
                       "custom")
COEFFICIENTS = ("one", "radial", "sine")


def coefficient_field(grid: SlitGrid, name: str = "one", kappa: float = 0.0,
                      beta: float = 1.0) -> CoefficientField:
    """one: g = 1; radial: 1 + kappa |X|^beta; sine: 1 + kappa sin(pi x_n) |X|^beta."""
    if kappa < 0 or kappa >= 1:
        raise GeneratorError("kappa must lie in [0, 1)")
    if name == "one":
        return CoefficientField.ones(grid)
    if name == "radial":
        return CoefficientField.from_function(
            grid, lambda *c: 1 + kappa * np.sqrt(sum(ci**2 for ci in c)) ** beta)
    if name == "sine":
        return CoefficientField.from_function(
            grid, lambda *c: 1 + kappa * np.sin(np.pi * c[-2]) * np.sqrt(sum(ci**2 for ci in c)) ** beta)
    raise GeneratorError(f"unknown coefficient {name!r}")
