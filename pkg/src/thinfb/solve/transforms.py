"""Symmetrization and blow-up rescaling of grid fields."""

from __future__ import annotations

import numpy as np

from ..grid import ScalarField, SlitGrid


def even_part(u: ScalarField) -> ScalarField:
    """u_e(x, x_{n+1}) = (u(x, x_{n+1}) + u(x, -x_{n+1})) / 2."""
    v = u.values
    return ScalarField(u.grid, 0.5 * (v + v[..., ::-1]), even=True)


def blowup_rescale(u: ScalarField, rho: float, center=None,
                   target: SlitGrid = None) -> ScalarField:
    """u_rho(X) = rho^{-1/2} u(center + rho X), sampled on ``target`` (default: u's grid).

    Off-lattice points are interpolated multilinearly. ``center`` must lie on
    the slit so that the rescaled field stays even when u is.
    """
    if not rho > 0:
        raise ValueError("rho must be positive")
    g = u.grid
    target = target or g
    if target.n != g.n:
        raise ValueError("target grid has a different dimension")
    c = np.zeros(g.dim) if center is None else np.asarray(center, dtype=float)
    if c.shape != (g.dim,):
        raise ValueError(f"center must have {g.dim} coordinates")
    reach = np.abs(c) + rho * target.halfwidth
    if np.any(reach > g.halfwidth * (1 + 1e-12)):
        raise ValueError(f"rho = {rho} maps the target box outside the source grid")
    if rho == 1.0 and target == g and not np.any(c):
        return u
    pts = np.stack(np.meshgrid(*([target.axis] * target.dim), indexing="ij"), axis=-1)
    q = c + rho * pts.reshape(-1, target.dim)
    vals = u.sample(q).reshape(target.shape) / np.sqrt(rho)
    even = u.even and c[-1] == 0
    if even:
        vals = 0.5 * (vals + vals[..., ::-1])
    return ScalarField(target, vals, even)
