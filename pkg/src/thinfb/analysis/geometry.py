"""Free-boundary measure and Hausdorff distance between free boundaries."""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from ..grid import Ball, SlitMask


def free_boundary_measure(mask: SlitMask, region: Ball = None) -> float:
    """H^{n-1} of F inside the region: face count times h^{n-1} (n = 2), face count (n = 1).

    A face belongs to the region when its midpoint (on the slit) does.
    """
    g = mask.grid
    mids = mask.interface_midpoints()
    if region is not None:
        c = np.asarray(g._center(region.center))
        d = np.sqrt(((mids - c[: g.n]) ** 2).sum(axis=1) + c[-1] ** 2)
        mids = mids[d <= region.r * (1 + 1e-12)]
    return float(len(mids) * g.h ** (g.n - 1))


def _as_points(A) -> np.ndarray:
    if isinstance(A, SlitMask):
        return A.interface_midpoints()
    return np.atleast_2d(np.asarray(A, dtype=float))


def hausdorff_distance(A, B) -> float:
    """Symmetric Hausdorff distance between the interface midpoints of two masks (or point sets)."""
    a, b = _as_points(A), _as_points(B)
    if a.size == 0 or b.size == 0:
        raise ValueError("Hausdorff distance needs two nonempty sets")
    dab = cKDTree(b).query(a)[0].max()
    dba = cKDTree(a).query(b)[0].max()
    return float(max(dab, dba))
