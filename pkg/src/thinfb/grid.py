"""
Slit-aware uniform grids on boxes in R^{n+1}.

Points are written X = (x, x_{n+1}) with x in R^n. The box [-w, w]^{n+1} is
sampled with spacing h; the node layer {x_{n+1} = 0} is the slit. Axis order
of every node array is (x_1, ..., x_n, x_{n+1}), so the last axis is the
vertical one and ``values[..., grid.mid]`` is the slit trace.

The zero set and free boundary of a field live on slit *cells* (the dual
grid of the slit layer), see :class:`SlitMask`.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Callable, Sequence, Union

import numpy as np
from scipy import ndimage

INTERIOR, SLIT, BOX = 0, 1, 2


class GridConfigError(ValueError):
    """Raised for grid parameters that do not describe a valid slit grid."""


@dataclass(frozen=True)
class SlitGrid:
    """Uniform node lattice on [-halfwidth, halfwidth]^{n+1}.

    Attributes:
        n: dimension of the slit hyperplane (1 or 2).
        h: grid spacing.
        halfwidth: box half-side; ``halfwidth / h`` is an exact integer.
    """

    n: int
    h: float
    halfwidth: float

    def __post_init__(self):
        if self.n not in (1, 2):
            raise GridConfigError(f"slit dimension n must be 1 or 2, got {self.n}")
        if not (self.h > 0 and self.halfwidth > 0):
            raise GridConfigError("h and halfwidth must be positive")
        if not (math.isfinite(self.h) and math.isfinite(self.halfwidth)):
            raise GridConfigError("h and halfwidth must be finite")
        # exact rational check on the binary values, so e.g. h = 1/3 is rejected
        ratio = Fraction(self.halfwidth) / Fraction(self.h)
        if ratio.denominator != 1:
            raise GridConfigError(
                f"spacing h={self.h!r} does not divide halfwidth={self.halfwidth!r} exactly"
            )

    # ------------------------------------------------------------------ sizes
    @property
    def dim(self) -> int:
        return self.n + 1

    @property
    def m(self) -> int:
        """Number of cells from the center to the box side."""
        return int(Fraction(self.halfwidth) / Fraction(self.h))

    @property
    def N(self) -> int:
        """Nodes per axis."""
        return 2 * self.m + 1

    @property
    def mid(self) -> int:
        """Index of the coordinate 0 along any axis (slit layer on the last axis)."""
        return self.m

    @property
    def shape(self) -> tuple:
        return (self.N,) * self.dim

    @property
    def cell_shape(self) -> tuple:
        return (self.N - 1,) * self.dim

    @property
    def slit_shape(self) -> tuple:
        return (self.N,) * self.n

    @property
    def slit_cell_shape(self) -> tuple:
        return (self.N - 1,) * self.n

    @property
    def size(self) -> int:
        return self.N**self.dim

    def params(self) -> dict:
        return {"n": self.n, "h": self.h, "halfwidth": self.halfwidth}

    # ------------------------------------------------------------ coordinates
    @cached_property
    def axis(self) -> np.ndarray:
        """1-D node coordinates along every axis (exact for dyadic spacings)."""
        return (np.arange(self.N) - self.m) * self.h

    @cached_property
    def cell_axis(self) -> np.ndarray:
        return (np.arange(self.N - 1) - self.m + 0.5) * self.h

    def coords(self) -> list:
        """Broadcastable coordinate arrays ``[x_1, ..., x_{n+1}]`` (open mesh)."""
        return list(np.ix_(*([self.axis] * self.dim)))

    def cell_coords(self) -> list:
        return list(np.ix_(*([self.cell_axis] * self.dim)))

    def slit_coords(self) -> list:
        return list(np.ix_(*([self.axis] * self.n)))

    def slit_cell_coords(self) -> list:
        return list(np.ix_(*([self.cell_axis] * self.n)))

    def points(self, flat_index: np.ndarray) -> np.ndarray:
        """Coordinates (k, n+1) of the nodes with the given flat indices."""
        idx = np.unravel_index(np.asarray(flat_index), self.shape)
        return np.stack([self.axis[i] for i in idx], axis=-1)

    # ---------------------------------------------------- node classification
    @cached_property
    def node_class(self) -> np.ndarray:
        """INTERIOR / SLIT / BOX code per node; slit takes precedence over box."""
        cls = np.full(self.shape, INTERIOR, dtype=np.int8)
        cls[self.on_box_boundary] = BOX
        cls[..., self.mid] = SLIT
        return cls

    @cached_property
    def on_box_boundary(self) -> np.ndarray:
        edge = np.zeros(self.N, dtype=bool)
        edge[[0, -1]] = True
        out = np.zeros(self.shape, dtype=bool)
        for d in range(self.dim):
            shape = [1] * self.dim
            shape[d] = self.N
            out |= edge.reshape(shape)
        return out

    @cached_property
    def slit_on_box_boundary(self) -> np.ndarray:
        return self.on_box_boundary[..., self.mid]

    @cached_property
    def dist_to_L(self) -> np.ndarray:
        """Distance of every node to L = {x_n = 0, x_{n+1} = 0}."""
        c = self.coords()
        return np.broadcast_to(np.hypot(c[-2], c[-1]), self.shape)

    @cached_property
    def on_P(self) -> np.ndarray:
        """Nodes of the closed half-hyperplane P = {x_n <= 0, x_{n+1} = 0}."""
        c = self.coords()
        return np.broadcast_to((c[-2] <= 0) & (c[-1] == 0), self.shape)

    def radius(self, center=None) -> np.ndarray:
        """|X - center| at every node."""
        c = self.coords()
        center = self._center(center)
        r2 = sum((ci - ce) ** 2 for ci, ce in zip(c, center))
        return np.sqrt(np.broadcast_to(r2, self.shape))

    def cell_radius(self, center=None) -> np.ndarray:
        c = self.cell_coords()
        center = self._center(center)
        r2 = sum((ci - ce) ** 2 for ci, ce in zip(c, center))
        return np.sqrt(np.broadcast_to(r2, self.cell_shape))

    def _center(self, center) -> tuple:
        if center is None:
            return (0.0,) * self.dim
        center = tuple(float(v) for v in np.ravel(center))
        if len(center) != self.dim:
            raise ValueError(f"center must have {self.dim} coordinates")
        return center


def build_grid(n: int, h: float, halfwidth: float = 1.0) -> SlitGrid:
    """Build a slit grid; raises :class:`GridConfigError` on non-divisible spacing."""
    return SlitGrid(int(n), float(h), float(halfwidth))


# ---------------------------------------------------------------------------
# Regions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Ball:
    """Closed ball B_r(center); ``center`` defaults to the origin."""

    r: float
    center: tuple = None

    def node_mask(self, grid: SlitGrid) -> np.ndarray:
        return grid.radius(self.center) <= self.r * (1 + 1e-12)

    def cell_mask(self, grid: SlitGrid) -> np.ndarray:
        return grid.cell_radius(self.center) <= self.r * (1 + 1e-12)

    def slit_cell_mask(self, grid: SlitGrid) -> np.ndarray:
        center = grid._center(self.center)
        c = grid.slit_cell_coords()
        r2 = sum((ci - ce) ** 2 for ci, ce in zip(c, center[:-1])) + center[-1] ** 2
        return np.broadcast_to(np.sqrt(r2), grid.slit_cell_shape) <= self.r * (1 + 1e-12)

    def describe(self) -> dict:
        return {"ball": {"r": self.r, "center": list(self.center or ())}}


Region = Union[None, Ball, np.ndarray]


def region_nodes(grid: SlitGrid, region: Region) -> np.ndarray:
    """Boolean node mask for a region (None = whole box, Ball, index or bool array)."""
    if region is None:
        return np.ones(grid.shape, dtype=bool)
    if isinstance(region, Ball):
        return region.node_mask(grid)
    region = np.asarray(region)
    if region.dtype == bool:
        if region.shape != grid.shape:
            raise ValueError("boolean region must have the grid shape")
        return region
    out = np.zeros(grid.size, dtype=bool)
    out[region.ravel()] = True
    return out.reshape(grid.shape)


def _corner_all(mask: np.ndarray) -> np.ndarray:
    """True on cells (dual grid) whose every corner node is True in ``mask``."""
    out = mask
    for d in range(mask.ndim):
        lo = [slice(None)] * mask.ndim
        hi = [slice(None)] * mask.ndim
        lo[d] = slice(None, -1)
        hi[d] = slice(1, None)
        out = out[tuple(lo)] & out[tuple(hi)]
    return out


def region_cells(grid: SlitGrid, region: Region) -> np.ndarray:
    """Cells counted as inside a region: center in the ball, or all corners in the node set."""
    if region is None:
        return np.ones(grid.cell_shape, dtype=bool)
    if isinstance(region, Ball):
        return region.cell_mask(grid)
    return _corner_all(region_nodes(grid, region))


def region_slit_cells(grid: SlitGrid, region: Region) -> np.ndarray:
    if region is None:
        return np.ones(grid.slit_cell_shape, dtype=bool)
    if isinstance(region, Ball):
        return region.slit_cell_mask(grid)
    return _corner_all(region_nodes(grid, region)[..., grid.mid])


def describe_region(region: Region) -> object:
    if region is None:
        return "box"
    if isinstance(region, Ball):
        return region.describe()
    return {"nodes": int(np.count_nonzero(region)) if np.asarray(region).dtype == bool
            else int(np.size(region))}


def ball_nodes(grid: SlitGrid, center, r: float) -> np.ndarray:
    """Flat indices (ascending) of all nodes with |X - center| <= r."""
    return np.flatnonzero(Ball(float(r), tuple(np.ravel(center)) if center is not None
                               else None).node_mask(grid))


# ---------------------------------------------------------------------------
# Fields and masks
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ScalarField:
    """One real value per node of ``grid``.

    When ``even`` is set the values are exactly symmetric under
    x_{n+1} -> -x_{n+1}.
    """

    grid: SlitGrid
    values: np.ndarray
    even: bool = False

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != self.grid.shape:
            raise ValueError(f"values shape {values.shape} != grid shape {self.grid.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("field values must be finite")
        if self.even and not np.array_equal(values, values[..., ::-1]):
            raise ValueError("field flagged even is not symmetric in x_{n+1}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, grid: SlitGrid, f: Callable, even: bool = False) -> "ScalarField":
        """Sample ``f(x_1, ..., x_{n+1})`` (broadcasting coordinate arrays) at the nodes."""
        vals = np.broadcast_to(np.asarray(f(*grid.coords()), dtype=float), grid.shape)
        vals = np.array(vals)
        if even:
            vals = 0.5 * (vals + vals[..., ::-1])
        return cls(grid, vals, even)

    @property
    def slit(self) -> np.ndarray:
        """Trace on the slit layer, shape ``grid.slit_shape``."""
        return self.values[..., self.grid.mid]

    def with_values(self, values, even: bool = None) -> "ScalarField":
        return ScalarField(self.grid, values, self.even if even is None else even)

    def __sub__(self, other: "ScalarField") -> "ScalarField":
        return ScalarField(self.grid, self.values - other.values, self.even and other.even)

    def __add__(self, other: "ScalarField") -> "ScalarField":
        return ScalarField(self.grid, self.values + other.values, self.even and other.even)

    def scaled(self, c: float) -> "ScalarField":
        return ScalarField(self.grid, c * self.values, self.even)

    def sample(self, points: np.ndarray) -> np.ndarray:
        """Multilinear interpolation at arbitrary points (k, n+1) inside the box."""
        g = self.grid
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        s = (pts + g.halfwidth) / g.h
        if np.any(s < -1e-9) or np.any(s > g.N - 1 + 1e-9):
            raise ValueError("sample points outside the grid box")
        s = np.clip(s, 0, g.N - 1)
        i0 = np.minimum(np.floor(s).astype(np.int64), g.N - 2)
        w = s - i0
        out = np.zeros(len(pts))
        for corner in itertools.product((0, 1), repeat=g.dim):
            idx = tuple(i0[:, d] + corner[d] for d in range(g.dim))
            wt = np.ones(len(pts))
            for d in range(g.dim):
                wt *= w[:, d] if corner[d] else 1.0 - w[:, d]
            out += wt * self.values[idx]
        return out


def _slit_cells_from_nodes(node_pos: np.ndarray) -> np.ndarray:
    return _corner_all(node_pos)


@dataclass(frozen=True, eq=False)
class SlitMask:
    """Positivity indicator on slit cells.

    ``positive`` has shape ``grid.slit_cell_shape``. The zero set Z is the
    union of the closed zero cells; the free boundary F is the set of cell
    interfaces separating a positive from a zero cell.
    """

    grid: SlitGrid
    positive: np.ndarray

    def __post_init__(self):
        pos = np.asarray(self.positive, dtype=bool)
        if pos.shape != self.grid.slit_cell_shape:
            raise ValueError("mask shape must equal grid.slit_cell_shape")
        pos = pos.copy()
        pos.setflags(write=False)
        object.__setattr__(self, "positive", pos)

    # ------------------------------------------------------------ constructors
    @classmethod
    def from_predicate(cls, grid: SlitGrid, pred: Callable) -> "SlitMask":
        """Cells whose center satisfies ``pred(x_1, ..., x_n)``."""
        pos = np.broadcast_to(pred(*grid.slit_cell_coords()), grid.slit_cell_shape)
        return cls(grid, np.array(pos, dtype=bool))

    @classmethod
    def halfspace(cls, grid: SlitGrid, offset: float = 0.0, nu=None) -> "SlitMask":
        """Cells with center satisfying x . nu > offset (nu defaults to e_n)."""
        nu = np.eye(grid.n)[-1] if nu is None else np.asarray(nu, dtype=float)
        return cls.from_predicate(
            grid, lambda *x: sum(xi * vi for xi, vi in zip(x, nu)) > offset
        )

    @classmethod
    def from_field(cls, u: ScalarField) -> "SlitMask":
        """Cells on which u > 0 at every slit node."""
        return cls(u.grid, _slit_cells_from_nodes(u.slit > 0))

    # -------------------------------------------------------------- derived
    @property
    def zero(self) -> np.ndarray:
        return ~self.positive

    def node_touches(self, cells: np.ndarray) -> np.ndarray:
        """Slit nodes that are a corner of at least one True cell."""
        n = self.grid.n
        out = np.zeros(self.grid.slit_shape, dtype=bool)
        for corner in itertools.product((0, 1), repeat=n):
            sl = tuple(slice(c, c + self.grid.N - 1) for c in corner)
            out[sl] |= cells
        return out

    @cached_property
    def zero_nodes(self) -> np.ndarray:
        """Slit nodes with no adjacent positive cell (constrained to vanish)."""
        return ~self.node_touches(self.positive)

    @cached_property
    def z_nodes(self) -> np.ndarray:
        """Slit nodes of the closed zero set Z (corners of zero cells)."""
        return self.node_touches(self.zero)

    @cached_property
    def _interfaces(self) -> list:
        """Per axis: boolean arrays marking interfaces between neighbouring cells."""
        out = []
        pos = self.positive
        for d in range(self.grid.n):
            lo = [slice(None)] * self.grid.n
            hi = [slice(None)] * self.grid.n
            lo[d] = slice(None, -1)
            hi[d] = slice(1, None)
            out.append(pos[tuple(lo)] != pos[tuple(hi)])
        return out

    @property
    def interface_count(self) -> int:
        return int(sum(np.count_nonzero(f) for f in self._interfaces))

    def interface_faces(self) -> list:
        """List of (axis, cell index array k) with interfaces between cell k and k + e_axis."""
        return [(d, np.argwhere(f)) for d, f in enumerate(self._interfaces)]

    def interface_midpoints(self) -> np.ndarray:
        """Midpoints (k, n) of all free-boundary faces, in slit coordinates."""
        g = self.grid
        pts = []
        for d, idx in self.interface_faces():
            if len(idx) == 0:
                continue
            p = g.cell_axis[idx]
            p[:, d] = g.axis[idx[:, d] + 1]
            pts.append(p)
        if not pts:
            return np.zeros((0, g.n))
        return np.concatenate(pts, axis=0)

    def interface_face_nodes(self) -> list:
        """For every face, the slit-node multi-indices of its corners (list of (k, n) arrays)."""
        g = self.grid
        out = []
        for d, idx in self.interface_faces():
            for corner in itertools.product((0, 1), repeat=g.n - 1):
                node = idx.copy()
                node[:, d] += 1
                others = [e for e in range(g.n) if e != d]
                for e, c in zip(others, corner):
                    node[:, e] += c
                out.append(node)
        return out

    @cached_property
    def f_nodes(self) -> np.ndarray:
        """Slit nodes lying on the closed free boundary F."""
        out = np.zeros(self.grid.slit_shape, dtype=bool)
        for nodes in self.interface_face_nodes():
            if len(nodes):
                out[tuple(nodes.T)] = True
        return out


# ---------------------------------------------------------------------------
# Distances
# ---------------------------------------------------------------------------


@dataclass
class DistanceFields:
    d_Z: np.ndarray
    d_F: np.ndarray
    z_empty: bool
    f_empty: bool


def _distance_to_slit_set(grid: SlitGrid, nodes: np.ndarray) -> tuple:
    if not nodes.any():
        return np.full(grid.shape, np.inf), True
    planar = ndimage.distance_transform_edt(~nodes, sampling=grid.h)
    vert = grid.coords()[-1]
    d = np.sqrt(planar[..., None] ** 2 + vert**2)
    return np.broadcast_to(d, grid.shape).copy(), False


def distance_to_sets(grid: SlitGrid, mask: SlitMask) -> DistanceFields:
    """Exact Euclidean distances from every node to Z and to F.

    Both sets are unions of closed lattice-aligned slit cells/faces, so the
    nearest point to a node is always a lattice node of the set; the planar
    part is an exact Euclidean distance transform of the slit layer.
    """
    if mask.grid != grid:
        raise ValueError("mask belongs to a different grid")
    d_z, z_empty = _distance_to_slit_set(grid, mask.z_nodes)
    d_f, f_empty = _distance_to_slit_set(grid, mask.f_nodes)
    return DistanceFields(d_z, d_f, z_empty, f_empty)


def slit_node_points(grid: SlitGrid, nodes: np.ndarray) -> np.ndarray:
    """Coordinates (k, n+1) of the slit nodes flagged in a slit-shaped bool array."""
    idx = np.argwhere(nodes)
    pts = np.zeros((len(idx), grid.dim))
    pts[:, : grid.n] = grid.axis[idx]
    return pts
