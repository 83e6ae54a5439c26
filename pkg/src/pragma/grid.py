"""Discretized parameter spaces and regions as boolean masks over them.

Set relations computed here are exact on the grid; they approximate the
continuum statements only up to grid resolution.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from .errors import ConfigError, GridMismatchError

DEFAULT_AXIS_COUNT = 201
DEFAULT_SIMPLEX_RESOLUTION = 200
DEFAULT_CURVE_KNOTS = 500


@dataclass(eq=False)
class ParameterGrid:
    """An ordered, immutable set of parameter points with its geometry."""

    points: np.ndarray
    geometry: dict
    axis_names: tuple = ()
    spacing: tuple = ()

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim != 2 or len(pts) == 0:
            raise ConfigError("grid points must be a non-empty (n, k) array")
        pts.setflags(write=False)
        self.points = pts
        if not self.axis_names:
            self.axis_names = tuple(f"theta{i + 1}" for i in range(pts.shape[1]))

    def __len__(self) -> int:
        return len(self.points)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def same_as(self, other: "ParameterGrid") -> bool:
        return self is other or (
            self.points.shape == other.points.shape and np.array_equal(self.points, other.points)
        )

    def to_config(self) -> dict:
        return dict(self.geometry)


def rectangular(bounds: Iterable[tuple[float, float]], counts: Iterable[int] | int, axis_names=()) -> ParameterGrid:
    """Row-major product grid (first axis varies slowest), endpoints included."""
    bounds = [tuple(map(float, b)) for b in bounds]
    counts = [int(counts)] * len(bounds) if np.isscalar(counts) else [int(c) for c in counts]
    if len(counts) != len(bounds) or not bounds:
        raise ConfigError("rectangular grid: need one count per axis")
    if len(bounds) > 3:
        raise ConfigError("rectangular grid: at most 3 axes")
    for (lo, hi), c in zip(bounds, counts):
        if not hi > lo:
            raise ConfigError(f"rectangular grid: degenerate bounds [{lo}, {hi}]")
        if c < 2:
            raise ConfigError(f"rectangular grid: need at least 2 points per axis, got {c}")
    axes = [np.linspace(lo, hi, c) for (lo, hi), c in zip(bounds, counts)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    geometry = {"type": "rectangular", "bounds": [list(b) for b in bounds], "counts": counts}
    spacing = tuple((hi - lo) / (c - 1) for (lo, hi), c in zip(bounds, counts))
    return ParameterGrid(pts, geometry, tuple(axis_names), spacing)


def simplex(resolution: int = DEFAULT_SIMPLEX_RESOLUTION) -> ParameterGrid:
    """All barycentric points (i/r, j/r, k/r) with i + j + k = r, lexicographic in (i, j)."""
    r = int(resolution)
    if r < 2:
        raise ConfigError(f"simplex grid: resolution must be >= 2, got {resolution}")
    ij = np.array([(i, j) for i in range(r + 1) for j in range(r + 1 - i)], dtype=float)
    pts = np.column_stack([ij[:, 0] / r, ij[:, 1] / r, (r - ij[:, 0] - ij[:, 1]) / r])
    return ParameterGrid(pts, {"type": "simplex", "resolution": r}, ("theta1", "theta2", "theta3"), (1.0 / r,))


def _hardy_weinberg(knots: int, lo: float = 0.0, hi: float = 1.0) -> np.ndarray:
    p = np.linspace(lo, hi, knots)
    return np.column_stack([p**2, 2 * p * (1 - p), (1 - p) ** 2])


def _diagonal(knots: int, lo: float = -1.0, hi: float = 1.0) -> np.ndarray:
    t = np.linspace(lo, hi, knots)
    return np.column_stack([t, t])


def _mean_line(knots: int, mu0: float = 0.0, lo: float = 0.01, hi: float = 1.0) -> np.ndarray:
    s = np.linspace(lo, hi, knots)
    return np.column_stack([np.full(knots, float(mu0)), s])


CURVES: dict[str, Callable[..., np.ndarray]] = {
    "hardy-weinberg": _hardy_weinberg,
    # {(t, t)}: equal means, e.g. bioequivalence
    "diagonal": _diagonal,
    # {mu0} x [lo, hi] in (mu, sigma^2) coordinates
    "mean-line": _mean_line,
}


def curve(name: str, knots: int = DEFAULT_CURVE_KNOTS, **params) -> ParameterGrid:
    """Equally spaced knots along a named curve in parameter space."""
    if name not in CURVES:
        raise ConfigError(f"curve grid: unknown curve {name!r}; known: {sorted(CURVES)}")
    if int(knots) < 2:
        raise ConfigError(f"curve grid: need at least 2 knots, got {knots}")
    try:
        pts = CURVES[name](int(knots), **params)
    except TypeError as exc:
        raise ConfigError(f"curve grid {name!r}: {exc}") from None
    names = ("theta1", "theta2", "theta3") if name == "hardy-weinberg" else ()
    if name == "mean-line":
        names = ("mu", "sigma2")
    return ParameterGrid(pts, {"type": "curve", "name": name, "knots": int(knots), **params}, names)


def from_points(points, axis_names=()) -> ParameterGrid:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    return ParameterGrid(pts, {"type": "points", "points": pts.tolist()}, tuple(axis_names))


def make_grid(geometry: dict) -> ParameterGrid:
    """Build a grid from a geometry description (see README for the schema)."""
    if not isinstance(geometry, dict) or "type" not in geometry:
        raise ConfigError("grid: expected an object with a 'type' field")
    g = dict(geometry)
    kind = g.pop("type")
    names = tuple(g.pop("axis_names", ()))
    if kind == "rectangular":
        if "bounds" not in g:
            raise ConfigError("grid.bounds: required for rectangular grids")
        counts = g.pop("counts", DEFAULT_AXIS_COUNT)
        grid = rectangular(g.pop("bounds"), counts, names)
    elif kind == "simplex":
        grid = simplex(g.pop("resolution", DEFAULT_SIMPLEX_RESOLUTION))
    elif kind == "curve":
        if "name" not in g:
            raise ConfigError("grid.name: required for curve grids")
        grid = curve(g.pop("name"), g.pop("knots", DEFAULT_CURVE_KNOTS), **g)
        g = {}
    elif kind == "points":
        grid = from_points(g.pop("points"), names)
    else:
        raise ConfigError(f"grid.type: unknown geometry {kind!r}")
    if g:
        raise ConfigError(f"grid: unexpected fields {sorted(g)}")
    if names and kind == "curve":
        grid.axis_names = names
    return grid


@dataclass(eq=False)
class GridRegion:
    """A subset of a grid, stored as a per-point membership mask."""

    grid: ParameterGrid
    mask: np.ndarray = field(repr=False)

    def __post_init__(self):
        mask = np.array(self.mask, dtype=bool).ravel()
        if mask.shape != (len(self.grid),):
            raise GridMismatchError(f"mask has {mask.size} entries, grid has {len(self.grid)} points")
        mask.setflags(write=False)
        self.mask = mask

    @property
    def count(self) -> int:
        return int(self.mask.sum())

    @property
    def points(self) -> np.ndarray:
        return self.grid.points[self.mask]

    def is_empty(self) -> bool:
        return not self.mask.any()

    def complement(self) -> "GridRegion":
        return GridRegion(self.grid, ~self.mask)

    def __or__(self, other: "GridRegion") -> "GridRegion":
        _check_same_grid(self, other)
        return GridRegion(self.grid, self.mask | other.mask)

    def __and__(self, other: "GridRegion") -> "GridRegion":
        _check_same_grid(self, other)
        return GridRegion(self.grid, self.mask & other.mask)

    def __eq__(self, other) -> bool:
        if not isinstance(other, GridRegion):
            return NotImplemented
        return self.grid.same_as(other.grid) and np.array_equal(self.mask, other.mask)

    __hash__ = None

    def __repr__(self) -> str:
        return f"GridRegion({self.count}/{len(self.grid)} points, {self.grid.geometry.get('type')})"


def _check_same_grid(a: GridRegion, b: GridRegion) -> None:
    if not a.grid.same_as(b.grid):
        raise GridMismatchError("regions are defined on different grids")


def region_from_predicate(grid: ParameterGrid, predicate: Callable, vectorized: bool = False) -> GridRegion:
    """mask[i] = predicate(points[i]); with ``vectorized`` the predicate gets all points at once."""
    if vectorized:
        return GridRegion(grid, np.asarray(predicate(grid.points), dtype=bool))
    return GridRegion(grid, np.fromiter((bool(predicate(p)) for p in grid.points), dtype=bool, count=len(grid)))


def full(grid: ParameterGrid) -> GridRegion:
    return GridRegion(grid, np.ones(len(grid), dtype=bool))


def empty(grid: ParameterGrid) -> GridRegion:
    return GridRegion(grid, np.zeros(len(grid), dtype=bool))


def subset(a: GridRegion, b: GridRegion) -> bool:
    _check_same_grid(a, b)
    return not np.any(a.mask & ~b.mask)


def disjoint(a: GridRegion, b: GridRegion) -> bool:
    """True when ``a`` lies in the complement of ``b``."""
    _check_same_grid(a, b)
    return not np.any(a.mask & b.mask)


def union(regions: Iterable[GridRegion]) -> GridRegion:
    regions = list(regions)
    if not regions:
        raise ConfigError("union of an empty collection has no grid")
    mask = np.zeros(len(regions[0].grid), dtype=bool)
    for r in regions:
        _check_same_grid(regions[0], r)
        mask |= r.mask
    return GridRegion(regions[0].grid, mask)


def intersection(regions: Iterable[GridRegion]) -> GridRegion:
    regions = list(regions)
    if not regions:
        raise ConfigError("intersection of an empty collection has no grid")
    mask = np.ones(len(regions[0].grid), dtype=bool)
    for r in regions:
        _check_same_grid(regions[0], r)
        mask &= r.mask
    return GridRegion(regions[0].grid, mask)


# ---------------------------------------------------------------------------
# export


def region_csv(region: GridRegion) -> str:
    """CSV text: one column per parameter axis then ``member`` in {0, 1}."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(region.grid.axis_names) + ["member"])
    for p, m in zip(region.grid.points, region.mask):
        w.writerow([repr(float(v)) for v in p] + [int(m)])
    return buf.getvalue()


def region_json(region: GridRegion) -> str:
    doc = {
        "geometry": region.grid.geometry,
        "axis_names": list(region.grid.axis_names),
        "n_points": len(region.grid),
        "member_count": region.count,
        "points": region.grid.points.tolist(),
        "member": region.mask.astype(int).tolist(),
    }
    return json.dumps(doc, indent=1) + "\n"


def write_region(region: GridRegion, csv_path, json_path=None) -> None:
    with open(csv_path, "w", newline="") as fh:
        fh.write(region_csv(region))
    if json_path is not None:
        with open(json_path, "w") as fh:
            fh.write(region_json(region))


def read_region_csv(path) -> GridRegion:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][-1] != "member":
        raise ConfigError(f"{path}: not a region CSV (last column must be 'member')")
    body = np.array([[float(v) for v in r] for r in rows[1:]])
    grid = from_points(body[:, :-1], tuple(rows[0][:-1]))
    return GridRegion(grid, body[:, -1] > 0.5)
