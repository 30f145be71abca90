"""Collocation point sets: hexagonal / rectangular grids, region predicates
and fill-distance estimation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .errors import ConfigurationError, InputError
from .systems import _as_box

_REL_EPS = 1e-9  # tolerance for lattice-in-box tests, relative to the spacing


class PolygonRegion:
    """Point-in-polygon predicate for a closed polygon (even-odd rule)."""

    def __init__(self, vertices):
        v = np.asarray(vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or v.shape[0] < 3:
            raise InputError("polygon needs at least 3 two-dimensional vertices")
        # drop an explicitly repeated closing vertex
        if np.array_equal(v[0], v[-1]):
            v = v[:-1]
        self.vertices = v

    @classmethod
    def from_csv(cls, path) -> "PolygonRegion":
        rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(rows)

    def contains(self, points) -> np.ndarray:
        p = np.atleast_2d(np.asarray(points, dtype=float))
        x, y = p[:, 0], p[:, 1]
        vx, vy = self.vertices[:, 0], self.vertices[:, 1]
        wx, wy = np.roll(vx, -1), np.roll(vy, -1)
        inside = np.zeros(len(p), dtype=bool)
        for ax, ay, bx, by in zip(vx, vy, wx, wy):
            crosses = (ay > y) != (by > y)
            with np.errstate(divide="ignore", invalid="ignore"):
                xint = ax + (y - ay) * (bx - ax) / (by - ay)
            inside ^= crosses & (x < xint)
        return inside

    def __call__(self, points):
        return self.contains(points)


class HalfplaneRegion:
    """Intersection of half-spaces A x <= b."""

    def __init__(self, A, b):
        self.A = np.atleast_2d(np.asarray(A, dtype=float))
        self.b = np.atleast_1d(np.asarray(b, dtype=float))
        if self.A.shape[0] != self.b.shape[0]:
            raise InputError("A and b row counts differ")

    def contains(self, points) -> np.ndarray:
        p = np.atleast_2d(np.asarray(points, dtype=float))
        return np.all(p @ self.A.T <= self.b[None, :], axis=1)

    def __call__(self, points):
        return self.contains(points)


def vanderpol_orbit_region() -> PolygonRegion:
    """Shipped polygon approximating the unstable periodic orbit of the
    van der Pol example (its basin boundary)."""
    path = Path(__file__).parent / "data" / "vanderpol_orbit.csv"
    return PolygonRegion.from_csv(path)


@dataclass
class CollocationSet:
    points: np.ndarray                 # (N, n), pairwise distinct
    box: np.ndarray                    # (n, 2)
    region: object = None              # optional predicate, callable on (M, n)
    fill: float = field(default=None)  # cached fill-distance estimate

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def to_csv(self, path) -> None:
        header = ",".join(f"x{i+1}" for i in range(self.dim))
        with open(path, "w") as fh:
            fh.write(header + "\n")
            for row in self.points:
                fh.write(",".join("%.17g" % v for v in row) + "\n")


def _apply_filters(points, box, region, what):
    eps = _REL_EPS * np.max(box[:, 1] - box[:, 0] + 1.0)
    keep = np.all((points >= box[:, 0] - eps) & (points <= box[:, 1] + eps),
                  axis=1)
    if region is not None:
        keep &= np.asarray(region(points), dtype=bool)
    points = points[keep]
    if points.shape[0] == 0:
        raise ConfigurationError(f"{what} produced no points in the region")
    return points


def hexagonal_grid(box, spacing: float, region=None) -> CollocationSet:
    """Hexagonal lattice {i a (1,0) + j a (1/2, sqrt(3)/2)} clipped to the
    box and the optional region predicate; two-dimensional only.

    Points are ordered lexicographically by (j, i)."""
    if spacing <= 0:
        raise InputError("spacing must be positive")
    box = np.asarray(box, dtype=float)
    if box.ndim != 2 or box.shape[0] != 2:
        raise ConfigurationError("hexagonal grids are only defined for n = 2")
    box = _as_box(box, 2)
    row_h = spacing * math.sqrt(3.0) / 2.0
    eps = _REL_EPS * spacing
    jlo = math.ceil((box[1, 0] - eps) / row_h)
    jhi = math.floor((box[1, 1] + eps) / row_h)
    pts = []
    for j in range(jlo, jhi + 1):
        y = j * row_h
        xoff = j * spacing / 2.0
        ilo = math.ceil((box[0, 0] - eps - xoff) / spacing)
        ihi = math.floor((box[0, 1] + eps - xoff) / spacing)
        for i in range(ilo, ihi + 1):
            pts.append((i * spacing + xoff, y))
    points = np.array(pts, dtype=float).reshape(len(pts), 2)
    points = _apply_filters(points, box, region, "hexagonal grid")
    return CollocationSet(points=points, box=box, region=region)


def rectangular_grid(box, spacing: float, region=None) -> CollocationSet:
    """Rectangular lattice spacing * Z^n clipped to the box and predicate;
    ordered lexicographically with the last coordinate slowest."""
    if spacing <= 0:
        raise InputError("spacing must be positive")
    box = np.asarray(box, dtype=float)
    box = _as_box(box, box.shape[0])
    n = box.shape[0]
    eps = _REL_EPS * spacing
    axes = []
    for d in range(n):
        lo = math.ceil((box[d, 0] - eps) / spacing)
        hi = math.floor((box[d, 1] + eps) / spacing)
        axes.append(np.arange(lo, hi + 1) * spacing)
    grids = np.meshgrid(*axes, indexing="ij")
    points = np.stack([g.ravel(order="F") for g in grids], axis=-1)
    points = _apply_filters(points, box, region, "rectangular grid")
    return CollocationSet(points=points, box=box, region=region)


def fill_distance(cset: CollocationSet, probe_density: int = 400) -> float:
    """Estimate the fill distance sup_{x in Omega} min_k |x - x_k| on a
    probe grid with ``probe_density`` points per axis (restricted to the
    region predicate); the result is cached on the set."""
    if probe_density < 2:
        raise InputError("probe_density must be at least 2 per axis")
    axes = [np.linspace(lo, hi, probe_density) for lo, hi in cset.box]
    grids = np.meshgrid(*axes, indexing="ij")
    probes = np.stack([g.ravel() for g in grids], axis=-1)
    if cset.region is not None:
        probes = probes[np.asarray(cset.region(probes), dtype=bool)]
    tree = cKDTree(cset.points)
    dists, _ = tree.query(probes, k=1)
    fill = float(dists.max()) if len(dists) else 0.0
    cset.fill = fill
    return fill
