"""Simplicial triangulations of axis-aligned boxes.

The standard triangulation splits every lattice cell of size rho into n!
simplices by the Kuhn (permutation) subdivision; for n = 2 this is the
familiar two-triangles-per-square mesh with a fixed diagonal.  Shape
matrices, diameters and degeneracy measures are computed for every simplex
at build time, so the (h, d)-boundedness is verified rather than assumed.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (DegenerateSimplexError, InputError, OutOfDomainError,
                     ResourceError)
from .systems import _as_box

_BARY_TOL = 1e-12


@dataclass
class Triangulation:
    vertices: np.ndarray        # (V, n)
    simplices: np.ndarray       # (S, n+1) vertex indices, first entry is x_0
    shape: np.ndarray = None      # (S, n, n), rows are edge vectors x_t - x_0
    shape_inv: np.ndarray = None  # (S, n, n)
    h: np.ndarray = None          # (S,) simplex diameters
    deg: np.ndarray = None        # (S,) h_nu * ||X_nu^{-1}||_1
    # grid metadata for O(1) point location (standard triangulations only)
    grid: dict = field(default=None, repr=False)

    def __post_init__(self):
        if self.shape is None:
            shape_and_bounds(self)

    @property
    def n(self) -> int:
        return self.vertices.shape[1]

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_simplices(self) -> int:
        return self.simplices.shape[0]

    def is_bounded(self, h: float, d: float) -> bool:
        """True if the triangulation is (h, d)-bounded."""
        return bool(np.all(self.h < h) and np.all(self.deg <= d))

    def simplex_boxes(self) -> np.ndarray:
        """Axis-aligned bounding boxes of all simplices, shape (S, n, 2)."""
        corners = self.vertices[self.simplices]          # (S, n+1, n)
        return np.stack([corners.min(axis=1), corners.max(axis=1)], axis=-1)

    def export_csv(self, vertices_path, simplices_path) -> None:
        n = self.n
        with open(vertices_path, "w") as fh:
            fh.write("index," + ",".join(f"x{i+1}" for i in range(n)) + "\n")
            for i, row in enumerate(self.vertices):
                fh.write(str(i) + "," + ",".join("%.17g" % v for v in row) + "\n")
        with open(simplices_path, "w") as fh:
            fh.write("index," + ",".join(f"v{i}" for i in range(n + 1)) + "\n")
            for i, row in enumerate(self.simplices):
                fh.write(str(i) + "," + ",".join(str(v) for v in row) + "\n")


def shape_and_bounds(tri: Triangulation) -> Triangulation:
    """Compute shape matrices, inverses, diameters and degeneracies."""
    verts = tri.vertices[tri.simplices]                  # (S, n+1, n)
    X = verts[:, 1:, :] - verts[:, :1, :]                # rows are edges
    det = np.linalg.det(X)
    scale = np.abs(X).max(axis=(1, 2))
    n = tri.n
    bad = np.abs(det) <= 1e-14 * np.maximum(scale, 1.0) ** n
    if np.any(bad):
        idx = int(np.nonzero(bad)[0][0])
        raise DegenerateSimplexError(
            f"simplex {idx} has affinely dependent vertices")
    Xinv = np.linalg.inv(X)
    # diameter: max pairwise vertex distance
    d2 = ((verts[:, :, None, :] - verts[:, None, :, :]) ** 2).sum(axis=-1)
    h = np.sqrt(d2.max(axis=(1, 2)))
    norm1 = np.abs(Xinv).sum(axis=1).max(axis=1)         # max column abs sum
    tri.shape, tri.shape_inv, tri.h, tri.deg = X, Xinv, h, h * norm1
    return tri


def standard_triangulation(box, rho: float,
                           max_vertices: int = 20_000_000) -> Triangulation:
    """Kuhn subdivision of the box on the lattice rho * Z^n.

    The box is expanded outward (upper bounds only) to the next multiple of
    rho per axis.  The result is (h, 2 sqrt(n))-bounded for any
    h > sqrt(n) * rho.
    """
    if rho <= 0:
        raise InputError("cell size rho must be positive")
    box = np.asarray(box, dtype=float)
    box = _as_box(box, box.shape[0])
    n = box.shape[0]
    ncells = np.maximum(
        np.ceil((box[:, 1] - box[:, 0]) / rho - 1e-9).astype(int), 1)
    nverts_axis = ncells + 1
    nv = int(np.prod(nverts_axis.astype(np.int64)))
    if nv > max_vertices:
        raise ResourceError(
            f"triangulation would need {nv} vertices (budget {max_vertices})")
    origin = box[:, 0]
    axes = [origin[d] + rho * np.arange(nverts_axis[d]) for d in range(n)]
    grids = np.meshgrid(*axes, indexing="ij")
    vertices = np.stack([g.ravel() for g in grids], axis=-1)

    # cell corner multi-indices, C order
    cell_axes = [np.arange(ncells[d]) for d in range(n)]
    cgrids = np.meshgrid(*cell_axes, indexing="ij")
    corners = np.stack([g.ravel() for g in cgrids], axis=-1)  # (C, n)
    perms = list(itertools.permutations(range(n)))
    strides = np.ones(n, dtype=np.int64)
    for d in range(n - 2, -1, -1):
        strides[d] = strides[d + 1] * nverts_axis[d + 1]
    corner_flat = corners @ strides                           # (C,)
    simp = np.empty((len(corner_flat), len(perms), n + 1), dtype=np.int64)
    for p_idx, perm in enumerate(perms):
        offset = np.int64(0)
        simp[:, p_idx, 0] = corner_flat
        for t, axis in enumerate(perm):
            offset = offset + strides[axis]
            simp[:, p_idx, t + 1] = corner_flat + offset
    simplices = simp.reshape(-1, n + 1)
    grid = {
        "origin": origin,
        "rho": float(rho),
        "ncells": ncells,
        "n_perms": len(perms),
        "perm_pos": {perm: i for i, perm in enumerate(perms)},
        "hi": origin + ncells * rho,
    }
    return Triangulation(vertices=vertices, simplices=simplices, grid=grid)


def locate(tri: Triangulation, x) -> tuple:
    """Locate x in the triangulation: returns (simplex index, barycentric
    weights lambda_0..lambda_n).  O(1) for standard triangulations."""
    x = np.asarray(x, dtype=float)
    if x.shape != (tri.n,):
        raise InputError(f"point must have shape ({tri.n},)")
    if tri.grid is not None:
        return _locate_grid(tri, x)
    return _locate_scan(tri, x)


def _locate_grid(tri, x):
    g = tri.grid
    origin, rho, ncells, hi = g["origin"], g["rho"], g["ncells"], g["hi"]
    tol = _BARY_TOL * max(1.0, float(np.abs(hi).max()))
    if np.any(x < origin - tol) or np.any(x > hi + tol):
        raise OutOfDomainError(f"point {x.tolist()} outside the triangulated box")
    cell = np.clip(((x - origin) / rho).astype(int), 0, ncells - 1)
    u = (x - (origin + cell * rho)) / rho
    u = np.clip(u, 0.0, 1.0)
    order = tuple(int(i) for i in np.argsort(-u, kind="stable"))
    n = tri.n
    us = u[list(order)]
    lam = np.empty(n + 1)
    lam[0] = 1.0 - us[0]
    lam[1:n] = us[:-1] - us[1:]
    lam[n] = us[-1]
    lam[(lam >= -_BARY_TOL) & (lam < 0.0)] = 0.0
    cell_flat = int(np.ravel_multi_index(cell, ncells)) if n > 1 else int(cell[0])
    nu = cell_flat * g["n_perms"] + g["perm_pos"][order]
    return nu, lam


def _locate_scan(tri, x):
    for nu in range(tri.n_simplices):
        verts = tri.vertices[tri.simplices[nu]]
        rel = x - verts[0]
        w = tri.shape_inv[nu].T @ rel
        lam = np.concatenate([[1.0 - w.sum()], w])
        if np.all(lam >= -_BARY_TOL):
            lam[(lam >= -_BARY_TOL) & (lam < 0.0)] = 0.0
            return nu, lam
    raise OutOfDomainError(f"point {x.tolist()} outside the triangulation")
