"""Continuous piecewise affine interpolation of a matrix-valued function.

Each entry P_ij is affine on every simplex and matches the sampled values
at the vertices.  The per-simplex gradients w^nu_ij are recovered from the
vertex values through the inverse shape matrix; they are what the
verification constraints consume.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._parallel import map_chunks
from .errors import InputError
from .mesh import Triangulation, locate
from .recovery import RecoverySolution, sym_pairs


@dataclass
class CpaMetric:
    """Piecewise affine matrix field on a triangulation.

    ``vertex_P`` holds the symmetric matrix at every vertex; ``grads`` holds
    the constant gradient of each of the m = n(n+1)/2 upper-triangular
    entries on each simplex, ordered like :func:`sym_pairs`."""

    tri: Triangulation
    vertex_P: np.ndarray        # (V, n, n)
    grads: np.ndarray = None    # (S, m, n)

    def __post_init__(self):
        self.vertex_P = np.asarray(self.vertex_P, dtype=float)
        if self.vertex_P.shape[0] != self.tri.n_vertices:
            raise InputError("one matrix per triangulation vertex required")
        if self.grads is None:
            self.grads = compute_gradients(self.tri, self.vertex_P)

    @property
    def n(self) -> int:
        return self.tri.n

    def evaluate(self, x) -> np.ndarray:
        """Interpolated matrix P(x)."""
        nu, lam = locate(self.tri, np.asarray(x, dtype=float))
        return np.einsum("t,tij->ij", lam, self.vertex_P[self.tri.simplices[nu]])

    def gradient(self, nu: int) -> np.ndarray:
        """Entry gradients on simplex nu as a tensor D[i, j, p] = dP_ij/dx_p
        (constant on the simplex)."""
        n = self.n
        D = np.zeros((n, n, n))
        for a, (i, j) in enumerate(sym_pairs(n)):
            D[i, j] = D[j, i] = self.grads[nu, a]
        return D

    def orbital_term(self, nu: int, f_x) -> np.ndarray:
        """Matrix (w^nu_ij . f(x))_ij of directional derivatives along f."""
        n = self.n
        vals = self.grads[nu] @ np.asarray(f_x, dtype=float)
        out = np.zeros((n, n))
        for a, (i, j) in enumerate(sym_pairs(n)):
            out[i, j] = out[j, i] = vals[a]
        return out

    def export_csv(self, vertices_path, simplices_path) -> None:
        """Vertex table with matrix entries appended, plus the simplex table."""
        n = self.n
        pairs = sym_pairs(n)
        header = ("index,"
                  + ",".join(f"x{i+1}" for i in range(n)) + ","
                  + ",".join(f"P{i+1}{j+1}" for i, j in pairs))
        with open(vertices_path, "w") as fh:
            fh.write(header + "\n")
            for idx, (v, P) in enumerate(zip(self.tri.vertices, self.vertex_P)):
                row = [str(idx)]
                row += ["%.17g" % c for c in v]
                row += ["%.17g" % P[i, j] for i, j in pairs]
                fh.write(",".join(row) + "\n")
        with open(simplices_path, "w") as fh:
            fh.write("index," + ",".join(f"v{i}" for i in range(n + 1)) + "\n")
            for idx, row in enumerate(self.tri.simplices):
                fh.write(str(idx) + "," + ",".join(str(v) for v in row) + "\n")


def compute_gradients(tri: Triangulation, vertex_P: np.ndarray) -> np.ndarray:
    """Per-simplex entry gradients w^nu_ij = X_nu^{-1} (values at x_t minus
    value at x_0), vectorized over all simplices."""
    n = tri.n
    pairs = sym_pairs(n)
    pi = np.array([p[0] for p in pairs])
    pj = np.array([p[1] for p in pairs])
    vals = vertex_P[tri.simplices][:, :, pi, pj]         # (S, n+1, m)
    dv = vals[:, 1:, :] - vals[:, :1, :]                 # (S, n, m)
    return np.einsum("spq,sqa->sap", tri.shape_inv, dv)


def interpolate_metric(tri: Triangulation, rec: RecoverySolution,
                       threads: int = 1) -> CpaMetric:
    """Sample the recovered metric at the triangulation vertices and wrap
    the result as a piecewise affine field."""
    if tri.n != rec.n:
        raise InputError("triangulation and recovery dimensions differ")
    vertex_P = rec.evaluate_S_many(tri.vertices, threads=threads)
    return CpaMetric(tri=tri, vertex_P=vertex_P)
