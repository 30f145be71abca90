"""Rigorous feasibility check of a piecewise affine metric candidate.

The candidate P passes on a simplex nu when, at every vertex x_k of nu,

    P(x_k) >= eps0 I                                         (definiteness)
    lambda_max( P Df + Df^T P + (w^nu_ij . f)_ij ) + h_nu^2 E_nu <= -eps0

with the interpolation-error constant

    E_nu = n^2 (1 + 4 sqrt(n)) B_nu D_nu + 2 n^3 B3_nu C_nu,

where B_nu and B3_nu bound the second and third derivatives of f on the
simplex, C_nu = max vertex ||P||_2 and D_nu = max_{i<=j} ||w^nu_ij||_1.
A pass certifies the negative-definiteness condition everywhere on the
simplex, not just at its vertices.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .cpa import CpaMetric, sym_pairs
from .errors import InputError
from .systems import SystemModel

MARGINAL_TOL = 1e-8


def sym_eig_range(M: np.ndarray) -> tuple:
    """(lambda_min, lambda_max) arrays for a batch (..., n, n) of symmetric
    matrices; closed form for n = 2, eigvalsh otherwise."""
    n = M.shape[-1]
    if n == 2:
        a, b, d = M[..., 0, 0], M[..., 0, 1], M[..., 1, 1]
        mean = 0.5 * (a + d)
        rad = np.sqrt((0.5 * (a - d)) ** 2 + b ** 2)
        return mean - rad, mean + rad
    w = np.linalg.eigvalsh(M)
    return w[..., 0], w[..., -1]


@dataclass
class VerificationConfig:
    eps0: float = None           # default 1e-6 * lambda_min(C)
    C: np.ndarray = None         # right-hand side used for the default eps0
    bound_granularity: str = "per-simplex"   # or "global"
    marginal_tol: float = MARGINAL_TOL

    def resolve_eps0(self) -> float:
        if self.eps0 is not None:
            if self.eps0 <= 0:
                raise InputError("eps0 must be positive")
            return float(self.eps0)
        if self.C is None:
            raise InputError("eps0 needs either an explicit value or C")
        return 1e-6 * float(np.linalg.eigvalsh(np.asarray(self.C)).min())


@dataclass
class VerificationReport:
    eps0: float
    # per-vertex
    lambda_min_P: np.ndarray     # (V,)
    c1_pass: np.ndarray          # (V,) bool
    vertex_c4_pass: np.ndarray   # (V,) bool: all incident simplices pass
    # per-simplex
    C_nu: np.ndarray             # (S,)
    D_nu: np.ndarray             # (S,)
    E_nu: np.ndarray             # (S,)
    h_nu: np.ndarray             # (S,)
    worst: np.ndarray            # (S,) max over vertices of lambda_max + h^2 E
    c4_pass: np.ndarray          # (S,) bool
    marginal: np.ndarray         # (S,) bool: passed within marginal_tol
    summary: dict = field(default=None)

    def __post_init__(self):
        if self.summary is None:
            self.summary = {
                "eps0": self.eps0,
                "n_vertices": int(len(self.lambda_min_P)),
                "n_simplices": int(len(self.c4_pass)),
                "c1_pass_count": int(self.c1_pass.sum()),
                "c4_pass_count": int(self.c4_pass.sum()),
                "c1_fraction": float(self.c1_pass.mean()),
                "c4_fraction": float(self.c4_pass.mean()),
                "marginal_count": int(self.marginal.sum()),
                "min_lambda_min_P": float(self.lambda_min_P.min()),
                "max_worst": float(self.worst.max()),
                "verified": bool(self.c1_pass.all() and self.c4_pass.all()),
            }

    @property
    def verified(self) -> bool:
        return self.summary["verified"]

    def write_vertex_csv(self, path, vertices) -> None:
        n = vertices.shape[1]
        head = ("index," + ",".join(f"x{i+1}" for i in range(n))
                + ",lambda_min,c1_pass,c4_pass")
        with open(path, "w") as fh:
            fh.write(head + "\n")
            for i, v in enumerate(vertices):
                fh.write("%d,%s,%.17g,%d,%d\n" % (
                    i, ",".join("%.17g" % c for c in v),
                    self.lambda_min_P[i],
                    int(self.c1_pass[i]), int(self.vertex_c4_pass[i])))

    def write_simplex_csv(self, path) -> None:
        head = "index,C_nu,D_nu,E_nu,h_nu,worst,c4_pass,marginal"
        with open(path, "w") as fh:
            fh.write(head + "\n")
            for i in range(len(self.c4_pass)):
                fh.write("%d,%.17g,%.17g,%.17g,%.17g,%.17g,%d,%d\n" % (
                    i, self.C_nu[i], self.D_nu[i], self.E_nu[i],
                    self.h_nu[i], self.worst[i],
                    int(self.c4_pass[i]), int(self.marginal[i])))

    def write_summary_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.summary, fh, indent=2, sort_keys=True)


def error_constants(sys: SystemModel, cpa: CpaMetric,
                    granularity: str = "per-simplex"):
    """(C_nu, D_nu, E_nu) arrays over all simplices."""
    tri = cpa.tri
    n = tri.n
    # C_nu: largest spectral norm of P over the simplex vertices
    _, lmax = sym_eig_range(cpa.vertex_P)
    lmin, _ = sym_eig_range(cpa.vertex_P)
    vert_norm = np.maximum(np.abs(lmax), np.abs(lmin))
    C_nu = vert_norm[tri.simplices].max(axis=1)
    # D_nu: largest 1-norm of an entry gradient
    D_nu = np.abs(cpa.grads).sum(axis=2).max(axis=1)
    if granularity == "global":
        box = np.stack([tri.vertices.min(axis=0), tri.vertices.max(axis=0)],
                       axis=1)
        B2 = np.full(tri.n_simplices, sys.bound2(box))
        B3 = np.full(tri.n_simplices, sys.bound3(box))
    elif granularity == "per-simplex":
        boxes = tri.simplex_boxes()
        B2 = sys.bound2_many(boxes)
        B3 = sys.bound3_many(boxes)
    else:
        raise InputError(
            "bound_granularity must be 'per-simplex' or 'global'")
    E_nu = (n ** 2 * (1.0 + 4.0 * np.sqrt(n)) * B2 * D_nu
            + 2.0 * n ** 3 * B3 * C_nu)
    return C_nu, D_nu, E_nu


def verify_all(cpa: CpaMetric, sys: SystemModel,
               cfg: VerificationConfig = None) -> VerificationReport:
    """Check the definiteness and negativity constraints everywhere."""
    if cfg is None:
        cfg = VerificationConfig(C=np.eye(cpa.n))
    eps0 = cfg.resolve_eps0()
    tri = cpa.tri
    n = tri.n
    pairs = sym_pairs(n)
    pi = np.array([p[0] for p in pairs])
    pj = np.array([p[1] for p in pairs])

    # vertex pass: definiteness of P and the linearized part of the operator
    lam_min_P, _ = sym_eig_range(cpa.vertex_P)
    c1 = lam_min_P >= eps0
    J = sys.jacobian(tri.vertices)                       # (V, n, n)
    PJ = np.einsum("vik,vkj->vij", cpa.vertex_P, J)
    Q = PJ + PJ.transpose(0, 2, 1)                       # (V, n, n)
    F = sys.f(tri.vertices)                              # (V, n)

    C_nu, D_nu, E_nu = error_constants(sys, cpa, cfg.bound_granularity)

    # per-(simplex, vertex) orbital derivative term (w^nu_ij . f(x_k))_ij
    vid = tri.simplices                                  # (S, n+1)
    orb_pairs = np.einsum("sap,stp->sta", cpa.grads, F[vid])
    A = Q[vid].copy()                                    # (S, n+1, n, n)
    A[:, :, pi, pj] += orb_pairs
    A[:, :, pj, pi] += np.where(pi != pj, orb_pairs, 0.0)
    _, lam_max_A = sym_eig_range(A)                      # (S, n+1)
    inflated = lam_max_A + (tri.h ** 2 * E_nu)[:, None]
    worst = inflated.max(axis=1)
    c4 = worst <= -eps0
    marginal = c4 & (worst >= -eps0 - cfg.marginal_tol)

    # vertex-level view of the negativity check: a vertex fails when any
    # incident simplex fails
    vertex_c4 = np.ones(tri.n_vertices, dtype=bool)
    if not c4.all():
        bad = np.unique(vid[~c4])
        vertex_c4[bad] = False

    return VerificationReport(
        eps0=eps0, lambda_min_P=lam_min_P, c1_pass=c1,
        vertex_c4_pass=vertex_c4,
        C_nu=C_nu, D_nu=D_nu, E_nu=E_nu, h_nu=tri.h.copy(),
        worst=worst, c4_pass=c4, marginal=marginal)
