"""Optimal recovery of the metric candidate by mesh-free collocation.

The collocation conditions prescribe the entries of
F(S)(x_l) = Df(x_l)^T S(x_l) + S(x_l) Df(x_l) + (grad S_ij . f(x_l))_ij
at every collocation point.  The Gram matrix of these functionals is
assembled from the kernel profiles psi0, psi1, psi2, the solved
coefficients are folded into symmetric matrices beta_k, and the recovered
metric is

    S(x) = sum_k [ psi0(|x_k - x|) (Df(x_k) beta_k + beta_k Df(x_k)^T)
                   + psi1(|x_k - x|) <x_k - x, f(x_k)> beta_k ].

Index layout of the linear system is point-major: row (l, (i, j)) and
column (k, (mu, nu)) with the (i <= j) pairs ordered lexicographically;
this layout is part of the serialization contract.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import get_lapack_funcs

from .errors import IllConditionedError, InputError, NumericalError
from .kernel import WendlandKernel, build_wendland
from .systems import SystemModel, get_system
from ._parallel import map_chunks

SERIAL_FORMAT = "conmet-recovery"
SERIAL_VERSION = 1


def sym_pairs(n: int) -> list:
    """Lexicographic (i, j) pairs with i <= j."""
    return [(i, j) for i in range(n) for j in range(i, n)]


def assemble_b(sys: SystemModel, kernel: WendlandKernel, xk, xl) -> np.ndarray:
    """Order-4 coefficient block b[i, j, mu, nu] for one pair of
    collocation points (x_k, x_l)."""
    xk = np.asarray(xk, dtype=float)[None, :]
    xl = np.asarray(xl, dtype=float)[None, :]
    blk = _b_block(sys, kernel, xk, sys.f(xk), sys.jacobian(xk),
                   xl, sys.f(xl), sys.jacobian(xl))
    return blk[0, 0]


def _b_block(sys, kernel, Xk, Fk, Jk, Xl, Fl, Jl):
    """Vectorized b coefficients, shape (K, L, n, n, n, n) with index order
    (k, l, i, j, mu, nu)."""
    n = sys.n
    eye = np.eye(n)
    diff = Xk[:, None, :] - Xl[None, :, :]                 # x_k - x_l
    r = np.sqrt((diff ** 2).sum(-1))
    p0, p1, p2 = (kernel.psi(q, r) for q in range(3))
    ip_k = np.einsum("kld,kd->kl", diff, Fk)               # <x_k-x_l, f(x_k)>
    ip_l = np.einsum("kld,ld->kl", -diff, Fl)              # <x_l-x_k, f(x_l)>
    ff = np.einsum("ld,kd->kl", Fl, Fk)                    # <f(x_l), f(x_k)>

    t1 = np.einsum("lpi,kpm->klim", Jl, Jk)
    t4 = np.einsum("kpn,lpj->klnj", Jk, Jl)
    b = np.einsum("kl,klim,nj->klijmn", p0, t1, eye)
    b += np.einsum("kl,lmi,kjn->klijmn", p0, Jl, Jk)
    b += np.einsum("kl,kim,lnj->klijmn", p0, Jk, Jl)
    b += np.einsum("kl,im,klnj->klijmn", p0, eye, t4)
    g1 = p1 * ip_k
    b += np.einsum("kl,lmi,nj->klijmn", g1, Jl, eye)
    b += np.einsum("kl,im,lnj->klijmn", g1, eye, Jl)
    g2 = p1 * ip_l
    b += np.einsum("kl,kim,nj->klijmn", g2, Jk, eye)
    b += np.einsum("kl,im,kjn->klijmn", g2, eye, Jk)
    g3 = p2 * ip_k * ip_l - p1 * ff
    b += np.einsum("kl,im,jn->klijmn", g3, eye, eye)
    return b


def symmetrize_c(b: np.ndarray) -> np.ndarray:
    """Symmetrize b in both index pairs: the (i=j / i<j) x (mu=nu / mu<nu)
    cases of the coefficient symmetrization collapse into one average."""
    return 0.25 * (b + b.swapaxes(-4, -3) + b.swapaxes(-2, -1)
                   + b.swapaxes(-4, -3).swapaxes(-2, -1))


def build_gram(sys: SystemModel, kernel: WendlandKernel, X,
               block: int = 256) -> np.ndarray:
    """Dense symmetric Gram matrix of size (N m, N m), m = n(n+1)/2.

    Row index (l, (i, j)) and column index (k, (mu, nu)), point-major."""
    X = np.asarray(X, dtype=float)
    N, n = X.shape
    pairs = sym_pairs(n)
    m = len(pairs)
    F = sys.f(X)
    J = sys.jacobian(X)
    G = np.empty((N * m, N * m))
    pi = np.array([p[0] for p in pairs])
    pj = np.array([p[1] for p in pairs])
    for s in range(0, N, block):
        e = min(s + block, N)
        b = _b_block(sys, kernel, X[s:e], F[s:e], J[s:e], X, F, J)
        c = symmetrize_c(b)                      # (B, N, n, n, n, n)
        if not np.all(np.isfinite(c)):
            bad = np.argwhere(~np.isfinite(c).all(axis=(2, 3, 4, 5)))[0]
            raise NumericalError(
                f"non-finite Gram block for point pair ({s + bad[0]}, {bad[1]})")
        # columns (k, (mu, nu)) for k in [s, e); rows (l, (i, j))
        blk = c[:, :, pi[None, :], pj[None, :], pi[:, None], pj[:, None]]
        # blk axes: (k, l, (mu nu) pair a, (i j) pair b) -> G[l*m+b, k*m+a]
        cols = blk.transpose(1, 3, 0, 2).reshape(N * m, (e - s) * m)
        G[:, s * m:e * m] = cols
    return G


def gram_condition_estimate(G: np.ndarray) -> tuple:
    """Bunch-Kaufman factorization plus a 1-norm condition estimate.

    Returns (factors, ipiv, cond_estimate)."""
    sytrf, sycon = get_lapack_funcs(("sytrf", "sycon"), (G,))
    ldu, ipiv, info = sytrf(G, lower=1)
    if info > 0:
        raise NumericalError("Gram factorization hit an exactly singular pivot")
    if info < 0:
        raise NumericalError(f"illegal argument {-info} in factorization")
    anorm = np.abs(G).sum(axis=0).max()
    rcond, _ = sycon(ldu, ipiv, anorm, lower=1)
    cond = float(1.0 / rcond) if rcond > 0 else np.inf
    return (ldu, ipiv), cond


def solve_gamma(G: np.ndarray, C, n: int,
                max_condition: float = 1e16,
                jitter: float = 0.0) -> tuple:
    """Solve the collocation system for the gamma coefficients.

    Returns (gamma with shape (N, m), condition estimate, residual inf-norm).
    The right-hand side is -C_ij repeated per collocation point."""
    C = np.asarray(C, dtype=float)
    if C.shape != (n, n) or not np.allclose(C, C.T):
        raise InputError("C must be a symmetric n x n matrix")
    if np.linalg.eigvalsh(C).min() <= 0:
        raise InputError("C must be positive definite")
    pairs = sym_pairs(n)
    m = len(pairs)
    N = G.shape[0] // m
    if G.shape != (N * m, N * m):
        raise InputError("Gram matrix size is not a multiple of n(n+1)/2")
    A = G if jitter == 0.0 else G + jitter * np.eye(G.shape[0])
    rhs = np.tile([-C[i, j] for i, j in pairs], N)
    factors, cond = gram_condition_estimate(A)
    if not np.isfinite(cond) or cond > max_condition:
        raise IllConditionedError(
            f"Gram condition estimate {cond:.3e} exceeds {max_condition:.1e}; "
            "increase the collocation spacing or decrease the kernel scale c")
    sytrs = get_lapack_funcs("sytrs", (A,))
    x, info = sytrs(factors[0], factors[1], rhs, lower=1)
    if info != 0:
        raise NumericalError("triangular solve failed")
    # one step of iterative refinement
    resid = rhs - A @ x
    dx, info = sytrs(factors[0], factors[1], resid, lower=1)
    if info == 0:
        x = x + dx
        resid = rhs - A @ x
    residual = float(np.abs(resid).max())
    return x.reshape(N, m), cond, residual


def gamma_to_beta(gamma: np.ndarray, n: int) -> np.ndarray:
    """Fold gamma rows (one per point, (i <= j) ordered) into symmetric
    matrices: off-diagonal entries get half the coefficient."""
    gamma = np.asarray(gamma, dtype=float)
    N, m = gamma.shape
    pairs = sym_pairs(n)
    if m != len(pairs):
        raise InputError("gamma row length does not match n(n+1)/2")
    beta = np.zeros((N, n, n))
    for a, (i, j) in enumerate(pairs):
        if i == j:
            beta[:, i, i] = gamma[:, a]
        else:
            beta[:, i, j] = beta[:, j, i] = 0.5 * gamma[:, a]
    return beta


@dataclass
class RecoverySolution:
    """Solved optimal recovery: collocation points with coefficient
    matrices beta_k, plus diagnostics."""

    system: SystemModel
    kernel: WendlandKernel
    points: np.ndarray          # (N, n)
    beta: np.ndarray            # (N, n, n), each symmetric
    C: np.ndarray               # (n, n) right-hand side
    gram_condition: float = np.nan
    residual: float = np.nan
    _G: np.ndarray = field(default=None, repr=False)   # Df(x_k) b + b Df^T
    _F: np.ndarray = field(default=None, repr=False)   # f at points

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        self.beta = np.asarray(self.beta, dtype=float)
        if self._F is None:
            self._F = self.system.f(self.points)
            J = self.system.jacobian(self.points)
            A = np.einsum("kip,kpj->kij", J, self.beta)
            self._G = A + A.transpose(0, 2, 1)

    @property
    def n(self) -> int:
        return self.points.shape[1]

    def evaluate_S(self, x) -> np.ndarray:
        """Recovered metric S(x); exactly symmetric."""
        return self.evaluate_S_many(np.asarray(x, dtype=float)[None, :])[0]

    def evaluate_S_many(self, pts, threads: int = 1) -> np.ndarray:
        """Vectorized S over points of shape (B, n)."""
        pts = np.asarray(pts, dtype=float)

        def chunk(sl):
            Y = pts[sl]
            diff = self.points[None, :, :] - Y[:, None, :]
            r = np.sqrt((diff ** 2).sum(-1))
            p0 = self.kernel.psi(0, r)
            p1 = self.kernel.psi(1, r)
            ip = np.einsum("bkd,kd->bk", diff, self._F)
            return (np.einsum("bk,kij->bij", p0, self._G)
                    + np.einsum("bk,kij->bij", p1 * ip, self.beta))

        return map_chunks(chunk, len(pts), (len(pts), self.n, self.n),
                          threads=threads)

    def evaluate_grad_S(self, x) -> np.ndarray:
        """Gradient tensor D with D[i, j, p] = dS_ij/dx_p at x."""
        x = np.asarray(x, dtype=float)
        diff = self.points - x[None, :]                    # x_k - x
        r = np.sqrt((diff ** 2).sum(-1))
        p1 = self.kernel.psi(1, r)
        p2 = self.kernel.psi(2, r)
        ip = np.einsum("kd,kd->k", diff, self._F)
        out = np.einsum("k,kp,kij->ijp", -p1, diff, self._G)
        out += np.einsum("k,kp,kij->ijp", -p2 * ip, diff, self.beta)
        out += np.einsum("k,kp,kij->ijp", -p1, self._F, self.beta)
        return out

    def evaluate_F_S(self, x, sys: SystemModel = None) -> np.ndarray:
        """Operator image F(S)(x) = Df^T S + S Df + (grad S_ij . f)_ij,
        against the recovery's own system unless another one is given."""
        sys = sys or self.system
        x = np.asarray(x, dtype=float)
        S = self.evaluate_S(x)
        J = sys.jacobian(x)
        grad = self.evaluate_grad_S(x)
        return J.T @ S + S @ J + grad @ sys.f(x)

    def to_json(self, path) -> None:
        doc = {
            "format": SERIAL_FORMAT,
            "version": SERIAL_VERSION,
            "system": self.system.name,
            "n": self.n,
            "kernel": {"k": self.kernel.k, "c": self.kernel.c,
                       "amplitude": self.kernel.amplitude},
            "C": self.C.tolist(),
            "gram_condition": self.gram_condition,
            "residual": self.residual,
            "points": self.points.tolist(),
            "beta": self.beta.tolist(),
        }
        with open(path, "w") as fh:
            json.dump(doc, fh)

    @classmethod
    def from_json(cls, path, system: SystemModel = None) -> "RecoverySolution":
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except FileNotFoundError:
            raise InputError(f"recovery file {path} not found")
        except json.JSONDecodeError as exc:
            raise InputError(f"cannot parse recovery file {path}: {exc}")
        if doc.get("format") != SERIAL_FORMAT:
            raise InputError(f"{path} is not a recovery file")
        if doc.get("version") != SERIAL_VERSION:
            raise InputError(
                f"unsupported recovery file version {doc.get('version')}")
        if system is None:
            system = get_system(doc["system"])
        elif system.name != doc["system"]:
            raise InputError(
                f"recovery file was computed for system {doc['system']!r}, "
                f"not {system.name!r}")
        ker = build_wendland(doc["n"], doc["kernel"]["k"], doc["kernel"]["c"])
        if doc["kernel"].get("amplitude", 1.0) != 1.0:
            ker = ker.scaled(doc["kernel"]["amplitude"])
        return cls(system=system, kernel=ker,
                   points=np.array(doc["points"]),
                   beta=np.array(doc["beta"]),
                   C=np.array(doc["C"]),
                   gram_condition=doc.get("gram_condition", np.nan),
                   residual=doc.get("residual", np.nan))


def solve_recovery(sys: SystemModel, kernel: WendlandKernel, X, C,
                   max_condition: float = 1e16,
                   jitter: float = 0.0) -> RecoverySolution:
    """Assemble and solve the collocation system; returns the recovery."""
    X = np.asarray(X, dtype=float)
    G = build_gram(sys, kernel, X)
    gamma, cond, residual = solve_gamma(G, C, sys.n,
                                        max_condition=max_condition,
                                        jitter=jitter)
    beta = gamma_to_beta(gamma, sys.n)
    return RecoverySolution(system=sys, kernel=kernel, points=X, beta=beta,
                            C=np.asarray(C, dtype=float),
                            gram_condition=cond, residual=residual)
