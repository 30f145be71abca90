"""ODE system definitions.

A :class:`SystemModel` bundles the right-hand side f, its Jacobian Df and
rigorous upper bounds on the second and third partial derivatives of f over
axis-aligned boxes.  The built-in example systems are all polynomial, so f,
Df and the derivative bounds are derived symbolically from a monomial
representation; the bounds are obtained by bounding each monomial on the box
through its corner values, which is exact per monomial and therefore a valid
(if not always tight) upper bound for the polynomial via the triangle
inequality.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import InputError

Box = np.ndarray  # shape (n, 2): [:, 0] lower bounds, [:, 1] upper bounds


def _as_box(box, n: int) -> Box:
    b = np.asarray(box, dtype=float)
    if b.shape != (n, 2):
        raise InputError(f"box must have shape ({n}, 2), got {b.shape}")
    if np.any(b[:, 0] > b[:, 1]):
        raise InputError("box has empty extent (lower bound above upper bound)")
    return b


@dataclass(frozen=True)
class Monomial:
    exponents: tuple
    coefficient: float


class Polynomial:
    """Multivariate polynomial as a list of monomials; supports evaluation,
    partial differentiation and rigorous sup-norm bounds on boxes."""

    def __init__(self, n: int, terms: Sequence[tuple]):
        self.n = n
        merged = {}
        for exps, coef in terms:
            exps = tuple(int(e) for e in exps)
            if len(exps) != n:
                raise InputError("exponent tuple length does not match dimension")
            if any(e < 0 for e in exps):
                raise InputError("negative exponent in polynomial term")
            merged[exps] = merged.get(exps, 0.0) + float(coef)
        terms = [(e, c) for e, c in sorted(merged.items()) if c != 0.0]
        self.exponents = np.array([e for e, _ in terms], dtype=int).reshape(len(terms), n)
        self.coefficients = np.array([c for _, c in terms], dtype=float)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.coefficients.size == 0:
            return np.zeros(x.shape[:-1])
        powers = x[..., None, :] ** self.exponents  # (..., T, n)
        return powers.prod(axis=-1) @ self.coefficients

    def diff(self, axis: int) -> "Polynomial":
        terms = []
        for exps, coef in zip(self.exponents, self.coefficients):
            if exps[axis] == 0:
                continue
            new = exps.copy()
            new[axis] -= 1
            terms.append((tuple(new), coef * exps[axis]))
        return Polynomial(self.n, terms)

    def abs_bound(self, box: Box) -> float:
        """Upper bound for max |p(x)| on the box (sum of monomial bounds)."""
        return float(self.abs_bound_many(box[None, :, :])[0])

    def abs_bound_many(self, boxes: np.ndarray) -> np.ndarray:
        """Vectorized :meth:`abs_bound` over boxes of shape (S, n, 2)."""
        if self.coefficients.size == 0:
            return np.zeros(boxes.shape[0])
        m = np.maximum(np.abs(boxes[:, :, 0]), np.abs(boxes[:, :, 1]))  # (S, n)
        powers = m[:, None, :] ** self.exponents  # (S, T, n)
        return powers.prod(axis=-1) @ np.abs(self.coefficients)


@dataclass
class SystemModel:
    """Autonomous ODE system with derivative information.

    All callables are pure; instances are immutable by convention and safe
    to share between worker threads.
    """

    n: int
    name: str
    f: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray]
    bound2: Callable[[Box], float]
    bound3: Callable[[Box], float]
    bound2_many: Callable[[np.ndarray], np.ndarray] = None
    bound3_many: Callable[[np.ndarray], np.ndarray] = None
    equilibria: tuple = ()

    def __post_init__(self):
        if self.n < 1:
            raise InputError("dimension must be a positive integer")
        if self.bound2_many is None:
            self.bound2_many = lambda boxes: np.array(
                [self.bound2(_as_box(b, self.n)) for b in boxes])
        if self.bound3_many is None:
            self.bound3_many = lambda boxes: np.array(
                [self.bound3(_as_box(b, self.n)) for b in boxes])

    def _check_point(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.n:
            raise InputError(
                f"point dimension {x.shape[-1]} does not match system dimension {self.n}")
        return x


def eval_f(sys: SystemModel, x) -> np.ndarray:
    """Evaluate the vector field at x (batched over leading axes)."""
    return sys.f(sys._check_point(x))


def eval_jacobian(sys: SystemModel, x) -> np.ndarray:
    """Evaluate the Jacobian Df at x (batched over leading axes)."""
    return sys.jacobian(sys._check_point(x))


def derivative_bounds(sys: SystemModel, box) -> tuple:
    """Return (B, B3): upper bounds on the second- and third-order partial
    derivatives of the components of f over the axis-aligned box."""
    b = _as_box(box, sys.n)
    return sys.bound2(b), sys.bound3(b)


class PolynomialSystem(SystemModel):
    """System whose components are polynomials given as monomial lists.

    ``components[k]`` is a sequence of ``(exponents, coefficient)`` records
    describing f_k.  The Jacobian and the derivative bounds are derived
    symbolically, so the bounds are rigorous.
    """

    def __init__(self, n: int, components: Sequence[Sequence[tuple]],
                 name: str = "polynomial", equilibria: Sequence = ()):
        if len(components) != n:
            raise InputError("need exactly one component per dimension")
        polys = [Polynomial(n, comp) for comp in components]
        jac = [[p.diff(j) for j in range(n)] for p in polys]
        d2 = [[[jac[k][i].diff(j) for j in range(i + 1)]
               for i in range(n)] for k in range(n)]
        d3 = []
        for k in range(n):
            for i in range(n):
                for j in range(i + 1):
                    for l in range(j + 1):
                        d3.append(d2[k][i][j].diff(l))
        d2_flat = [p for comp in d2 for row in comp for p in row]

        def f(x):
            x = np.asarray(x, dtype=float)
            return np.stack([p(x) for p in polys], axis=-1)

        def jacobian(x):
            x = np.asarray(x, dtype=float)
            rows = [np.stack([jac[i][j](x) for j in range(n)], axis=-1)
                    for i in range(n)]
            return np.stack(rows, axis=-2)

        def bound2_many(boxes):
            boxes = np.asarray(boxes, dtype=float)
            out = np.zeros(boxes.shape[0])
            for p in d2_flat:
                np.maximum(out, p.abs_bound_many(boxes), out=out)
            return out

        def bound3_many(boxes):
            boxes = np.asarray(boxes, dtype=float)
            out = np.zeros(boxes.shape[0])
            for p in d3:
                np.maximum(out, p.abs_bound_many(boxes), out=out)
            return out

        super().__init__(
            n=n, name=name, f=f, jacobian=jacobian,
            bound2=lambda box: float(bound2_many(_as_box(box, n)[None])[0]),
            bound3=lambda box: float(bound3_many(_as_box(box, n)[None])[0]),
            bound2_many=bound2_many, bound3_many=bound3_many,
            equilibria=tuple(tuple(map(float, e)) for e in equilibria),
        )
        self.polynomials = polys


def vanderpol() -> PolynomialSystem:
    """Time-reversed van der Pol oscillator; exponentially stable origin,
    basin bounded by an unstable periodic orbit."""
    return PolynomialSystem(
        2,
        [
            [((0, 1), -1.0)],
            [((1, 0), 1.0), ((0, 1), -3.0), ((2, 1), 3.0)],
        ],
        name="vanderpol",
        equilibria=[(0.0, 0.0)],
    )


def speed_control(K_d: float = 1.0, g: float = 6.0) -> PolynomialSystem:
    """Speed-control system with two stable equilibria and a saddle."""
    comps = [
        [((0, 1), 1.0)],
        [((1, 0), -1.0), ((0, 1), -K_d), ((2, 1), -g / K_d),
         ((3, 0), -g), ((2, 0), -g)],
    ]
    # equilibria: y = 0 and x (1 + g x (x + 1)) = 0
    disc = np.sqrt(g * g - 4.0 * g)
    xs = [0.0, (-g - disc) / (2.0 * g), (-g + disc) / (2.0 * g)]
    name = "speed_control"
    if (K_d, g) != (1.0, 6.0):
        name = f"speed_control_Kd{K_d:g}_g{g:g}"
    return PolynomialSystem(2, comps, name=name,
                            equilibria=[(x, 0.0) for x in xs])


def speed_control_perturbed(K_d: float = 1.0, g: float = 6.0,
                            eps: float = 0.1) -> PolynomialSystem:
    """Perturbed speed-control system: f1 = y + eps,
    f2 = -K_d y - x - g (x^2 + eps)(y/K_d + x + 1)."""
    comps = [
        [((0, 1), 1.0), ((0, 0), eps)],
        [((1, 0), -1.0), ((0, 1), -K_d), ((2, 1), -g / K_d),
         ((3, 0), -g), ((2, 0), -g),
         ((0, 1), -g * eps / K_d), ((1, 0), -g * eps), ((0, 0), -g * eps)],
    ]
    # equilibria: y = -eps, then f2(x, -eps) = 0 in x (cubic)
    coeffs = np.zeros(4)  # x^3 .. x^0
    for exps, coef in ((e, c) for comp in comps[1:] for e, c in comp):
        coeffs[3 - exps[0]] += coef * (-eps) ** exps[1]
    roots = np.roots(coeffs)
    eq = [(float(r.real), -eps) for r in roots if abs(r.imag) < 1e-10]
    name = f"speed_control_perturbed_eps{eps:g}"
    if (K_d, g) != (1.0, 6.0):
        name = f"speed_control_perturbed_Kd{K_d:g}_g{g:g}_eps{eps:g}"
    return PolynomialSystem(2, comps, name=name, equilibria=sorted(eq))


def linear_system(A, name: str = None) -> PolynomialSystem:
    """System f(x) = A x for a constant matrix A."""
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n):
        raise InputError("A must be square")
    comps = []
    for i in range(n):
        terms = []
        for j in range(n):
            e = [0] * n
            e[j] = 1
            terms.append((tuple(e), A[i, j]))
        comps.append(terms)
    return PolynomialSystem(n, comps, name=name or "linear",
                            equilibria=[tuple([0.0] * n)])


def builtin_systems() -> list:
    """All shipped example systems."""
    return [
        vanderpol(),
        speed_control(),
        speed_control_perturbed(eps=0.01),
        speed_control_perturbed(eps=0.1),
        linear_system(-np.eye(2), name="linear"),
    ]


def get_system(name: str, **params) -> SystemModel:
    """Look up a built-in system by name, with optional parameters."""
    if name == "vanderpol":
        return vanderpol()
    if name == "speed_control":
        return speed_control(**params)
    if name == "speed_control_perturbed":
        return speed_control_perturbed(**params)
    if name == "linear":
        return linear_system(-np.eye(int(params.get("n", 2))), name="linear")
    raise InputError(f"unknown system {name!r}")
