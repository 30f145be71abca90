"""Compactly supported Wendland radial basis functions.

The base polynomial is built by the integral recursion starting from
(1 - r)_+^l, carried out in exact rational arithmetic, so the closed-form
comparison tests can check coefficient ratios exactly.  The radial profile
used by the collocation formulas is psi0(r) = psi_{l,k}(c r) together with
the derived profiles psi_{q+1}(r) = (1/r) d(psi_q)/dr, obtained by exact
polynomial differentiation and exact division by r.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import ConfigurationError, InputError

RationalPoly = tuple  # coefficients, ascending powers, exact Fractions


def _poly_diff(p: RationalPoly) -> RationalPoly:
    return tuple(c * i for i, c in enumerate(p))[1:]


def _poly_divide_by_t(p: RationalPoly) -> RationalPoly:
    if p and p[0] != 0:
        raise ConfigurationError(
            "polynomial not divisible by r (smoothness index too small)")
    return tuple(p[1:])


def _poly_antiderivative_of_t_times(p: RationalPoly) -> RationalPoly:
    # antiderivative of t * p(t)
    return (Fraction(0), Fraction(0)) + tuple(
        Fraction(c, i + 2) for i, c in enumerate(p))


def _poly_eval_exact(p: RationalPoly, t: Fraction) -> Fraction:
    acc = Fraction(0)
    for c in reversed(p):
        acc = acc * t + c
    return acc


def wendland_poly(l: int, k: int) -> RationalPoly:
    """Exact coefficients of psi_{l,k} on [0, 1], by the integral recursion
    psi_{l,0}(r) = (1-r)^l, psi_{l,k+1}(r) = int_r^1 t psi_{l,k}(t) dt."""
    if l < 1 or k < 0:
        raise InputError("need l >= 1 and k >= 0")
    # (1 - t)^l expanded
    from math import comb
    p = tuple(Fraction((-1) ** i * comb(l, i)) for i in range(l + 1))
    for _ in range(k):
        q = _poly_antiderivative_of_t_times(p)
        p = tuple(
            (_poly_eval_exact(q, Fraction(1)) if i == 0 else Fraction(0)) - c
        for i, c in enumerate(q))
    return p


@dataclass(frozen=True)
class WendlandKernel:
    """psi0(r) = amplitude * psi_{l,k}(c r) and its derived profiles.

    ``poly0``, ``poly1``, ``poly2`` are exact rational polynomials in
    t = c r on the support t in [0, 1]; the scale factors c^2 and c^4
    from the chain rule are applied at evaluation time.
    """

    n: int
    k: int
    l: int
    c: float
    poly0: RationalPoly
    poly1: RationalPoly
    poly2: RationalPoly
    amplitude: float = 1.0
    _float_coeffs: tuple = field(default=None, repr=False, compare=False)

    @property
    def support_radius(self) -> float:
        return 1.0 / self.c

    def scaled(self, s: float) -> "WendlandKernel":
        """Same kernel with psi0, psi1, psi2 jointly multiplied by s > 0."""
        if s <= 0:
            raise InputError("scale factor must be positive")
        return WendlandKernel(self.n, self.k, self.l, self.c,
                              self.poly0, self.poly1, self.poly2,
                              amplitude=self.amplitude * s)

    def _coeffs(self, q: int) -> np.ndarray:
        if self._float_coeffs is None:
            cs = tuple(
                np.array([float(c) for c in p])
                for p in (self.poly0, self.poly1, self.poly2))
            object.__setattr__(self, "_float_coeffs", cs)
        return self._float_coeffs[q]

    def psi(self, q: int, r) -> np.ndarray:
        """Evaluate psi_q at radii r >= 0 (vectorized; 0 outside support)."""
        if q not in (0, 1, 2):
            raise InputError("profile order q must be 0, 1 or 2")
        r = np.asarray(r, dtype=float)
        if np.any(r < 0):
            raise InputError("radius must be nonnegative")
        t = self.c * r
        coeffs = self._coeffs(q)
        acc = np.zeros_like(t)
        for c in coeffs[::-1]:
            acc = acc * t + c
        acc *= self.amplitude * self.c ** (2 * q)
        return np.where(t < 1.0, acc, 0.0)


def build_wendland(n: int, k: int, c: float) -> WendlandKernel:
    """Construct the Wendland kernel psi_{l,k}(c r) with l = floor(n/2)+k+1.

    Requires k >= 2 for odd n and k >= 3 for even n (the smoothness needed
    by the CPA error estimates), and c > 0.
    """
    kmin = 2 if n % 2 == 1 else 3
    if k < kmin:
        raise ConfigurationError(
            f"smoothness index k={k} too small for n={n}: need k >= {kmin}")
    if c <= 0:
        raise ConfigurationError("kernel scale c must be positive")
    l = n // 2 + k + 1
    p0 = wendland_poly(l, k)
    p1 = _poly_divide_by_t(_poly_diff(p0))
    p2 = _poly_divide_by_t(_poly_diff(p1))
    return WendlandKernel(n=n, k=k, l=l, c=float(c),
                          poly0=p0, poly1=p1, poly2=p2)


def psi(kernel: WendlandKernel, q: int, r) -> np.ndarray:
    """Functional alias for :meth:`WendlandKernel.psi`."""
    return kernel.psi(q, r)
