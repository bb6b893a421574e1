"""Schwarzian derivative and the point transformation to canonical form.

The equation ``w^(n)(z) = 0`` is carried to the normal-form equation with
source parameter ``r`` by ``z = h(x) = integral dx/r`` and
``y = lambda * u^(n-1) * w`` (``r = u**2``).  The symbolic checks here work
with ``u`` so that no half-integer powers appear.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from maxsym.diffalg import (
    DiffPoly,
    Indeterminate,
    evaluate,
    nth_derivative,
    substitute,
    total_derivative,
    var,
)
from maxsym.itergen import psi_power_u, source_coefficient_r
from maxsym.numeval import Antiderivative, ClosedFormFn, IntervalError, NumevalError


def schwarzian_symbolic(base: str = "h") -> DiffPoly:
    """``S(f) = (2 f' f''' - 3 f''^2) / (2 f'^2)`` as a Laurent polynomial."""
    f1, f2, f3 = var(base, 1), var(base, 2), var(base, 3)
    return f2 * f2 * f1 ** -2 * Fraction(-3, 2) + f3 * f1 ** -1


def schwarzian_numeric(f: ClosedFormFn, x: float) -> float:
    """Schwarzian of a library function at ``x`` from its analytic derivatives."""
    s = schwarzian_symbolic("h")
    return evaluate(s, {Indeterminate("h", k): f.deriv(k, x) for k in (1, 2, 3)})


def mobius_fn(a: float, b: float, c: float, d: float, interval) -> ClosedFormFn:
    """``(a z + b) / (c z + d)`` with closed-form derivatives."""
    det = a * d - b * c
    if det == 0:
        raise ValueError("degenerate Mobius map")

    def deriv(k, z):
        den = c * z + d
        if k == 0:
            return (a * z + b) / den
        # d^k/dz^k [a/c - det/(c (c z + d))], with the 1/c folded in so c = 0 is fine
        return det * (-1) ** (k + 1) * math.factorial(k) * c ** (k - 1) / den ** (k + 1)
    return ClosedFormFn(deriv, tuple(interval), f"mobius({a:g},{b:g},{c:g},{d:g})")


def verify_schwarzian_source_identity(scale: int = 1) -> DiffPoly:
    """``S(h)/2 - scale * A(r)`` with ``h' = 1/r``; zero for ``scale = 1``."""
    r_inv = var("r") ** -1
    h_derivs = [r_inv, total_derivative(r_inv), nth_derivative(r_inv, 2)]
    mapping = {Indeterminate("h", k + 1): d for k, d in enumerate(h_derivs)}
    half_s = substitute(schwarzian_symbolic("h"), mapping) * Fraction(1, 2)
    return half_s - source_coefficient_r() * scale


def transformed_canonical(n: int) -> DiffPoly:
    """``u^-(n+1) (u^2 D)^n [u^-(n-1) y]``: ``w^(n)(z)`` pulled back to ``x``."""
    u = var("u")
    u2 = u * u
    expr = var("y") * u ** (-(n - 1))
    for _ in range(n):
        expr = u2 * total_derivative(expr)
    return expr * u ** (-(n + 1))


def verify_canonical_identity(n: int, cap: int = 8) -> DiffPoly:
    """Difference between the pulled-back canonical equation and ``Phi_n[y]``
    at ``r = u**2``; the zero polynomial when the identity holds."""
    if not 2 <= n <= cap:
        raise ValueError(f"order must lie in [2, {cap}]")
    phi = psi_power_u(n).scale_monomial({Indeterminate("u"): -2 * n})
    return transformed_canonical(n) - phi


@dataclass
class EquivalenceMap:
    """``x = f(z)``, ``y = lam * f'(z)^((n-1)/2) * w`` with ``f`` inverse to
    ``h(x) = integral from x0 to x of dt/u(t)^2``."""

    n: int
    u: ClosedFormFn
    lam: float = 1.0
    x0: Optional[float] = None
    tol: float = 1e-10
    h: Antiderivative = field(init=False, repr=False)

    def __post_init__(self):
        if self.lam == 0:
            raise ValueError("lambda must be nonzero")
        if self.n < 1:
            raise ValueError("order must be positive")
        if self.x0 is None:
            self.x0 = self.u.interval[0]
        u = self.u

        def inv_u2(t):
            val = u(t)
            if val == 0.0:
                raise NumevalError(f"u vanishes at {t}")
            return 1.0 / (val * val)
        self.h = Antiderivative(inv_u2, self.x0, self.tol)

    def z(self, x: float) -> float:
        self.u.check_point(x)
        return self.h(x)


def map_canonical_solution(emap: EquivalenceMap, k: int, x: float) -> float:
    """Image of ``w = z**k`` under the map, evaluated at ``x``."""
    if not 0 <= k <= emap.n - 1:
        raise ValueError(f"k must lie in [0, {emap.n - 1}]")
    if not emap.u.contains(x):
        raise IntervalError(f"{x} outside {emap.u.interval}")
    return emap.u(x) ** (emap.n - 1) * emap.z(x) ** k / emap.lam
