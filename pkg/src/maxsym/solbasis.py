"""Solution bases built from solutions of the source equation ``y'' + q y = 0``."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from maxsym.diffalg import (
    DiffPoly,
    Indeterminate,
    substitute,
    total_derivative,
    var,
)
from maxsym.itergen import LinearOdeForm, generate_maxsym, source_coefficient_r
from maxsym.numeval import (
    Antiderivative,
    ClosedFormFn,
    ExpressionFn,
    NumevalError,
    const_fn,
    interior_points,
    residual,
    source_q_fn,
    sqrt_fn,
)

PROVENANCES = ("from_u", "from_uv", "ermakov", "from_r")


class BasisError(Exception):
    pass


@dataclass
class SolutionBasis:
    n: int
    entries: list
    provenance: str
    interval: tuple
    equation: Optional[LinearOdeForm] = None
    coefficient_fns: Optional[dict] = None

    def __post_init__(self):
        if len(self.entries) != self.n:
            raise BasisError(f"expected {self.n} entries, got {len(self.entries)}")
        if self.provenance not in PROVENANCES:
            raise BasisError(f"unknown provenance {self.provenance!r}")

    def sample_points(self, count: int = 20) -> list[float]:
        return interior_points(self.interval, count)

    def residuals(self, points: Optional[Sequence[float]] = None) -> list[float]:
        """Relative residual of every entry against ``self.equation``."""
        if self.equation is None:
            raise BasisError("basis carries no equation to check against")
        pts = self.sample_points() if points is None else points
        return [residual(self.equation, self.coefficient_fns, y, pts) for y in self.entries]

    def wronskians(self, points: Optional[Sequence[float]] = None) -> list[float]:
        pts = points or interior_points(self.interval, 3)
        return [wronskian_numeric(self, x) for x in pts]


def _check_nonvanishing(f: ClosedFormFn, name: str, positive: bool = False, samples: int = 64):
    a, b = f.interval
    kind = "positive" if positive else "nonvanishing"
    prev = None
    for i in range(samples + 1):
        x = a + (b - a) * i / samples
        v = f(x)
        if (positive and v <= 0) or v == 0 or not math.isfinite(v):
            raise BasisError(f"{name} must be {kind} on {f.interval}; {name}({x}) = {v}")
        # a sign change between samples means a zero in between
        if prev is not None and (prev < 0) != (v < 0):
            raise BasisError(f"{name} must be {kind} on {f.interval}; it changes sign near {x}")
        prev = v


def _inverse_square(f: ClosedFormFn):
    def g(t):
        v = f(t)
        if v == 0.0:
            raise NumevalError(f"division by zero at {t}")
        return 1.0 / (v * v)
    return g


def _q_equation(n: int):
    return generate_maxsym(n)


def basis_from_u(u: ClosedFormFn, n: int, x0: Optional[float] = None,
                 tol: float = 1e-10, q: Optional[ClosedFormFn] = None) -> SolutionBasis:
    """``y_k = u^(n-1) I^k`` with ``I = integral from x0 of dt/u^2``.

    The entries' derivatives are generated symbolically from ``I' = u^-2``.
    ``q`` defaults to ``-u''/u``; pass it explicitly when it is known in
    closed form.
    """
    if n < 1:
        raise BasisError("order must be positive")
    _check_nonvanishing(u, "u")
    a, b = u.interval
    x0 = a if x0 is None else x0
    integral = Antiderivative(_inverse_square(u), x0, tol)
    uu, ii = var("u"), var("I")
    aux = {"I": (integral, uu ** -2)}
    entries = []
    for k in range(n):
        expr = uu ** (n - 1) * ii ** k
        entries.append(ExpressionFn(expr, {"u": u}, aux, u.interval,
                                    f"u^{n - 1}*I^{k}").as_fn())
    return SolutionBasis(n, entries, "from_u", u.interval,
                         _q_equation(n) if n >= 2 else None,
                         {"q": q if q is not None else source_q_fn(u)})


def _source_residual(f: ClosedFormFn, q: ClosedFormFn, pts) -> float:
    eq = LinearOdeForm(2, (DiffPoly.const(1), DiffPoly(), var("q")), "q")
    return residual(eq, q, f, pts)


def basis_from_uv(u: ClosedFormFn, v: ClosedFormFn, n: int, tol: float = 1e-8,
                  q: Optional[ClosedFormFn] = None) -> SolutionBasis:
    """``y_k = u^(n-1-k) v^k`` for two solutions of the same source equation.

    Both must solve ``y'' + q y = 0`` (checked to ``tol``), ``q`` defaulting
    to ``-u''/u``, and their Wronskian must be a nonzero constant.
    """
    if n < 1:
        raise BasisError("order must be positive")
    _check_nonvanishing(u, "u")
    interval = (max(u.interval[0], v.interval[0]), min(u.interval[1], v.interval[1]))
    q = source_q_fn(u) if q is None else q
    pts = interior_points(interval, 20)
    res = max(_source_residual(v, q, pts), _source_residual(u, q, pts))
    if res > tol:
        raise BasisError(f"v does not solve the source equation of u (residual {res:.3g})")
    wr = [u(x) * v.deriv(1, x) - u.deriv(1, x) * v(x) for x in interior_points(interval, 3)]
    if wr[0] == 0.0:
        raise BasisError("u and v are linearly dependent (zero Wronskian)")
    if max(abs(w - wr[0]) for w in wr) > tol * abs(wr[0]):
        raise BasisError(f"Wronskian of u and v is not constant: {wr}")
    uu, vv = var("u"), var("v")
    entries = [
        ExpressionFn(uu ** (n - 1 - k) * vv ** k, {"u": u, "v": v}, None, interval,
                     f"u^{n - 1 - k}*v^{k}").as_fn()
        for k in range(n)
    ]
    return SolutionBasis(n, entries, "from_uv", interval,
                         _q_equation(n) if n >= 2 else None, {"q": q})


def verify_basis_symbolic(n: int, k: int, cap: int = 8) -> DiffPoly:
    """Substitute ``u^(n-1-k) v^k`` into the order-n equation.

    ``u'' -> -q u`` and ``v'' -> -q v`` are applied after every
    derivative, then ``v' -> (W + u' v)/u`` with ``W`` free.  The result is
    the zero polynomial exactly when the entry solves the equation.
    """
    if not 2 <= n <= cap:
        raise ValueError(f"order must lie in [2, {cap}]")
    if not 0 <= k <= n - 1:
        raise ValueError(f"k must lie in [0, {n - 1}]")
    q, u, v = var("q"), var("u"), var("v")
    second = {Indeterminate("u", 2): -(q * u), Indeterminate("v", 2): -(q * v)}
    d = u ** (n - 1 - k) * v ** k
    derivs = [d]
    for _ in range(n):
        d = substitute(total_derivative(d), second)
        derivs.append(d)
    form = generate_maxsym(n)
    total = DiffPoly()
    for j, c in enumerate(form.coeffs):
        total = total + c * derivs[n - j]
    v_prime = (var("W") + var("u", 1) * v) * u ** -1
    return substitute(total, {Indeterminate("v", 1): v_prime})


def wronskian_matrix(basis: SolutionBasis, x: float) -> np.ndarray:
    n = basis.n
    return np.array([[basis.entries[k].deriv(j, x) for k in range(n)] for j in range(n)])


def wronskian_numeric(basis: SolutionBasis, x: float) -> float:
    """``det [y_k^(j)(x)]`` for ``0 <= j, k < n``."""
    return float(np.linalg.det(wronskian_matrix(basis, x)))


def superfactorial(n: int) -> int:
    """``prod_{j=1}^{n-1} j!``, the Wronskian of the ``from_u`` basis."""
    out = 1
    for j in range(1, n):
        out *= math.factorial(j)
    return out


def standard_form_equation() -> LinearOdeForm:
    """``y'' + B y' + (A(r) + B^2/4 + B'/2) y = 0``."""
    b = var("B")
    c2 = source_coefficient_r() + b * b * Fraction(1, 4) + var("B", 1) * Fraction(1, 2)
    return LinearOdeForm(2, (DiffPoly.const(1), b, c2), "rs")


def ermakov_basis(r: ClosedFormFn, B: Optional[ClosedFormFn] = None,
                  x0: Optional[float] = None, tol: float = 1e-10) -> SolutionBasis:
    """Two solutions ``sqrt(r) J^j exp(-1/2 integral B)`` of the standard-form
    equation, with ``J = integral dt/r`` anchored at ``x0``."""
    _check_nonvanishing(r, "r", positive=True)
    if B is None:
        B = const_fn(0.0, r.interval)
    interval = (max(r.interval[0], B.interval[0]), min(r.interval[1], B.interval[1]))
    x0 = interval[0] if x0 is None else x0

    def inv_r(t):
        return 1.0 / r(t)
    j_int = Antiderivative(inv_r, x0, tol)
    b_int = Antiderivative(B, x0, tol)
    g, jj, ee = var("g"), var("J"), var("E")
    aux = {
        "g": (lambda x: math.sqrt(r(x)), var("r", 1) * g ** -1 * Fraction(1, 2)),
        "J": (j_int, var("r") ** -1),
        "E": (lambda x: math.exp(-0.5 * b_int(x)), var("B") * ee * Fraction(-1, 2)),
    }
    entries = [
        ExpressionFn(g * jj ** j * ee, {"r": r, "B": B}, aux, interval,
                     f"sqrt(r)*J^{j}*E").as_fn()
        for j in range(2)
    ]
    return SolutionBasis(2, entries, "ermakov", interval, standard_form_equation(),
                         {"r": r, "B": B})


def nth_basis_from_r(r: ClosedFormFn, n: int, x0: Optional[float] = None,
                     tol: float = 1e-10) -> SolutionBasis:
    """``y_k = r^((n-1)/2) (integral dx/r)^k``: :func:`basis_from_u` at ``u = sqrt(r)``."""
    _check_nonvanishing(r, "r", positive=True)
    basis = basis_from_u(sqrt_fn(r), n, x0, tol)
    basis.provenance = "from_r"
    return basis


def max_residual(basis: SolutionBasis, points: Optional[Sequence[float]] = None) -> float:
    return max(basis.residuals(points))


def span_residual(old: SolutionBasis, new: SolutionBasis, points: Sequence[float]) -> float:
    """Worst least-squares misfit of ``new`` entries projected on ``old``.

    Values and derivatives up to order n-1 are stacked so the fit is a
    statement about functions, not about sampled values alone.
    """
    n = old.n
    rows_old = []
    rows_new = []
    for x in points:
        for j in range(n):
            rows_old.append([e.deriv(j, x) for e in old.entries])
            rows_new.append([e.deriv(j, x) for e in new.entries])
    A = np.array(rows_old)
    Bm = np.array(rows_new)
    coef, *_ = np.linalg.lstsq(A, Bm, rcond=None)
    misfit = A @ coef - Bm
    scale = np.maximum(np.abs(Bm).max(axis=0), 1e-300)
    return float((np.abs(misfit).max(axis=0) / scale).max())
