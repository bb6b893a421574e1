"""Numeric functions with analytic derivatives, quadrature and residuals."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Mapping, Optional, Sequence, Union

from maxsym.diffalg import (
    DiffPoly,
    Indeterminate,
    evaluate,
    substitute,
    total_derivative,
)


class NumevalError(Exception):
    pass


class QuadratureError(NumevalError):
    pass


class IntervalError(NumevalError):
    pass


@dataclass(frozen=True)
class ClosedFormFn:
    """A real function on ``[a, b]`` with exact derivative formulas.

    ``deriv_fn(k, x)`` returns the k-th derivative; ``max_order`` of None
    means every order is available.
    """

    deriv_fn: Callable[[int, float], float]
    interval: tuple[float, float]
    label: str = ""
    max_order: Optional[int] = None

    def __call__(self, x: float) -> float:
        return self.deriv(0, x)

    def eval(self, x: float) -> float:
        return self.deriv(0, x)

    def deriv(self, order: int, x: float) -> float:
        if order < 0:
            raise ValueError("derivative order must be non-negative")
        if self.max_order is not None and order > self.max_order:
            raise NumevalError(f"{self.label}: derivative of order {order} unavailable "
                               f"(max {self.max_order})")
        return float(self.deriv_fn(order, x))

    def contains(self, x: float, slack: float = 1e-12) -> bool:
        a, b = self.interval
        return a - slack <= x <= b + slack

    def check_point(self, x: float):
        if not self.contains(x):
            raise IntervalError(f"{x} outside {self.label} interval {self.interval}")

    def with_interval(self, a: float, b: float) -> "ClosedFormFn":
        return ClosedFormFn(self.deriv_fn, (a, b), self.label, self.max_order)


# ---------------------------------------------------------------------------
# function library

def exp_fn(alpha: float = 1.0, interval=(0.0, 1.0)) -> ClosedFormFn:
    return ClosedFormFn(lambda k, x: alpha ** k * math.exp(alpha * x), tuple(interval),
                        f"exp:{alpha:g}")


def _trig(fn, alpha):
    # exact zeros at the quarter-turn shifts instead of 6e-17 residue
    def d(k, x):
        phase = k % 4
        base = fn(alpha * x)
        return alpha ** k * base[phase]
    return d


def cos_fn(alpha: float = 1.0, interval=(0.0, 1.0)) -> ClosedFormFn:
    d = _trig(lambda t: (math.cos(t), -math.sin(t), -math.cos(t), math.sin(t)), alpha)
    return ClosedFormFn(d, tuple(interval), f"cos:{alpha:g}")


def sin_fn(alpha: float = 1.0, interval=(0.0, 1.0)) -> ClosedFormFn:
    d = _trig(lambda t: (math.sin(t), math.cos(t), -math.sin(t), -math.cos(t)), alpha)
    return ClosedFormFn(d, tuple(interval), f"sin:{alpha:g}")


def poly_fn(coeffs: Sequence[float], interval=(0.0, 1.0)) -> ClosedFormFn:
    """``c0 + c1 x + c2 x^2 + ...``"""
    coeffs = tuple(float(c) for c in coeffs)

    def d(k, x):
        total = 0.0
        for i in range(len(coeffs) - 1, k - 1, -1):
            total = total * x + coeffs[i] * math.perm(i, k)
        return total
    return ClosedFormFn(d, tuple(interval), "poly:" + ",".join(f"{c:g}" for c in coeffs))


def pow_fn(p: float, interval=(1.0, 2.0)) -> ClosedFormFn:
    """``x**p``; the interval must be positive unless ``p`` is a natural number."""
    if interval[0] <= 0 and not (float(p).is_integer() and p >= 0):
        raise IntervalError("pow:<k> with non-natural k needs a positive interval")

    def d(k, x):
        c = 1.0
        for i in range(k):
            c *= p - i
        if c == 0.0:
            return 0.0
        return c * x ** (p - k)
    return ClosedFormFn(d, tuple(interval), f"pow:{p:g}")


def const_fn(c: float, interval=(0.0, 1.0)) -> ClosedFormFn:
    c = float(c)
    return ClosedFormFn(lambda k, x: c if k == 0 else 0.0, tuple(interval), f"const:{c:g}")


def scaled(f: ClosedFormFn, c: float) -> ClosedFormFn:
    """``c * f``."""
    c = float(c)
    return ClosedFormFn(lambda k, x: c * f.deriv(k, x), f.interval, f"{c:g}*{f.label}",
                        f.max_order)


def parse_fnspec(spec: str, interval=(0.0, 1.0)) -> ClosedFormFn:
    """Build a library function from ``exp[:a]``, ``cos[:a]``, ``sin[:a]``,
    ``poly:c0,c1,...``, ``pow:k`` (or ``pow2``) and ``const:c``."""
    name, _, arg = spec.partition(":")
    name = name.strip().lower()
    try:
        if name == "exp":
            return exp_fn(float(arg) if arg else 1.0, interval)
        if name == "cos":
            return cos_fn(float(arg) if arg else 1.0, interval)
        if name == "sin":
            return sin_fn(float(arg) if arg else 1.0, interval)
        if name == "poly":
            return poly_fn([float(c) for c in arg.split(",")], interval)
        if name == "pow":
            return pow_fn(float(arg), interval)
        if name.startswith("pow") and name[3:].isdigit() and not arg:
            return pow_fn(float(name[3:]), interval)
        if name == "const":
            return const_fn(float(arg), interval)
    except ValueError as exc:
        raise NumevalError(f"bad function spec {spec!r}: {exc}") from None
    raise NumevalError(f"unknown function spec {spec!r}")


# ---------------------------------------------------------------------------
# symbolic composition

class ExpressionFn:
    """Numeric view of a differential polynomial.

    ``fns`` binds base symbols to library functions (all their derivatives
    are used).  ``aux`` holds order-0 symbols with a numeric value and a
    first-order rewrite rule, e.g. ``I`` with ``I' -> u^-2``.  Derivatives
    are produced symbolically and rewritten before evaluation.
    """

    def __init__(self, expr: DiffPoly, fns: Mapping[str, ClosedFormFn],
                 aux: Mapping[str, tuple[Callable[[float], float], DiffPoly]] = None,
                 interval=None, label: str = ""):
        self.expr = expr
        self.fns = dict(fns)
        self.aux = dict(aux or {})
        self._aux_rules = {Indeterminate(b, 1): rule for b, (_, rule) in self.aux.items()}
        if interval is None:
            ivs = [f.interval for f in self.fns.values()]
            interval = (max(i[0] for i in ivs), min(i[1] for i in ivs)) if ivs else (-math.inf, math.inf)
        self.interval = tuple(interval)
        self.label = label or expr.to_text()
        self._derivs = [expr]

    def symbolic(self, k: int) -> DiffPoly:
        while len(self._derivs) <= k:
            d = total_derivative(self._derivs[-1])
            if self._aux_rules:
                d = substitute(d, self._aux_rules)
            self._derivs.append(d)
        return self._derivs[k]

    def bindings(self, p: DiffPoly, x: float, aux_cache: dict) -> dict:
        out = {}
        for ind in p.indeterminates():
            if ind.base in self.fns:
                out[ind] = self.fns[ind.base].deriv(ind.order, x)
            elif ind.base in self.aux:
                if ind.order != 0:
                    raise NumevalError(f"unreduced auxiliary derivative {ind}")
                if ind.base not in aux_cache:
                    aux_cache[ind.base] = self.aux[ind.base][0](x)
                out[ind] = aux_cache[ind.base]
            else:
                raise NumevalError(f"no numeric binding for {ind}")
        return out

    def deriv(self, k: int, x: float) -> float:
        p = self.symbolic(k)
        return evaluate(p, self.bindings(p, x, {}))

    def as_fn(self, max_order: Optional[int] = None) -> ClosedFormFn:
        return ClosedFormFn(self.deriv, self.interval, self.label, max_order)


def sqrt_fn(r: ClosedFormFn) -> ClosedFormFn:
    """``sqrt(r)`` for positive ``r``, via ``g' = r'/(2 g)``."""
    g = DiffPoly.from_indeterminate(Indeterminate("g"))
    rule = DiffPoly.from_indeterminate(Indeterminate("r", 1)) * g ** -1 * DiffPoly.const(1) / 2

    def value(x):
        v = r(x)
        if v <= 0:
            raise NumevalError(f"sqrt of non-positive value {v} at x={x}")
        return math.sqrt(v)
    ef = ExpressionFn(g, {"r": r}, {"g": (value, rule)}, r.interval, f"sqrt({r.label})")
    return ef.as_fn()


def source_q_fn(u: ClosedFormFn) -> ClosedFormFn:
    """``q = -u''/u`` with all derivatives, for a nonvanishing ``u``."""
    uu = DiffPoly.from_indeterminate(Indeterminate("u"))
    expr = -DiffPoly.from_indeterminate(Indeterminate("u", 2)) * uu ** -1
    return ExpressionFn(expr, {"u": u}, interval=u.interval, label=f"-u''/u, u={u.label}").as_fn()


# ---------------------------------------------------------------------------
# quadrature

def _simpson(f, a, fa, b, fb):
    m = 0.5 * (a + b)
    fm = f(m)
    return m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb)


def adaptive_simpson(f: Callable[[float], float], a: float, b: float,
                     tol: float = 1e-10, max_depth: int = 40) -> float:
    """Adaptive Simpson rule with Richardson correction.

    Refinement stops when ``|S2 - S1| <= 15 * max(tol_abs, tol * |S2|)``
    on each panel, the tolerance being halved at each split.
    """
    if a == b:
        return 0.0
    fa, fb = f(a), f(b)
    m, fm, whole = _simpson(f, a, fa, b, fb)
    # explicit stack keeps deep refinements off the Python call stack
    total = 0.0
    stack = [(a, fa, m, fm, b, fb, whole, tol, max_depth)]
    while stack:
        a, fa, m, fm, b, fb, whole, eps, depth = stack.pop()
        lm, flm, left = _simpson(f, a, fa, m, fm)
        rm, frm, right = _simpson(f, m, fm, b, fb)
        both = left + right
        delta = both - whole
        if abs(delta) <= 15.0 * max(eps, eps * abs(both)):
            total += both + delta / 15.0
            continue
        if depth <= 0:
            raise QuadratureError(f"no convergence on [{a}, {b}] within the depth cap")
        stack.append((a, fa, lm, flm, m, fm, left, eps / 2.0, depth - 1))
        stack.append((m, fm, rm, frm, b, fb, right, eps / 2.0, depth - 1))
    return total


def quadrature(f: Union[ClosedFormFn, Callable[[float], float]], x0: float, x: float,
               tol: float = 1e-10, max_depth: int = 40) -> float:
    """``integral of f from x0 to x``; both limits must lie in f's interval."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    if isinstance(f, ClosedFormFn):
        f.check_point(x0)
        f.check_point(x)
    if x < x0:
        return -adaptive_simpson(f, x, x0, tol, max_depth)
    return adaptive_simpson(f, x0, x, tol, max_depth)


class Antiderivative:
    """``x -> integral of f over [x0, x]``, memoized per instance."""

    def __init__(self, f: Callable[[float], float], x0: float, tol: float = 1e-10):
        self.f = f
        self.x0 = x0
        self.tol = tol
        self._cached = lru_cache(maxsize=4096)(self._compute)

    def _compute(self, x: float) -> float:
        return quadrature(self.f, self.x0, x, self.tol)

    def __call__(self, x: float) -> float:
        return self._cached(float(x))


# ---------------------------------------------------------------------------
# residuals

_EPS = 2.0 ** -52


def residual(ode, q, y: ClosedFormFn, points: Sequence[float]) -> float:
    """Max relative residual ``|sum c_j y^(n-j)| / sum |c_j y^(n-j)|``.

    ``q`` is a ClosedFormFn bound to the symbol ``q``, or a mapping from
    base symbols to functions when the coefficients use other symbols.
    A point contributes 0 when every term vanishes to working precision,
    i.e. ``sum |terms| <= 64 eps * sum_j |c_j| * max_k |y^(k)|``.
    """
    fns = {"q": q} if isinstance(q, ClosedFormFn) else dict(q)
    worst = 0.0
    n = ode.order
    for x in points:
        num = 0.0
        den = 0.0
        csum = 0.0
        ymax = 0.0
        for j, c in enumerate(ode.coeffs):
            yk = y.deriv(n - j, x)
            ymax = max(ymax, abs(yk))
            if c.is_zero():
                continue
            b = {}
            for ind in c.indeterminates():
                if ind.base not in fns:
                    raise NumevalError(f"no function bound to {ind.base}")
                b[ind] = fns[ind.base].deriv(ind.order, x)
            cv = evaluate(c, b)
            t = cv * yk
            num += t
            den += abs(t)
            csum += abs(cv)
        if den <= 64.0 * _EPS * csum * ymax:
            continue
        worst = max(worst, abs(num) / den)
    return worst


def interior_points(interval, count: int = 20) -> list[float]:
    """``count`` equally spaced points strictly inside the interval."""
    a, b = interval
    h = (b - a) / (count + 1)
    return [a + h * (i + 1) for i in range(count)]


# ---------------------------------------------------------------------------
# finite differences

def _central(f, order, x, h):
    if order == 1:
        return (f(x + h) - f(x - h)) / (2.0 * h)
    if order == 2:
        return (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h)
    raise ValueError("finite differences implemented for orders 1 and 2")


def fd_check(f: ClosedFormFn, order: int, x: float, h: Optional[float] = None) -> float:
    """``|Richardson central difference - f.deriv(order, x)|``."""
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    if h is None:
        h = 1e-3 if order == 1 else 2e-3
    a, b = f.interval
    if x - h < a or x + h > b:
        raise IntervalError(f"stencil [{x - h}, {x + h}] leaves {f.interval}")
    d1 = _central(f, order, x, h)
    d2 = _central(f, order, x, h / 2.0)
    est = (4.0 * d2 - d1) / 3.0
    return abs(est - f.deriv(order, x))


def fd_consistent(f: ClosedFormFn, probes: int = 5, tol: float = 1e-6) -> bool:
    """The ClosedFormFn invariant: orders 1 and 2 agree with finite differences."""
    a, b = f.interval
    margin = 0.01 * (b - a)
    pts = interior_points((a + margin, b - margin), probes)
    for x in pts:
        for k in (1, 2):
            if fd_check(f, k, x) > tol * (1.0 + abs(f.deriv(k, x))):
                return False
    return True
