"""Iterated first-order operators and the equations they generate.

The operator is ``Psi = r*D + s``.  Its n-th power applied to ``y`` is a
linear ODE whose coefficients are the K-coefficients; dividing by ``r**n``
and choosing ``s = -(n-1) r'/2`` gives the normal form, and eliminating the
higher derivatives of ``r`` (or of ``u`` where ``r = u**2``) leaves an
equation whose coefficients involve only ``q`` and its derivatives.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional

from maxsym.diffalg import (
    DiffAlgError,
    DiffPoly,
    Indeterminate,
    RewriteRule,
    binomial,
    build_rule_table,
    coefficient_of,
    from_json_obj,
    reduce_fixpoint,
    substitute,
    to_json_obj,
    total_derivative,
    var,
)

Y = "y"

VARIABLE_SETS = ("rs", "r", "u", "q")


class ConsistencyError(DiffAlgError):
    """A reduction left symbols that should have cancelled."""


@dataclass(frozen=True)
class LinearOdeForm:
    """``c[0]*y^(n) + c[1]*y^(n-1) + ... + c[n]*y = 0``."""

    order: int
    coeffs: tuple
    variable_set: str = "q"

    def __post_init__(self):
        if self.order < 1:
            raise ValueError("order must be at least 1")
        if len(self.coeffs) != self.order + 1:
            raise ValueError(f"expected {self.order + 1} coefficients, got {len(self.coeffs)}")
        for c in self.coeffs:
            if Y in c.bases():
                raise ValueError("coefficients must not mention y")
        if self.variable_set not in VARIABLE_SETS:
            raise ValueError(f"unknown variable set {self.variable_set!r}")

    @classmethod
    def from_operator(cls, p: DiffPoly, n: int, variable_set: str) -> "LinearOdeForm":
        coeffs = tuple(coefficient_of(p, Indeterminate(Y, n - j)) for j in range(n + 1))
        return cls(n, coeffs, variable_set)

    def coefficient(self, j: int) -> DiffPoly:
        """Coefficient of ``y^(n-j)``."""
        return self.coeffs[j]

    def coefficient_of_derivative(self, k: int) -> DiffPoly:
        """Coefficient of ``y^(k)``."""
        return self.coeffs[self.order - k]

    def as_operator(self) -> DiffPoly:
        out = DiffPoly()
        for j, c in enumerate(self.coeffs):
            out = out + c * var(Y, self.order - j)
        return out

    def is_normal(self) -> bool:
        return self.coeffs[0] == 1 and (self.order < 2 or self.coeffs[1].is_zero())

    def map(self, f: Callable[[DiffPoly], DiffPoly], variable_set: Optional[str] = None):
        return LinearOdeForm(self.order, tuple(f(c) for c in self.coeffs),
                             variable_set or self.variable_set)

    def to_text(self) -> str:
        parts = []
        for j, c in enumerate(self.coeffs):
            if c.is_zero():
                continue
            yk = str(Indeterminate(Y, self.order - j))
            if c == 1:
                body, neg = yk, False
            elif c == -1:
                body, neg = yk, True
            elif c.is_monomial():
                t = c.to_text()
                neg = t.startswith("-")
                t = t.lstrip("-")
                body = yk if t == "1" else f"{t}*{yk}"
            else:
                body, neg = f"({c.to_text()})*{yk}", False
            if not parts:
                parts.append(("-" if neg else "") + body)
            else:
                parts.append((" - " if neg else " + ") + body)
        return ("".join(parts) or "0") + " = 0"

    def to_latex(self) -> str:
        parts = []
        for j, c in enumerate(self.coeffs):
            if c.is_zero():
                continue
            k = self.order - j
            yk = "y" + "'" * k if k <= 2 else f"y^{{({k})}}"
            if c == 1:
                body = yk
            elif c.is_monomial():
                body = f"{c.to_latex()} {yk}"
            else:
                body = f"\\left({c.to_latex()}\\right) {yk}"
            if parts and body.startswith("-"):
                parts.append(" - " + body[1:])
            else:
                parts.append((" + " if parts else "") + body)
        return "".join(parts) + " = 0"

    def to_json_obj(self) -> dict:
        return {
            "order": self.order,
            "variable_set": self.variable_set,
            "coefficients": [to_json_obj(c) for c in self.coeffs],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj(), separators=(",", ":"))

    @classmethod
    def from_json_obj(cls, obj) -> "LinearOdeForm":
        return cls(int(obj["order"]),
                   tuple(from_json_obj(c) for c in obj["coefficients"]),
                   obj.get("variable_set", "q"))

    @classmethod
    def from_json(cls, text: str) -> "LinearOdeForm":
        return cls.from_json_obj(json.loads(text))


# ---------------------------------------------------------------------------
# the iteration operator

def _psi(expr: DiffPoly, r: DiffPoly, s: DiffPoly,
         reducer: Optional[Callable[[DiffPoly], DiffPoly]] = None) -> DiffPoly:
    d = total_derivative(expr)
    if reducer is not None:
        d = reducer(d)
    return r * d + s * expr


def normal_s(n: int) -> DiffPoly:
    """``s = -(n-1) r'/2``, the choice that kills the ``y^(n-1)`` term."""
    return var("r", 1) * Fraction(-(n - 1), 2)


def psi_power(n: int, s_mode: str = "generic") -> DiffPoly:
    """``Psi^n[y]`` over ``r, s`` (generic) or over ``r`` alone (normal).

    >>> psi_power(1).to_text()
    "r*y' + s*y"
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    if s_mode == "generic":
        s = var("s")
    elif s_mode == "normal":
        s = normal_s(n)
    else:
        raise ValueError(f"unknown s_mode {s_mode!r}")
    r = var("r")
    expr = var(Y)
    for _ in range(n):
        expr = _psi(expr, r, s)
    return expr


def psi_power_u(n: int, reducer: Optional[Callable[[DiffPoly], DiffPoly]] = None) -> DiffPoly:
    """``Psi^n[y]`` in normal form with ``r = u**2``, ``s = -(n-1) u u'``.

    ``reducer`` is applied after every differentiation; any rewriting that
    commutes with ``D`` (such as ``u'' -> -q u``) may be interleaved this way.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    u = var("u")
    r = u * u
    s = u * var("u", 1) * (-(n - 1))
    expr = var(Y)
    for _ in range(n):
        expr = _psi(expr, r, s, reducer)
    return expr


def apply_psi(expr: DiffPoly, r: DiffPoly = None, s: DiffPoly = None) -> DiffPoly:
    """``Psi`` applied to a function: ``r*expr' + s*expr``."""
    r = var("r") if r is None else r
    s = var("s") if s is None else s
    return _psi(expr, r, s)


# ---------------------------------------------------------------------------
# K coefficients

def extract_K(n: int) -> list[DiffPoly]:
    """``[K_n^0, ..., K_n^n]`` read off the expanded ``Psi^n[y]``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    p = psi_power(n)
    return [coefficient_of(p, Indeterminate(Y, n - j)) for j in range(n + 1)]


def _k_table(n: int) -> list[list[DiffPoly]]:
    # table[m][j] = K_m^j for 0 <= m <= n, with K_0^0 = 1
    zero = DiffPoly()
    r = var("r")
    table = [[DiffPoly.const(1)]]
    for m in range(1, n + 1):
        prev = table[m - 1]
        row = []
        for j in range(m + 1):
            a = r * prev[j] if j <= m - 1 else zero
            b = apply_psi(prev[j - 1]) if j >= 1 else zero
            row.append(a + b)
        table.append(row)
    return table


def k_recurrence(n: int) -> list[DiffPoly]:
    """K-coefficients from ``K_n^j = r K_{n-1}^j + Psi(K_{n-1}^{j-1})``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    return _k_table(n)[n]


def k_summation(n: int) -> list[DiffPoly]:
    """K-coefficients from the unrolled sum over ``r^(n-k) Psi(K_{k-1}^{j-1})``.

    The sum is empty for ``j = 0``; that entry is ``r^n``.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    r = var("r")
    rpow = [DiffPoly.const(1)]
    for _ in range(n):
        rpow.append(rpow[-1] * r)
    # only rows below n are needed as inputs
    table = [[DiffPoly.const(1)]]
    for m in range(1, n + 1):
        row = [rpow[m]]
        for j in range(1, m + 1):
            acc = DiffPoly()
            for k in range(j, m + 1):
                prev = table[k - 1]
                if j - 1 < len(prev):
                    acc = acc + rpow[m - k] * apply_psi(prev[j - 1])
            row.append(acc)
        table.append(row)
    return table[n]


def closed_form_K12(n: int) -> tuple[DiffPoly, DiffPoly]:
    """Closed forms of ``K_n^1`` and ``K_n^2``."""
    if n < 2:
        raise ValueError("n must be at least 2")
    r, r1, r2 = var("r"), var("r", 1), var("r", 2)
    s = var("s")
    psi_s = apply_psi(s)
    k1 = r ** (n - 1) * (s * n + r1 * binomial(n, 2))
    inner = (s * r1 * 3 + r * r2 + r1 * r1 * Fraction(3 * n - 5, 4)) * binomial(n, 3)
    k2 = r ** (n - 2) * (psi_s * binomial(n, 2) + inner)
    return k1, k2


# ---------------------------------------------------------------------------
# normal-form operators

def phi_n(n: int) -> LinearOdeForm:
    """Normal-form equation in terms of ``r`` and its derivatives."""
    if n < 2:
        raise ValueError("n must be at least 2")
    p = psi_power(n, "normal").scale_monomial({Indeterminate("r"): -n})
    return LinearOdeForm.from_operator(p, n, "r")


def r_seed() -> RewriteRule:
    """``r'' -> (r'^2 - 4 q r^2) / (2 r)``."""
    r, r1, q = var("r"), var("r", 1), var("q")
    rep = r1 * r1 * r ** -1 * Fraction(1, 2) - q * r * 2
    return RewriteRule(Indeterminate("r", 2), rep)


def u_seed() -> RewriteRule:
    """``u'' -> -q u``."""
    return RewriteRule(Indeterminate("u", 2), -(var("q") * var("u")))


def _require_q_only(form: LinearOdeForm, leftovers: tuple[str, ...]) -> LinearOdeForm:
    for j, c in enumerate(form.coeffs):
        bad = c.bases() & set(leftovers)
        if bad:
            raise ConsistencyError(
                f"coefficient {j} of the order-{form.order} equation still mentions "
                f"{sorted(bad)}: {c.to_text()[:200]}")
    return form


def phi_n_r(n: int) -> LinearOdeForm:
    """``phi_n`` with ``r^(j), j >= 2`` eliminated in favour of ``q``."""
    rules = build_rule_table("r", n, r_seed())
    form = phi_n(n).map(lambda c: reduce_fixpoint(c, rules), "q")
    return _require_q_only(form, ("r", "s", "u", "v"))


def theta_n_u(n: int, interleave: bool = True) -> LinearOdeForm:
    """Normal-form equation built through ``r = u**2`` and ``u'' -> -q u``.

    With ``interleave`` the rewrite is applied after each application of
    the operator, which keeps intermediate expressions free of ``u^(k)``
    for ``k >= 2``; otherwise the full table is applied at the end.
    Both give the same equation.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    seed = u_seed()
    if interleave:
        rep = seed.replacement
        p = psi_power_u(n, lambda d: substitute(d, {seed.target: rep}))
    else:
        p = psi_power_u(n)
    p = p.scale_monomial({Indeterminate("u"): -2 * n})
    if not interleave:
        p = reduce_fixpoint(p, build_rule_table("u", n + 1, seed))
    form = LinearOdeForm.from_operator(p, n, "q")
    return _require_q_only(form, ("r", "s", "u", "v"))


def theta_n_u_late_s(n: int) -> LinearOdeForm:
    """Same as :func:`theta_n_u`, substituting ``s`` only after iterating.

    Kept to check that the early choice of ``s`` does not change the result.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    p = psi_power(n, "generic")
    u = var("u")
    s_val = u * var("u", 1) * (-(n - 1))
    r_val = u * u
    mapping = {}
    for k in range(n + 1):
        mapping[Indeterminate("s", k)] = s_val
        mapping[Indeterminate("r", k)] = r_val
        s_val = total_derivative(s_val)
        r_val = total_derivative(r_val)
    p = substitute(p, mapping).scale_monomial({Indeterminate("u"): -2 * n})
    p = reduce_fixpoint(p, build_rule_table("u", n + 2, u_seed()))
    form = LinearOdeForm.from_operator(p, n, "q")
    return _require_q_only(form, ("r", "s", "u", "v"))


def generate_maxsym(n: int) -> LinearOdeForm:
    """The order-``n`` normal-form equation of maximal symmetry in ``q``."""
    return theta_n_u(n)


def a_n2(n: int) -> DiffPoly:
    """Expected coefficient of ``y^(n-2)``: ``C(n+1, 3) q``."""
    return var("q") * binomial(n + 1, 3)


def source_coefficient_r() -> DiffPoly:
    """``(r'^2 - 2 r r'') / (4 r^2)`` as a Laurent polynomial."""
    r, r1, r2 = var("r"), var("r", 1), var("r", 2)
    return (r1 * r1 - r * r2 * 2) * r ** -2 * Fraction(1, 4)
