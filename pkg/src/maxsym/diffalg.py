"""Exact Laurent differential polynomials.

A :class:`DiffPoly` is a finite sum of monomials in derivative
indeterminates ``x^(k)`` with integer (possibly negative) exponents and
rational coefficients.  The ring carries the total derivative ``D_x`` and a
substitution engine that rewrites high-order indeterminates to a fixpoint.

Example::

    >>> q = var("q")
    >>> (q**2 * total_derivative(q)).to_text()
    "q^2*q'"
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import total_ordering
from typing import Iterable, Mapping, Sequence, Union

# Indeterminates are packed into one int: rank * _SPAN + order.
_SPAN = 1 << 16

# Registration order fixes the variable ordering used for canonical output.
_BASES: list[str] = []
_RANK: dict[str, int] = {}

DEFAULT_BASES = ("q", "r", "s", "u", "v", "W", "h", "B", "I", "J", "E", "g", "w", "y")


class DiffAlgError(Exception):
    """Base class for errors raised by the differential algebra."""


class NonlinearError(DiffAlgError):
    pass


class RewriteBudgetError(DiffAlgError):
    """The fixpoint loop exceeded its iteration budget."""


class EvaluationError(DiffAlgError):
    pass


class ParseError(DiffAlgError):
    pass


def register_base(name: str) -> int:
    """Register ``name`` as a base symbol and return its rank.

    Registering an existing name is a no-op.
    """
    if name in _RANK:
        return _RANK[name]
    if not name.isidentifier():
        raise ValueError(f"invalid base symbol {name!r}")
    _RANK[name] = len(_BASES)
    _BASES.append(name)
    return _RANK[name]


def registered_bases() -> tuple[str, ...]:
    return tuple(_BASES)


for _name in DEFAULT_BASES:
    register_base(_name)


@total_ordering
@dataclass(frozen=True)
class Indeterminate:
    """The ``order``-th derivative of the base symbol ``base``."""

    base: str
    order: int = 0

    def __post_init__(self):
        if self.base not in _RANK:
            raise ValueError(f"base symbol {self.base!r} is not registered")
        if self.order < 0 or self.order >= _SPAN:
            raise ValueError(f"derivative order out of range: {self.order}")

    @property
    def key(self) -> int:
        return _RANK[self.base] * _SPAN + self.order

    @classmethod
    def from_key(cls, key: int) -> "Indeterminate":
        rank, order = divmod(key, _SPAN)
        return cls(_BASES[rank], order)

    def __lt__(self, other):
        if not isinstance(other, Indeterminate):
            return NotImplemented
        return self.key < other.key

    def derivative(self, k: int = 1) -> "Indeterminate":
        return Indeterminate(self.base, self.order + k)

    def __str__(self):
        return _factor_text(self.base, self.order)


Coefficient = Union[int, Fraction]
# A monomial key: tuple of (packed indeterminate, nonzero exponent), sorted.
MonoKey = tuple


def _key_base(k: int) -> str:
    return _BASES[k // _SPAN]


def _mul_keys(a: MonoKey, b: MonoKey) -> MonoKey:
    if not a:
        return b
    if not b:
        return a
    out = []
    i = j = 0
    la, lb = len(a), len(b)
    while i < la and j < lb:
        ka, ea = a[i]
        kb, eb = b[j]
        if ka < kb:
            out.append(a[i])
            i += 1
        elif kb < ka:
            out.append(b[j])
            j += 1
        else:
            e = ea + eb
            if e:
                out.append((ka, e))
            i += 1
            j += 1
    if i < la:
        out.extend(a[i:])
    if j < lb:
        out.extend(b[j:])
    return tuple(out)


def _normalize_coeff(c) -> Coefficient:
    if isinstance(c, Fraction):
        return c.numerator if c.denominator == 1 else c
    if isinstance(c, int):
        return c
    if isinstance(c, str):
        return _normalize_coeff(Fraction(c))
    raise TypeError(f"exact rational coefficient required, got {type(c).__name__}")


class DiffPoly:
    """Immutable sparse Laurent polynomial in derivative indeterminates.

    Terms are held in a dict from monomial key to a nonzero exact
    coefficient (``int`` or ``Fraction``).  Equality is equality of these
    canonical dicts.
    """

    __slots__ = ("_terms", "_hash")

    def __init__(self, terms: Mapping[MonoKey, Coefficient] | None = None):
        clean = {}
        if terms:
            for k, c in terms.items():
                c = _normalize_coeff(c)
                if c:
                    clean[k] = c
        self._terms = clean
        self._hash = None

    @classmethod
    def _raw(cls, terms: dict) -> "DiffPoly":
        # terms already canonical and free of zeros
        obj = cls.__new__(cls)
        obj._terms = terms
        obj._hash = None
        return obj

    # -- constructors ----------------------------------------------------
    @classmethod
    def const(cls, c) -> "DiffPoly":
        return cls({(): c})

    @classmethod
    def from_indeterminate(cls, ind: Indeterminate, exp: int = 1, coeff=1) -> "DiffPoly":
        if exp == 0:
            return cls.const(coeff)
        return cls({((ind.key, exp),): coeff})

    @classmethod
    def monomial(cls, coeff, factors: Mapping[Indeterminate, int]) -> "DiffPoly":
        key = tuple(sorted((ind.key, e) for ind, e in factors.items() if e))
        return cls({key: coeff})

    # -- inspection ------------------------------------------------------
    @property
    def terms(self) -> dict:
        return dict(self._terms)

    def __len__(self):
        return len(self._terms)

    def __bool__(self):
        return bool(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def is_monomial(self) -> bool:
        return len(self._terms) == 1

    def indeterminates(self) -> set[Indeterminate]:
        return {Indeterminate.from_key(k) for key in self._terms for k, _ in key}

    def bases(self) -> set[str]:
        return {_key_base(k) for key in self._terms for k, _ in key}

    def max_order(self, base: str) -> int:
        """Highest derivative order of ``base`` present, or -1."""
        rank = _RANK[base]
        best = -1
        for key in self._terms:
            for k, _ in key:
                if k // _SPAN == rank:
                    best = max(best, k % _SPAN)
        return best

    def iter_terms(self):
        """Yield ``(coeff, {Indeterminate: exp})`` in canonical order."""
        for key in sorted(self._terms, key=_display_order):
            yield self._terms[key], {Indeterminate.from_key(k): e for k, e in key}

    def constant_term(self) -> Coefficient:
        return self._terms.get((), 0)

    # -- arithmetic ------------------------------------------------------
    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = DiffPoly.const(other)
        if not isinstance(other, DiffPoly):
            return NotImplemented
        return self._terms == other._terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self._terms.items()))
        return self._hash

    def __add__(self, other):
        other = _coerce(other)
        if other is None:
            return NotImplemented
        if len(other._terms) > len(self._terms):
            big, small = other._terms, self._terms
        else:
            big, small = self._terms, other._terms
        out = dict(big)
        for k, c in small.items():
            v = out.get(k, 0) + c
            if v:
                out[k] = _normalize_coeff(v)
            else:
                out.pop(k, None)
        return DiffPoly._raw(out)

    __radd__ = __add__

    def __neg__(self):
        return DiffPoly._raw({k: -c for k, c in self._terms.items()})

    def __sub__(self, other):
        other = _coerce(other)
        if other is None:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        other = _coerce(other)
        if other is None:
            return NotImplemented
        return other + (-self)

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            if not other:
                return DiffPoly()
            return DiffPoly._raw(
                {k: _normalize_coeff(c * other) for k, c in self._terms.items()})
        other = _coerce(other)
        if other is None:
            return NotImplemented
        out: dict = {}
        get = out.get
        for ka, ca in self._terms.items():
            for kb, cb in other._terms.items():
                k = _mul_keys(ka, kb)
                out[k] = get(k, 0) + ca * cb
        return DiffPoly._raw({k: _normalize_coeff(c) for k, c in out.items() if c})

    __rmul__ = __mul__

    def __pow__(self, e: int):
        if not isinstance(e, int):
            return NotImplemented
        if e < 0:
            return self.inverse() ** (-e)
        result = DiffPoly.const(1)
        base = self
        while e:
            if e & 1:
                result = result * base
            e >>= 1
            if e:
                base = base * base
        return result

    def inverse(self) -> "DiffPoly":
        """Laurent inverse; only monomials are invertible."""
        if not self.is_monomial():
            raise DiffAlgError("only monomials have a Laurent inverse")
        (key, c), = self._terms.items()
        return DiffPoly._raw({tuple((k, -e) for k, e in key): _normalize_coeff(Fraction(1) / c)})

    def __truediv__(self, other):
        if isinstance(other, (int, Fraction)):
            return self * (Fraction(1) / Fraction(other))
        other = _coerce(other)
        if other is None:
            return NotImplemented
        return self * other.inverse()

    def scale_monomial(self, factors: Mapping[Indeterminate, int]) -> "DiffPoly":
        """Multiply by the monomial ``prod ind**e``; cheap Laurent shift."""
        key = tuple(sorted((ind.key, e) for ind, e in factors.items() if e))
        return DiffPoly._raw({_mul_keys(k, key): c for k, c in self._terms.items()})

    # -- serialization ---------------------------------------------------
    def to_text(self) -> str:
        return to_text(self)

    def to_latex(self) -> str:
        return to_latex(self)

    def to_json_obj(self) -> dict:
        return to_json_obj(self)

    def __repr__(self):
        return f"DiffPoly({self.to_text()!r})"

    def __str__(self):
        return self.to_text()


def _coerce(x) -> DiffPoly | None:
    if isinstance(x, DiffPoly):
        return x
    if isinstance(x, (int, Fraction)):
        return DiffPoly.const(x)
    return None


def var(base: str, order: int = 0) -> DiffPoly:
    """The indeterminate ``base^(order)`` as a polynomial."""
    return DiffPoly.from_indeterminate(Indeterminate(base, order))


def _degree(key: MonoKey) -> int:
    return sum(e for _, e in key)


def _display_order(key: MonoKey):
    # graded (higher total degree first), ties lexicographic in the variable order
    return (-_degree(key), key)


# ---------------------------------------------------------------------------
# ring operations

def add(a: DiffPoly, b: DiffPoly) -> DiffPoly:
    return a + b


def mul(a: DiffPoly, b: DiffPoly) -> DiffPoly:
    return a * b


def total_derivative(p: DiffPoly) -> DiffPoly:
    """Apply ``D_x`` using the Leibniz rule on every monomial."""
    out: dict = {}
    get = out.get
    for key, c in p._terms.items():
        for i, (k, e) in enumerate(key):
            # k -> e * k^(e-1) * (k+1)
            rest = key[:i] + ((k, e - 1),) + key[i + 1:] if e != 1 else key[:i] + key[i + 1:]
            nk = _mul_keys(rest, ((k + 1, 1),))
            out[nk] = get(nk, 0) + c * e
    return DiffPoly._raw({k: _normalize_coeff(v) for k, v in out.items() if v})


def nth_derivative(p: DiffPoly, k: int) -> DiffPoly:
    for _ in range(k):
        p = total_derivative(p)
    return p


# ---------------------------------------------------------------------------
# rewriting

@dataclass(frozen=True)
class RewriteRule:
    """Replace every occurrence of ``target`` with ``replacement``."""

    target: Indeterminate
    replacement: DiffPoly

    def __post_init__(self):
        if self.replacement.max_order(self.target.base) >= self.target.order:
            raise DiffAlgError(
                f"replacement for {self.target} mentions {self.target.base} "
                f"at order >= {self.target.order}")


def substitute(p: DiffPoly, mapping: Mapping[Indeterminate, DiffPoly]) -> DiffPoly:
    """Simultaneously replace indeterminates by polynomials (one pass).

    Negative exponents are allowed only when the replacement is a monomial.
    """
    keymap = {ind.key: rep for ind, rep in mapping.items()}
    acc: dict = {}
    get = acc.get
    powcache: dict = {}
    for key, c in p._terms.items():
        keep = []
        hits = []
        for k, e in key:
            if k in keymap:
                hits.append((k, e))
            else:
                keep.append((k, e))
        if not hits:
            acc[key] = get(key, 0) + c
            continue
        prod = None
        for k, e in hits:
            pw = powcache.get((k, e))
            if pw is None:
                rep = keymap[k]
                if e < 0 and not rep.is_monomial():
                    raise DiffAlgError(
                        f"cannot substitute {Indeterminate.from_key(k)}^{e}: "
                        "replacement is not invertible")
                pw = rep ** e
                powcache[(k, e)] = pw
            prod = pw if prod is None else prod * pw
        keep = tuple(keep)
        for pk, pc in prod._terms.items():
            nk = _mul_keys(pk, keep)
            acc[nk] = get(nk, 0) + pc * c
    return DiffPoly._raw({k: _normalize_coeff(v) for k, v in acc.items() if v})


def reduce_fixpoint(p: DiffPoly, rules: Sequence[RewriteRule], budget: int = 10_000) -> DiffPoly:
    """Rewrite ``p`` until no rule target occurs.

    Each round substitutes the highest-ordered target still present.  With a
    rule table from :func:`build_rule_table` this finishes in one round per
    distinct target.
    """
    by_key = {rule.target.key: rule for rule in rules}
    rounds = 0
    while True:
        present = {k for key in p._terms for k, _ in key if k in by_key}
        if not present:
            return p
        rounds += 1
        if rounds > budget:
            raise RewriteBudgetError(
                f"rewriting did not terminate within {budget} rounds")
        top = max(present)
        rule = by_key[top]
        p = substitute(p, {rule.target: rule.replacement})


def build_rule_table(base: str, max_order: int, seed: RewriteRule) -> list[RewriteRule]:
    """Close the second-order rule ``seed`` under differentiation.

    Returns rules for ``base^(2) ... base^(max_order)``; each replacement
    mentions only ``base`` and ``base'`` among the derivatives of ``base``.
    """
    if seed.target != Indeterminate(base, 2):
        raise DiffAlgError(f"seed must target {base}''")
    if seed.replacement.max_order(base) >= 2:
        raise DiffAlgError("seed replacement must be free of second and higher derivatives")
    rules = [seed]
    rep = seed.replacement
    for j in range(3, max_order + 1):
        rep = reduce_fixpoint(total_derivative(rep), [seed])
        rules.append(RewriteRule(Indeterminate(base, j), rep))
    return rules


def interleaved_reducer(seed: RewriteRule):
    """Return ``f(p)`` that rewrites single occurrences of the seed target.

    Valid after one total derivative of an already reduced expression,
    where the target can only occur linearly.
    """
    def reduce(p: DiffPoly) -> DiffPoly:
        return substitute(p, {seed.target: seed.replacement})
    return reduce


# ---------------------------------------------------------------------------
# coefficient extraction and evaluation

def coefficient_of(p: DiffPoly, ind: Indeterminate) -> DiffPoly:
    """Coefficient of ``ind`` in ``p``, which must be linear in ``ind.base``."""
    rank = _RANK[ind.base]
    target = ind.key
    out = {}
    for key, c in p._terms.items():
        deg = 0
        hit = False
        for k, e in key:
            if k // _SPAN == rank:
                if e < 0:
                    raise NonlinearError(f"negative power of {ind.base}-derivative")
                deg += e
                hit = hit or k == target
        if deg > 1:
            raise NonlinearError(f"polynomial is not linear in {ind.base}")
        if hit:
            out[tuple((k, e) for k, e in key if k != target)] = c
    return DiffPoly._raw(out)


def evaluate(p: DiffPoly, bindings: Mapping[Indeterminate, float]) -> float:
    """Evaluate ``p`` in double precision.

    This is the single point where exact coefficients become floats.
    """
    vals = {ind.key: float(v) for ind, v in bindings.items()}
    total = 0.0
    for key in sorted(p._terms, key=_display_order):
        c = p._terms[key]
        t = float(c)
        for k, e in key:
            try:
                x = vals[k]
            except KeyError:
                raise EvaluationError(f"no binding for {Indeterminate.from_key(k)}") from None
            if e < 0 and x == 0.0:
                raise EvaluationError(f"division by zero: {Indeterminate.from_key(k)} = 0")
            t *= x ** e
        total += t
    return total


# ---------------------------------------------------------------------------
# text format

_PRIME_LIMIT = 3


def _factor_text(base: str, order: int) -> str:
    if order <= _PRIME_LIMIT:
        return base + "'" * order
    return f"{base}^({order})"


def _format_coeff(c) -> str:
    return str(c)


def _monomial_text(key: MonoKey) -> str:
    parts = []
    for k, e in key:
        s = _factor_text(_key_base(k), k % _SPAN)
        if e != 1:
            s += f"^{e}"
        parts.append(s)
    return "*".join(parts)


def to_text(p: DiffPoly) -> str:
    """Canonical text, e.g. ``2*q^2*q' - 3*u^(4)``."""
    if not p._terms:
        return "0"
    out = []
    for i, key in enumerate(sorted(p._terms, key=_display_order)):
        c = p._terms[key]
        neg = c < 0
        a = -c if neg else c
        mono = _monomial_text(key)
        if not mono:
            body = _format_coeff(a)
        elif a == 1:
            body = mono
        else:
            body = f"{_format_coeff(a)}*{mono}"
        if i == 0:
            out.append(("-" if neg else "") + body)
        else:
            out.append((" - " if neg else " + ") + body)
    return "".join(out)


class _Parser:
    """Recursive-descent parser for the text format.

    Accepts the canonical flat form plus parentheses, so nested displays can
    be transcribed directly::

        expr   := ['+'|'-'] term (('+'|'-') term)*
        term   := factor (('*'|'/') factor)*
        factor := atom ('^' int)?
        atom   := number | symbol primes ('^(' int ')')? | '(' expr ')'
    """

    def __init__(self, text: str):
        self.s = text
        self.i = 0

    def error(self, msg):
        raise ParseError(f"{msg} at position {self.i} in {self.s!r}")

    def ws(self):
        while self.i < len(self.s) and self.s[self.i].isspace():
            self.i += 1

    def peek(self):
        self.ws()
        return self.s[self.i] if self.i < len(self.s) else ""

    def take(self, ch):
        if self.peek() == ch:
            self.i += 1
            return True
        return False

    def parse(self) -> DiffPoly:
        p = self.expr()
        if self.peek():
            self.error("unexpected input")
        return p

    def expr(self) -> DiffPoly:
        sign = 1
        if self.take("-"):
            sign = -1
        else:
            self.take("+")
        acc = self.term() * sign
        while True:
            if self.take("+"):
                acc = acc + self.term()
            elif self.take("-"):
                acc = acc - self.term()
            else:
                return acc

    def term(self) -> DiffPoly:
        acc = self.factor()
        while True:
            if self.take("*"):
                acc = acc * self.factor()
            elif self.take("/"):
                d = self.factor()
                try:
                    acc = acc / d
                except DiffAlgError:
                    self.error("division by a non-monomial")
            else:
                return acc

    def integer(self) -> int:
        self.ws()
        start = self.i
        if self.i < len(self.s) and self.s[self.i] in "+-":
            self.i += 1
        while self.i < len(self.s) and self.s[self.i].isdigit():
            self.i += 1
        tok = self.s[start:self.i]
        if tok in ("", "+", "-"):
            self.error("integer expected")
        return int(tok)

    def factor(self) -> DiffPoly:
        a = self.atom()
        if self.take("^"):
            if self.peek() == "(":
                self.i += 1
                e = self.integer()
                if not self.take(")"):
                    self.error("')' expected")
            else:
                e = self.integer()
            try:
                a = a ** e
            except DiffAlgError:
                self.error("negative power of a non-monomial")
        return a

    def atom(self) -> DiffPoly:
        ch = self.peek()
        if ch == "(":
            self.i += 1
            p = self.expr()
            if not self.take(")"):
                self.error("')' expected")
            return p
        if ch.isdigit():
            start = self.i
            while self.i < len(self.s) and self.s[self.i].isdigit():
                self.i += 1
            return DiffPoly.const(int(self.s[start:self.i]))
        if ch.isalpha() or ch == "_":
            start = self.i
            while self.i < len(self.s) and (self.s[self.i].isalnum() or self.s[self.i] == "_"):
                self.i += 1
            name = self.s[start:self.i]
            if name not in _RANK:
                self.error(f"unknown symbol {name!r}")
            order = 0
            while self.i < len(self.s) and self.s[self.i] == "'":
                order += 1
                self.i += 1
            # base^(k) is a derivative order; base^k is a power
            if order == 0 and self.s.startswith("^(", self.i):
                save = self.i
                self.i += 2
                self.ws()
                if self.i < len(self.s) and self.s[self.i].isdigit():
                    order = self.integer()
                    if not self.take(")"):
                        self.error("')' expected")
                else:
                    self.i = save
            return var(name, order)
        self.error("expression expected")


def parse_text(text: str) -> DiffPoly:
    return _Parser(text).parse()


# ---------------------------------------------------------------------------
# JSON

def to_json_obj(p: DiffPoly) -> dict:
    terms = []
    for key in sorted(p._terms, key=_display_order):
        terms.append({
            "coeff": str(p._terms[key]),
            "factors": [
                {"base": _key_base(k), "order": k % _SPAN, "exp": e} for k, e in key
            ],
        })
    return {"terms": terms}


def from_json_obj(obj: Mapping) -> DiffPoly:
    out = DiffPoly()
    for t in obj["terms"]:
        coeff = t["coeff"]
        if not isinstance(coeff, str) or "." in coeff or "e" in coeff.lower():
            raise ParseError(f"coefficient must be a fraction string, got {coeff!r}")
        factors = {}
        for f in t["factors"]:
            ind = Indeterminate(f["base"], int(f["order"]))
            factors[ind] = factors.get(ind, 0) + int(f["exp"])
        out = out + DiffPoly.monomial(Fraction(coeff), factors)
    return out


def to_json(p: DiffPoly) -> str:
    return json.dumps(to_json_obj(p), separators=(",", ":"))


def from_json(text: str) -> DiffPoly:
    return from_json_obj(json.loads(text))


# ---------------------------------------------------------------------------
# LaTeX

def _latex_factor(base: str, order: int, e: int) -> str:
    if order == 0:
        s = base
        return s if e == 1 else f"{s}^{{{e}}}"
    if order <= 2:
        s = base + "'" * order
        return s if e == 1 else f"{s}^{{{e}}}"
    s = f"{base}^{{({order})}}"
    return s if e == 1 else f"[{s}]^{{{e}}}"


def _latex_coeff(c) -> str:
    c = Fraction(c)
    if c.denominator == 1:
        return str(c.numerator)
    return f"\\frac{{{c.numerator}}}{{{c.denominator}}}"


def to_latex(p: DiffPoly) -> str:
    if not p._terms:
        return "0"
    out = []
    for i, key in enumerate(sorted(p._terms, key=_display_order)):
        c = p._terms[key]
        neg = c < 0
        a = -c if neg else c
        mono = " ".join(_latex_factor(_key_base(k), k % _SPAN, e) for k, e in key)
        if not mono:
            body = _latex_coeff(a)
        elif a == 1:
            body = mono
        else:
            body = f"{_latex_coeff(a)} {mono}"
        if i == 0:
            out.append(("-" if neg else "") + body)
        else:
            out.append((" - " if neg else " + ") + body)
    return "".join(out)


def weight(p: DiffPoly, weights: Mapping[str, int]) -> set[int]:
    """Set of term weights, with ``base^(k)`` weighing ``weights[base] + k``."""
    out = set()
    for key in p._terms:
        out.add(sum((weights[_key_base(k)] + k % _SPAN) * e for k, e in key))
    return out


def binomial(n: int, k: int) -> int:
    return math.comb(n, k) if 0 <= k <= n else 0
