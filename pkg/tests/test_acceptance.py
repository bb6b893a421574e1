"""Acceptance suite: ten criteria, one PASS/FAIL line each (run with ``-s``)."""
import contextlib
import math
import time

import pytest

from maxsym.diffalg import binomial, parse_text, var
from maxsym.itergen import (
    closed_form_K12,
    extract_K,
    generate_maxsym,
    k_recurrence,
    k_summation,
    phi_n,
    phi_n_r,
    theta_n_u,
)
from maxsym.cli import load_a15_truth
from maxsym.numeval import const_fn, cos_fn, exp_fn, poly_fn, pow_fn, scaled, sin_fn
from maxsym.solbasis import (
    basis_from_u,
    basis_from_uv,
    ermakov_basis,
    superfactorial,
    verify_basis_symbolic,
)
from maxsym.xform import verify_canonical_identity, verify_schwarzian_source_identity

P = parse_text


@contextlib.contextmanager
def criterion(number, title, limit=None):
    t0 = time.perf_counter()
    try:
        yield
        elapsed = time.perf_counter() - t0
        if limit is not None:
            assert elapsed < limit, f"took {elapsed:.2f} s, limit {limit} s"
    except BaseException:
        print(f"\nFAIL  {number:>2}. {title} ({time.perf_counter() - t0:.2f} s)")
        raise
    print(f"\nPASS  {number:>2}. {title} ({elapsed:.2f} s)")


def test_01_q_form_orders_three_and_four():
    with criterion(1, "q-form equations of order 3 and 4", limit=1.0):
        assert theta_n_u(3).as_operator() == P("2*q'*y + 4*q*y' + y'''")
        assert theta_n_u(4).as_operator() == P("3*y*(3*q^2 + q'') + 10*y'*q' + 10*q*y'' + y^(4)")


def test_02_r_form_orders_three_and_four():
    phi3 = P("-y*(r'^3 - 2*r*r'*r'' + r^2*r''')/r^3 + y'*(r'^2 - 2*r*r'')/r^2 + y'''")
    phi4 = P("3*y*(27*r'^4 - 68*r*r'^2*r'' + 24*r^2*r'*r''' + 4*r^2*(7*r''^2 - 2*r*r^(4)))/(16*r^4)"
             " - 5*y'*(r'^3 - 2*r*r'*r'' + r^2*r''')/r^3 + 5*(r'^2 - 2*r*r'')*y''/(2*r^2) + y^(4)")
    with criterion(2, "r-form equations of order 3 and 4", limit=1.0):
        assert phi_n(3).as_operator() == phi3
        assert phi_n(4).as_operator() == phi4


def test_03_a15_ground_truth():
    text, _ = load_a15_truth()
    want = P(text)
    with criterion(3, "order-15 coefficient of y against the transcription", limit=120.0):
        got = theta_n_u(15).coefficient(15)
        assert got == want, f"{len(got - want)} differing terms"


def test_04_recurrence_coherence():
    with criterion(4, "K coefficients: expansion, recurrence, summation, closed forms", limit=60.0):
        for n in range(1, 13):
            ext = extract_K(n)
            assert k_recurrence(n) == ext, n
            assert k_summation(n) == ext, n
            if n >= 2:
                assert list(closed_form_K12(n)) == ext[1:3], n


def test_05_second_coefficient_law():
    with criterion(5, "coefficient of y^(n-2) is C(n+1,3) q for n = 2..15"):
        for n in range(2, 16):
            assert generate_maxsym(n).coefficient(2) == var("q") * binomial(n + 1, 3), n


def test_06_operator_paths_agree():
    with criterion(6, "r-rewrite and u-rewrite operators agree for n = 2..10"):
        for n in range(2, 11):
            assert phi_n_r(n) == theta_n_u(n), n


def test_07_transformation_identities():
    with criterion(7, "canonical-form identity n = 2..8 and Schwarzian source identity"):
        for n in range(2, 9):
            assert verify_canonical_identity(n).is_zero(), n
        assert verify_schwarzian_source_identity().is_zero()


# u, v with u v' - u' v = 1 and the exact q they realize
_SOURCES = [
    ("q=0", lambda: const_fn(1.0), lambda: poly_fn([0, 1]), 0.0),
    ("q=1", lambda: cos_fn(), lambda: sin_fn(), 1.0),
    ("q=-1", lambda: exp_fn(), lambda: scaled(exp_fn(-1.0), -0.5), -1.0),
]


def test_08_numeric_solution_bases():
    with criterion(8, "numeric bases: residual <= 1e-8, Wronskian = prod j! (rel 1e-8)"):
        for label, mk_u, mk_v, qv in _SOURCES:
            q = const_fn(qv)
            for n in range(2, 7):
                want = superfactorial(n)
                for basis in (basis_from_u(mk_u(), n, q=q), basis_from_uv(mk_u(), mk_v(), n, q=q)):
                    pts = basis.sample_points(20)
                    res = max(basis.residuals(pts))
                    assert res <= 1e-8, (label, n, basis.provenance, res)
                    for w in basis.wronskians():
                        assert abs(w - want) <= 1e-8 * want, (label, n, basis.provenance, w)


def test_09_symbolic_basis():
    with criterion(9, "symbolic basis entries solve the equation for n = 2..8"):
        for n in range(2, 9):
            for k in range(n):
                assert verify_basis_symbolic(n, k).is_zero(), (n, k)


def test_10_standard_form_class():
    cases = [
        ("r=1, B=0", const_fn(1.0), const_fn(0.0)),
        ("r=x^2 on [1,2], B=0", pow_fn(2, (1.0, 2.0)), const_fn(0.0, (1.0, 2.0))),
        ("r=e^2x, B=1", exp_fn(2.0), const_fn(1.0)),
        ("r=1+x^2, B=sin", poly_fn([1, 0, 1]), sin_fn()),
    ]
    with criterion(10, "standard-form class: residual <= 1e-8 for four (r, B)"):
        for label, r, B in cases:
            res = max(ermakov_basis(r, B).residuals())
            assert res <= 1e-8, (label, res)
