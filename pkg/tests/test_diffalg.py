import json
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from maxsym.diffalg import (
    DiffAlgError,
    DiffPoly,
    EvaluationError,
    Indeterminate,
    NonlinearError,
    ParseError,
    RewriteBudgetError,
    RewriteRule,
    build_rule_table,
    coefficient_of,
    evaluate,
    from_json,
    parse_text,
    reduce_fixpoint,
    to_json,
    total_derivative,
    var,
)

q, r, u, y = var("q"), var("r"), var("u"), var("y")
q1, r1, r2, u1, u2 = var("q", 1), var("r", 1), var("r", 2), var("u", 1), var("u", 2)


def P(text):
    return parse_text(text)


# -- strategies --------------------------------------------------------------

indeterminates = st.builds(Indeterminate, st.sampled_from(["q", "r", "u"]),
                           st.integers(min_value=0, max_value=3))
coeffs = st.fractions(min_value=-5, max_value=5, max_denominator=6).filter(bool)


@st.composite
def diffpolys(draw, max_terms=4, laurent=True):
    lo = -2 if laurent else 0
    out = DiffPoly()
    for _ in range(draw(st.integers(0, max_terms))):
        factors = draw(st.dictionaries(indeterminates, st.integers(lo, 3), max_size=3))
        out = out + DiffPoly.monomial(draw(coeffs), factors)
    return out


# -- add / mul ---------------------------------------------------------------

def test_add_identity():
    p = P("3*q^2*r' - u")
    assert DiffPoly() + p == p


def test_add_inverse():
    assert (q1 * 2) + (q1 * -2) == DiffPoly()
    assert ((q1 * 2) + (q1 * -2)).is_zero()


def test_add_combines_like_terms():
    assert q * r + q * r == P("2*q*r")


def test_mul_exponent_cancellation():
    assert r ** -1 * r == DiffPoly.const(1)


def test_mul_difference_of_squares():
    assert (u + u1) * (u - u1) == u * u - u1 * u1


def test_mul_laurent_expansion():
    # r^-2 (r'^2 - 2 r r'') = r'^2 r^-2 - 2 r'' r^-1
    got = r ** -2 * (r1 * r1 - r * r2 * 2)
    assert got == P("r^-2*r'^2 - 2*r^-1*r''")


def test_coefficients_stay_exact():
    p = q * Fraction(1, 3) + q * Fraction(2, 3)
    assert p == q
    assert isinstance(p.terms[next(iter(p.terms))], int)


def test_big_integer_coefficients():
    big = 10 ** 40 + 7
    p = q * big * (q * big)
    assert p == P(f"{big * big}*q^2")


def test_only_monomials_invert():
    with pytest.raises(DiffAlgError):
        (q + r) ** -1


# -- total derivative --------------------------------------------------------

def test_derivative_of_indeterminate():
    assert total_derivative(q) == q1


def test_derivative_negative_power():
    assert total_derivative(r ** -1) == -(r1 * r ** -2)


def test_derivative_product_rule():
    assert total_derivative(u * u1) == u1 * u1 + u * u2


def test_derivative_of_constant():
    assert total_derivative(DiffPoly.const(7)).is_zero()


# -- rewriting ---------------------------------------------------------------

def u_seed():
    return RewriteRule(Indeterminate("u", 2), -(q * u))


def test_reduce_single_rule():
    assert reduce_fixpoint(u2, [u_seed()]) == -(q * u)


def test_reduce_third_order_from_table():
    rules = build_rule_table("u", 3, u_seed())
    # oracle: D(-q u) = -q' u - q u'
    assert reduce_fixpoint(var("u", 3), rules) == -(q1 * u) - q * u1


def test_reduce_leaves_untargeted_alone():
    rules = build_rule_table("u", 5, u_seed())
    assert reduce_fixpoint(q1, rules) == q1


def test_rule_table_u_order_3():
    rules = build_rule_table("u", 3, u_seed())
    assert [rule.target for rule in rules] == [Indeterminate("u", 2), Indeterminate("u", 3)]
    assert rules[1].replacement == -(q1 * u) - q * u1


def test_rule_table_u_order_4():
    rules = build_rule_table("u", 4, u_seed())
    # oracle: D(-q' u - q u') = -q'' u - 2 q' u' - q u'', then u'' -> -q u
    assert rules[2].replacement == P("-q''*u - 2*q'*u' + q^2*u")


def test_rule_table_r_seed_alone():
    seed = RewriteRule(Indeterminate("r", 2), (r1 * r1 - q * r * r * 4) * (r * 2) ** -1)
    rules = build_rule_table("r", 2, seed)
    assert rules == [seed]
    assert seed.replacement == P("1/2*r^-1*r'^2 - 2*q*r")


def test_rule_table_rejects_bad_seed():
    with pytest.raises(DiffAlgError):
        build_rule_table("u", 4, RewriteRule(Indeterminate("u", 3), q * u))
    with pytest.raises(DiffAlgError):
        RewriteRule(Indeterminate("u", 2), var("u", 2) * q)


def test_rule_table_replacements_are_reduced():
    rules = build_rule_table("u", 8, u_seed())
    for rule in rules:
        assert rule.replacement.max_order("u") <= 1


def test_reduce_budget_trips_on_cycles():
    # a -> b and b -> a never terminates; RewriteRule itself permits it
    # because the bases differ
    rules = [RewriteRule(Indeterminate("q", 1), var("r", 1)),
             RewriteRule(Indeterminate("r", 1), var("q", 1))]
    with pytest.raises(RewriteBudgetError):
        reduce_fixpoint(q1, rules, budget=50)


# -- coefficient extraction --------------------------------------------------

def test_coefficient_read_off():
    p = r * r * var("y", 2) + var("s") * y
    assert coefficient_of(p, Indeterminate("y", 2)) == r * r


def test_coefficient_of_order_three_equation():
    p = q1 * y * 2 + q * var("y", 1) * 4 + var("y", 3)
    assert coefficient_of(p, Indeterminate("y", 1)) == q * 4


def test_coefficient_rejects_nonlinear():
    with pytest.raises(NonlinearError):
        coefficient_of(y * var("y", 1), Indeterminate("y", 1))


def test_coefficient_absent_is_zero():
    assert coefficient_of(q * y, Indeterminate("y", 2)).is_zero()


# -- evaluation --------------------------------------------------------------

def test_evaluate_square():
    assert evaluate(q1 * q1, {Indeterminate("q", 1): 3.0}) == 9.0


def test_evaluate_pole():
    with pytest.raises(EvaluationError):
        evaluate(r ** -1, {Indeterminate("r"): 0.0})


def test_evaluate_missing_binding():
    with pytest.raises(EvaluationError):
        evaluate(q * r, {Indeterminate("q"): 1.0})


def test_evaluate_order_four_coefficient():
    a44 = q * q * 9 + var("q", 2) * 3
    assert evaluate(a44, {Indeterminate("q"): 1.0, Indeterminate("q", 2): 2.0}) == 15.0


# -- serialization -----------------------------------------------------------

def test_text_format_example():
    p = q * q * q1 * 2 - var("u", 4) * 3
    assert p.to_text() == "2*q^2*q' - 3*u^(4)"


def test_text_prime_forms_parse_alike():
    assert P("u'''") == P("u^(3)") == var("u", 3)
    assert P("q^(4)^2") == var("q", 4) ** 2


def test_text_rejects_unknown_symbol():
    with pytest.raises(ParseError):
        P("2*zeta")


def test_text_nested_expression():
    assert P("2*(q + r)^2 - (q*(2*r))") == P("2*q^2 + 2*q*r + 2*r^2")


def test_json_shape():
    obj = json.loads(to_json(q1 * q1 * Fraction(3, 2)))
    assert obj == {"terms": [{"coeff": "3/2", "factors": [{"base": "q", "order": 1, "exp": 2}]}]}


def test_json_rejects_decimal_coefficient():
    with pytest.raises(ParseError):
        from_json('{"terms":[{"coeff":"1.5","factors":[]}]}')


def test_latex_notation():
    p = var("q", 3) ** 3 * 457296 + var("q", 1) ** 2 * Fraction(1, 2) - var("q", 2)
    assert p.to_latex() == "457296 [q^{(3)}]^{3} + \\frac{1}{2} q'^{2} - q''"


# -- properties --------------------------------------------------------------

@given(diffpolys(), diffpolys(), diffpolys())
def test_ring_axioms(a, b, c):
    assert a + b == b + a
    assert a * b == b * a
    assert (a + b) + c == a + (b + c)
    assert (a * b) * c == a * (b * c)
    assert a * (b + c) == a * b + a * c


@given(diffpolys(), diffpolys())
def test_derivative_is_a_derivation(a, b):
    assert total_derivative(a * b) == a * total_derivative(b) + total_derivative(a) * b
    assert total_derivative(a + b) == total_derivative(a) + total_derivative(b)


@given(diffpolys(laurent=False))
def test_reduce_is_idempotent(p):
    rules = build_rule_table("u", 5, u_seed())
    once = reduce_fixpoint(p, rules)
    assert once.max_order("u") <= 1
    assert reduce_fixpoint(once, rules) == once


@given(diffpolys(), diffpolys(),
       st.lists(st.floats(1.0, 2.0), min_size=12, max_size=12))
def test_evaluate_is_a_homomorphism(a, b, vals):
    inds = [Indeterminate(base, k) for base in ("q", "r", "u") for k in range(4)]
    binding = dict(zip(inds, vals))
    ea, eb = evaluate(a, binding), evaluate(b, binding)
    assert evaluate(a * b, binding) == pytest.approx(ea * eb, rel=1e-12, abs=1e-12)
    assert evaluate(a + b, binding) == pytest.approx(ea + eb, rel=1e-12, abs=1e-12)


@given(diffpolys())
def test_text_round_trip(p):
    assert parse_text(p.to_text()) == p


@given(diffpolys())
def test_json_round_trip(p):
    assert from_json(to_json(p)) == p


@settings(max_examples=50)
@given(diffpolys(), diffpolys())
def test_canonical_form_is_unique(a, b):
    # equal values have identical term dicts and serialize identically
    s1, s2 = a + b, b + a
    assert s1.terms == s2.terms
    assert s1.to_text() == s2.to_text()
