import pytest
import sympy as sp

from maxsym.diffalg import DiffPoly, Indeterminate, evaluate, parse_text, var
from maxsym.itergen import (
    ConsistencyError,
    LinearOdeForm,
    a_n2,
    apply_psi,
    closed_form_K12,
    extract_K,
    generate_maxsym,
    k_recurrence,
    k_summation,
    phi_n,
    phi_n_r,
    psi_power,
    theta_n_u,
    theta_n_u_late_s,
)

from oracles import fn, psi_power_sympy, same, to_sympy, x

P = parse_text


# -- psi_power ---------------------------------------------------------------

def test_psi_power_one():
    assert psi_power(1) == P("r*y' + s*y")


def test_psi_power_two_hand_expansion():
    assert psi_power(2) == P("r^2*y'' + (r*r' + 2*r*s)*y' + (r*s' + s^2)*y")


def test_psi_power_zero_is_identity():
    assert psi_power(0) == var("y")


def test_psi_power_rejects_negative():
    with pytest.raises(ValueError):
        psi_power(-1)


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
def test_psi_power_against_sympy(n):
    want = psi_power_sympy(n)
    ks = extract_K(n)
    for j, w in enumerate(want):
        assert same(to_sympy(ks[j]), w)


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_normal_mode_against_sympy(n):
    r = fn("r")
    want = psi_power_sympy(n, s=-sp.Rational(n - 1, 2) * r.diff(x))
    form = LinearOdeForm.from_operator(psi_power(n, "normal"), n, "r")
    for j, w in enumerate(want):
        assert same(to_sympy(form.coeffs[j]), w)


# -- K coefficients ----------------------------------------------------------

def test_extract_K_two():
    assert extract_K(2) == [P("r^2"), P("r*r' + 2*r*s"), P("r*s' + s^2")]


def test_K_leading_and_trailing():
    # K_n^0 = r^n and K_n^n = Psi^(n-1)[s]
    s_iter = var("s")
    for n in range(1, 7):
        ks = extract_K(n)
        assert ks[0] == var("r") ** n
        assert ks[n] == s_iter
        s_iter = apply_psi(s_iter)


def test_K21_closed_form():
    assert extract_K(2)[1] == var("r") * (var("s") * 2 + var("r", 1))


def test_recurrence_base_case():
    assert k_recurrence(1) == [var("r"), var("s")]
    assert k_summation(1) == [var("r"), var("s")]


def test_recurrence_leading_entry():
    assert k_recurrence(3)[0] == var("r") ** 3
    assert k_summation(3)[0] == var("r") ** 3


def test_recurrence_paths_agree_at_four():
    assert k_recurrence(4) == extract_K(4) == k_summation(4)


@pytest.mark.parametrize("n", range(1, 13))
def test_recurrence_paths_agree(n):
    ext = extract_K(n)
    assert k_recurrence(n) == ext
    assert k_summation(n) == ext


def test_closed_form_two():
    k1, k2 = closed_form_K12(2)
    assert k1 == P("r*(2*s + r')")
    assert k2 == P("r*s' + s^2")


def test_closed_form_three():
    k1, _ = closed_form_K12(3)
    assert k1 == P("r^2*(3*s + 3*r')")
    assert k1 == extract_K(3)[1]


@pytest.mark.parametrize("n", range(2, 13))
def test_closed_forms_match_expansion(n):
    assert list(closed_form_K12(n)) == extract_K(n)[1:3]


def test_closed_form_rejects_small_n():
    with pytest.raises(ValueError):
        closed_form_K12(1)


# -- phi_n -------------------------------------------------------------------

def test_phi3_y_prime():
    assert phi_n(3).coefficient_of_derivative(1) == P("(r'^2 - 2*r*r'')/r^2")


def test_phi4_y_second():
    assert phi_n(4).coefficient_of_derivative(2) == P("5*(r'^2 - 2*r*r'')/(2*r^2)")


def test_phi2_is_source_coefficient():
    assert phi_n(2).coefficient_of_derivative(0) == P("(r'^2 - 2*r*r'')/(4*r^2)")


@pytest.mark.parametrize("n", range(2, 9))
def test_phi_is_normal(n):
    assert phi_n(n).is_normal()


# -- q-only operators --------------------------------------------------------

def test_phi_r_three():
    assert phi_n_r(3).as_operator() == P("y''' + 4*q*y' + 2*q'*y")


def test_phi_r_four_y_coefficient():
    assert phi_n_r(4).coefficient_of_derivative(0) == P("9*q^2 + 3*q''")


def test_phi_r_two_source_equation():
    assert phi_n_r(2).as_operator() == P("y'' + q*y")


def test_theta_three():
    assert theta_n_u(3).as_operator() == P("y''' + 4*q*y' + 2*q'*y")


def test_theta_equals_phi_r_at_five():
    assert theta_n_u(5) == phi_n_r(5)


@pytest.mark.parametrize("n", range(2, 11))
def test_theta_equals_phi_r(n):
    assert theta_n_u(n) == phi_n_r(n)


@pytest.mark.parametrize("n", range(2, 7))
def test_s_substitution_order_does_not_matter(n):
    assert theta_n_u(n) == theta_n_u_late_s(n)


@pytest.mark.parametrize("n", range(2, 9))
def test_interleaved_reduction_matches_final_reduction(n):
    assert theta_n_u(n, interleave=True) == theta_n_u(n, interleave=False)


@pytest.mark.parametrize("n", range(2, 16))
def test_second_coefficient_law(n):
    form = generate_maxsym(n)
    assert form.coefficient(2) == a_n2(n)
    assert form.coefficient(1).is_zero()


def test_order_ten_second_coefficient():
    assert generate_maxsym(10).coefficient(2) == var("q") * 165


@pytest.mark.parametrize("n", range(2, 13))
def test_q_only_and_weight_homogeneous(n):
    from maxsym.diffalg import weight
    form = generate_maxsym(n)
    for j, c in enumerate(form.coeffs):
        assert c.bases() <= {"q"}
        if not c.is_zero():
            # q carries weight 2, each derivative adds 1
            assert weight(c, {"q": 2}) == {j}


@pytest.mark.parametrize("n", [2, 5, 9])
def test_q_zero_gives_canonical_form(n):
    form = generate_maxsym(n)
    binding = {Indeterminate("q", k): 0.0 for k in range(n + 1)}
    for c in form.coeffs[1:]:
        assert evaluate(c, binding) == 0.0


def test_theta_fifteen_has_q13():
    c = theta_n_u(15).coefficient(15)
    assert c.max_order("q") == 13


def test_consistency_guard():
    from maxsym.itergen import _require_q_only
    bad = LinearOdeForm(2, (DiffPoly.const(1), DiffPoly(), var("u")), "q")
    with pytest.raises(ConsistencyError):
        _require_q_only(bad, ("u",))


# -- LinearOdeForm -----------------------------------------------------------

def test_form_rejects_wrong_length():
    with pytest.raises(ValueError):
        LinearOdeForm(3, (DiffPoly.const(1),), "q")


def test_form_text():
    assert generate_maxsym(3).to_text() == "y''' + 4*q*y' + 2*q'*y = 0"
    assert generate_maxsym(2).to_text() == "y'' + q*y = 0"


@pytest.mark.parametrize("n", [2, 4, 7])
def test_form_json_round_trip(n):
    form = generate_maxsym(n)
    assert LinearOdeForm.from_json(form.to_json()) == form
