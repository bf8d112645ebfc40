from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from cyclic_formality.checks import divergence_via_forms
from cyclic_formality.gradedcore import (
    DiffForm,
    KoszulContext,
    MultiVector,
    PolyFunction,
    contraction,
    delta_omega,
    divergence,
    dx,
    hkr_chain,
    hkr_cochain,
    interior_product,
    koszul_sign,
    lie_action,
    perm_sign,
    schouten,
    theta,
    wedge,
    x,
)
from cyclic_formality.hochschild import HochschildChain

from strategies import forms, graded_multivectors, multivectors, polys

D = 2
X1, X2 = x(D, 0), x(D, 1)
ONE = PolyFunction.const(D, 1)


def sign(n):
    return -1 if n % 2 else 1


# -- polynomials ------------------------------------------------------------

def test_poly_arithmetic():
    assert X1 * X2 == PolyFunction(D, {(1, 1): 1})
    assert (X1 * X1).partial(0) == X1 * 2
    p = X1 * X2 + X1 * Fraction(3, 2)
    zero = p + (-p)
    assert not zero and zero.terms == {}


def test_poly_evaluation_and_degree():
    p = X1 * X1 * X2 - X2 + 1
    assert p(2, 3) == 12 - 3 + 1
    assert p.degree() == 3
    assert PolyFunction.const(D, 5).is_constant()


@given(polys(), polys(), polys())
def test_poly_ring_axioms(p, q, r):
    assert p * (q + r) == p * q + p * r
    assert (p * q) * r == p * (q * r)
    assert p * q == q * p


@given(polys(), polys(), st.integers(0, D - 1))
def test_partial_is_a_derivation(p, q, nu):
    assert (p * q).partial(nu) == p.partial(nu) * q + p * q.partial(nu)


def test_poly_json_round_trip():
    p = X1 * X2 * Fraction(-3, 7) + 2
    assert PolyFunction.from_dict(p.to_dict()) == p


# -- multivectors -------------------------------------------------------------

def test_wedge_of_coordinate_fields():
    t12 = wedge(theta(D, 0), theta(D, 1))
    assert t12.terms == {(0, (0, 1), (0, 0)): 1}
    assert wedge(theta(D, 1), theta(D, 0)) == -t12
    assert not wedge(theta(D, 0), theta(D, 0))


@given(multivectors(), multivectors(), multivectors())
def test_wedge_associative(a, b, c):
    assert wedge(wedge(a, b), c) == wedge(a, wedge(b, c))


@given(st.integers(0, D), st.integers(0, D), st.data())
def test_wedge_graded_commutative(ka, kb, data):
    a = data.draw(multivectors(k=ka))
    b = data.draw(multivectors(k=kb))
    assert wedge(a, b) == wedge(b, a).scale(sign(ka * kb))


def test_multivector_json_round_trip():
    g = theta(D, 0, 1, coeff=X1 * Fraction(5, 3), ell=2) + theta(D, 1)
    assert MultiVector.from_dict(g.to_dict()) == g
    w = dx(D, 0, coeff=X2) + dx(D, 0, 1)
    assert DiffForm.from_dict(w.to_dict()) == w


# -- Schouten bracket ----------------------------------------------------------

def test_bracket_of_vector_fields():
    assert schouten(theta(D, 0), theta(D, 1, coeff=X1)) == theta(D, 1)


def test_constant_bivector_is_poisson():
    pi = theta(D, 0, 1)
    assert not schouten(pi, pi)


def test_bracket_of_bivector_with_function():
    # oracle: Leibniz rule [a b, c] = a [b, c] + (-1)^{(|c|-1)|b|} [a, c] b
    # with a = x2 d1, b = d2, c = x1 and [xi, f] = xi(f):
    # [d2, x1] = 0 and [x2 d1, x1] = x2, so the bracket is -x2 d2
    gamma = theta(D, 0, 1, coeff=X2)
    f = MultiVector.from_function(X1)
    assert schouten(gamma, f) == theta(D, 1, coeff=-X2)


@given(graded_multivectors(), graded_multivectors())
def test_schouten_graded_antisymmetry(a, b):
    (da, a), (db, b) = a, b
    assert schouten(a, b) == schouten(b, a).scale(-sign(da * db))


@given(graded_multivectors(maxdeg=2), graded_multivectors(maxdeg=2), graded_multivectors(maxdeg=2))
def test_schouten_graded_jacobi(a, b, c):
    (da, a), (db, b), (_dc, c) = a, b, c
    lhs = schouten(a, schouten(b, c))
    rhs = schouten(schouten(a, b), c) + schouten(b, schouten(a, c)).scale(sign(da * db))
    assert lhs == rhs


@given(multivectors(k=1), multivectors(), multivectors())
def test_vector_field_bracket_is_a_derivation_of_wedge(xi, b, c):
    assert schouten(xi, wedge(b, c)) == wedge(schouten(xi, b), c) + wedge(b, schouten(xi, c))


# -- divergence ------------------------------------------------------------------

def test_divergence_examples():
    assert divergence(theta(D, 0, coeff=X1)) == MultiVector.from_function(ONE)
    assert not divergence(theta(D, 0, 1))
    assert divergence(theta(D, 0, 1, coeff=X1)) == theta(D, 1)
    assert divergence(theta(D, 0, 1, coeff=X1)) == divergence_via_forms(theta(D, 0, 1, coeff=X1))


def test_delta_omega_examples():
    assert delta_omega(theta(D, 0, coeff=X1)) == MultiVector.from_function(ONE, ell=1)
    assert not delta_omega(MultiVector.from_function(X1 * X2))


@given(multivectors(d=3))
def test_divergence_matches_volume_form_oracle(g):
    assert divergence(g) == divergence_via_forms(g)


@given(multivectors())
def test_divergence_squares_to_zero(g):
    assert not divergence(divergence(g))
    assert not delta_omega(delta_omega(g))


@given(graded_multivectors(), graded_multivectors())
def test_divergence_differentiates_the_bracket(a, b):
    (da, a), (_db, b) = a, b
    lhs = divergence(schouten(a, b))
    rhs = schouten(divergence(a), b) + schouten(a, divergence(b)).scale(sign(da))
    assert lhs == rhs


# -- contraction, interior product, Lie action ---------------------------------------

def test_contraction_examples():
    assert contraction(theta(D, 0), dx(D, 0)) == MultiVector.from_function(ONE)
    f = MultiVector.from_function(X1 * X2)
    assert contraction(f, DiffForm.from_function(ONE)) == f
    # rightmost form factor pairs with the rightmost theta
    assert contraction(theta(D, 0, 1), dx(D, 0)) == -theta(D, 1)
    assert contraction(theta(D, 0, 1), dx(D, 1)) == theta(D, 0)


@given(multivectors(), forms(p=1), forms(p=1))
def test_contraction_pairs_rightmost_factor_first(g, alpha, beta):
    assert contraction(g, alpha * beta) == contraction(contraction(g, beta), alpha)


@given(st.integers(0, 3), st.data())
def test_full_contraction_matches_interior_product(k, data):
    d = 3
    g = data.draw(multivectors(d=d, k=k))
    w = data.draw(forms(d=d, p=k))
    iota = interior_product(g, w).coefficient(())
    assert contraction(g, w) == MultiVector.from_function(iota).scale(sign(k * (k - 1) // 2))


def test_lie_derivative_examples():
    assert lie_action(theta(D, 0), dx(D, 1, coeff=X1)) == dx(D, 1)
    assert not lie_action(theta(D, 0, 1, coeff=X1 * X2), DiffForm.from_function(ONE))


@given(polys(nonzero=True), forms())
def test_lie_action_of_function_is_df_wedge(f, w):
    # direct formula: L_f w = d(f w) - f dw = df ^ w
    got = lie_action(MultiVector.from_function(f), w)
    assert got == DiffForm.from_function(f).exterior_derivative() * w


@given(polys(nonzero=True), forms(p=1))
def test_lie_action_of_function_on_closed_form(f, w):
    closed = w.exterior_derivative()
    lhs = lie_action(MultiVector.from_function(f), closed)
    assert lhs == (DiffForm.from_function(f) * closed).exterior_derivative()


@given(graded_multivectors(d=3), forms(d=3))
def test_lie_action_graded_commutes_with_d(g, w):
    dg, g = g
    lhs = lie_action(g, w).exterior_derivative()
    rhs = lie_action(g, w.exterior_derivative())
    assert lhs == rhs.scale(sign(dg))


# -- HKR maps ----------------------------------------------------------------------

def test_hkr_chain_examples():
    assert hkr_chain(HochschildChain.from_tuple([X1])) == DiffForm.from_function(X1)
    assert hkr_chain(HochschildChain.from_tuple([X1, X2])) == dx(D, 1, coeff=X1)
    half = dx(D, 0, 1).scale(Fraction(1, 2))
    assert hkr_chain(HochschildChain.from_tuple([ONE, X1, X2])) == half


def test_hkr_cochain_examples():
    op = hkr_cochain(theta(D, 0, 1))
    assert op(X1, X2) == PolyFunction.const(D, Fraction(1, 2))
    assert op(X2, X1) == PolyFunction.const(D, Fraction(-1, 2))
    h = X1 * X2 + 3
    zero_ary = hkr_cochain(MultiVector.from_function(h))
    assert zero_ary.arity == 0 and zero_ary() == h


@given(polys(), polys())
def test_hkr_cochain_of_constant_bivector(f, g):
    op = hkr_cochain(theta(D, 0, 1))
    half = Fraction(1, 2)
    assert op(f, g) == (f.partial(0) * g.partial(1) - f.partial(1) * g.partial(0)) * half


# -- Koszul signs --------------------------------------------------------------------

def _transposition_oracle(perm, degs):
    """Bubble-sort the permuted word back, one adjacent swap at a time."""
    word = list(perm)
    s = 1
    changed = True
    while changed:
        changed = False
        for i in range(len(word) - 1):
            if word[i] > word[i + 1]:
                if degs[word[i]] % 2 and degs[word[i + 1]] % 2:
                    s = -s
                word[i], word[i + 1] = word[i + 1], word[i]
                changed = True
    return s


def test_koszul_sign_examples():
    assert koszul_sign((0, 1, 2), [1, 1, 1]) == 1
    assert koszul_sign((1, 0), [1, 1]) == -1
    assert koszul_sign((1, 0), [1, 2]) == 1
    assert koszul_sign((1, 2, 0), [1, 2, 1]) == _transposition_oracle((1, 2, 0), [1, 2, 1]) == -1
    assert KoszulContext([1, 1]).sign((1, 0)) == -1


@given(st.lists(st.integers(-1, 3), min_size=1, max_size=5).flatmap(
    lambda degs: st.tuples(st.just(degs), st.permutations(range(len(degs))))))
def test_koszul_sign_matches_transpositions(case):
    degs, perm = case
    assert koszul_sign(perm, degs) == _transposition_oracle(perm, degs)


def test_koszul_sign_rejects_bad_permutation():
    with pytest.raises(ValueError):
        koszul_sign((0, 0), [1, 1])


@given(st.permutations(range(4)))
def test_perm_sign_is_koszul_sign_for_odd_letters(perm):
    assert perm_sign(perm) == koszul_sign(perm, [1] * 4)


def test_homogeneous_split():
    g = theta(D, 0) + theta(D, 0, 1, ell=1)
    assert g.bidegrees() == {(1, 0), (2, 1)}
    assert not g.is_homogeneous()
    assert g.homogeneous(k=2) == theta(D, 0, 1, ell=1)
    assert sorted(g.components()) == [(1, 0), (2, 1)]
    assert g.homogeneous(k=2).g_degree() == 3
