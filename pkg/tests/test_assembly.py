from fractions import Fraction

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from cyclic_formality import assembly as asm
from cyclic_formality.gradedcore import (
    MultiVector,
    PolyFunction,
    hkr_cochain,
    koszul_sign,
    theta,
    wedge,
    x,
)
from cyclic_formality.graphs import enumerate_graphs
from cyclic_formality.hochschild import HochschildChain, NegCyclicChain
from cyclic_formality.weights import graph_top, structurally_zero

from strategies import chains, multivectors, polys

D = 2
X1, X2 = x(D, 0), x(D, 1)
ONE = PolyFunction.const(D, 1)


def ch(*entries):
    return HochschildChain.from_tuple(list(entries))


def fn(f, ell=0):
    return MultiVector.from_function(f, ell)


def only_u0(res: asm.TaylorResult, expected: MultiVector):
    want = asm.TaylorResult.from_multivectors(expected.d, {0: expected})
    assert (res - want).is_zero()


bivector_slots = st.tuples(st.integers(0, 2), st.integers(0, 1))


# -- F_0 and F_1 --------------------------------------------------------------------

def test_F0_is_the_projection_to_functions():
    f = X1 * X2 + 3
    only_u0(asm.F_n([], ch(f)), fn(f))
    assert asm.F_n([], ch(X1, X2)).is_zero()
    lifted = NegCyclicChain(D, {0: ch(X1, X2), 2: ch(X2)})
    res = asm.F_n([], lifted)
    assert (res - asm.TaylorResult.from_multivectors(D, {2: fn(X2)})).is_zero()


def test_F1_vector_field_times_v():
    f = X1 * X1 + X2
    # H(f, x1) = f dx1 and d1 contracted with dx1 is 1; p = 1 gives the sign
    res = asm.F_n([theta(D, 0, ell=1)], ch(f, X1), "exact")
    only_u0(res, fn(-f))


def test_F1_closed_form_examples():
    pi = theta(D, 0, 1)
    closed = asm.F1_closed(pi, ch(ONE, X1, X2))
    # k = p = 2: s = -1, nothing survives
    assert closed == {}
    # H(1, x1, x2) = dx1 dx2 / 2; d2 pairs with dx2 first, leaving d1 on dx1
    closed = asm.F1_closed(theta(D, 0, 1, ell=1), ch(ONE, X1, X2))
    assert closed == {0: fn(PolyFunction.const(D, Fraction(1, 2)))}


@given(st.integers(0, 2), st.integers(0, 2), st.integers(0, 2), st.data())
def test_F1_graph_sum_matches_closed_form(k, ell, p, data):
    gamma = data.draw(multivectors(k=k, ell=ell, maxdeg=1))
    a = data.draw(chains(p=p, maxdeg=2))
    try:
        graph = asm.F_n([gamma], a, "exact")
    except ValueError:
        assume(False)
    closed = asm.TaylorResult.from_multivectors(D, asm.F1_closed(gamma, a))
    assert (graph - closed).is_zero()


# -- two routes to the graph expansion -------------------------------------------------

@given(st.lists(bivector_slots, min_size=1, max_size=2), st.integers(0, 2), st.data())
def test_graph_bookkeeping_matches_superoperator(shapes, p, data):
    slots = []
    for k, ell in shapes:
        g = data.draw(multivectors(k=k, ell=ell, maxdeg=1))
        slots.append((k, ell, g))
    a = data.draw(chains(p=p, maxdeg=1))
    assert asm.formal_graph_expansion(slots, a) == asm.superoperator_expansion(slots, a)


@given(bivector_slots, bivector_slots, st.integers(0, 2), st.data())
def test_F2_koszul_symmetry(s1, s2, p, data):
    g1 = data.draw(multivectors(k=s1[0], ell=s1[1], maxdeg=1))
    g2 = data.draw(multivectors(k=s2[0], ell=s2[1], maxdeg=1))
    a = data.draw(chains(p=p, maxdeg=1))
    eps = koszul_sign((1, 0), [asm.shifted_degree(*s1), asm.shifted_degree(*s2)])
    ab = asm.F_graphsum([g1, g2], a).evaluate("mc", 2000, 1)
    ba = asm.F_graphsum([g2, g1], a).evaluate("mc", 2000, 1, interior_perm=(1, 0))
    diff = ba - ab.scale(eps)
    assert diff.max_abs() <= 1e-9 * max(1.0, ab.max_abs())


@pytest.mark.parametrize("k,m", [((1, 1), 2), ((2, 1), 2), ((2, 2), 3), ((1, 2), 2)])
def test_pruned_graphs_have_no_top_form(k, m):
    rng = np.random.default_rng(5)
    n = len(k)
    z = 0.9 * np.sqrt(rng.random((64, n))) * np.exp(2j * np.pi * rng.random((64, n)))
    ang = np.sort(2 * np.pi * rng.random((64, m - 1)), axis=1)
    for g in enumerate_graphs(k, m, 1):
        if structurally_zero(g):
            for vals in graph_top(g, z, ang).values():
                assert np.max(np.abs(vals)) == 0.0


def test_pruning_does_not_change_the_sum():
    g1, g2 = theta(D, 0, coeff=X2), theta(D, 0, 1, ell=1)
    a = ch(X1 * X2, X1)
    pruned = asm.F_graphsum([g1, g2], a).evaluate("mc", 4000, 2)
    full = asm.F_graphsum([g1, g2], a, prune=False).evaluate("mc", 4000, 2)
    assert (pruned - full).max_abs() < 1e-12


# -- Kontsevich components ---------------------------------------------------------------

def test_U1_of_constant_bivector():
    assert asm.U1(theta(D, 0, 1))(X1, X2) == PolyFunction.const(D, Fraction(1, 2))


@given(st.integers(0, 3).flatmap(lambda k: multivectors(d=3, k=k)))
def test_U1_graph_sum_is_hkr(g):
    assert asm.U1_graph(g) == asm.U1(g) == hkr_cochain(g)


def test_U2_with_a_function_argument_vanishes():
    assert asm.U2_terms(fn(X1), theta(D, 0, 1)) == []
    assert asm.U2_terms(theta(D, 0), fn(X1 * X2)) == []


# -- module relation ------------------------------------------------------------------------

def test_module_relation_without_multivectors():
    assert asm.miranda_residual([], ch(X1, X2), "exact").is_zero()
    assert asm.miranda_residual([], ch(X1 * X2), "exact").is_zero()


@given(chains(maxdeg=2).filter(lambda a: max(a.lengths(), default=0) <= 2))
def test_module_relation_bivector_times_v(a):
    gamma = theta(D, 0, 1, coeff=X1 + 1, ell=1)
    assert asm.miranda_residual([gamma], a, "exact").is_zero()


@given(bivector_slots, st.integers(0, 2), st.data())
def test_module_relation_one_multivector(shape, p, data):
    gamma = data.draw(multivectors(k=shape[0], ell=shape[1]))
    a = data.draw(chains(p=p))
    assert asm.miranda_residual([gamma], a, "exact").is_zero()


@given(polys(nonzero=True, maxdeg=1), polys(nonzero=True, maxdeg=1), st.integers(0, 1), st.data())
def test_module_relation_two_function_multiples_of_v(f, g, p, data):
    a = data.draw(chains(p=p, maxdeg=1))
    res = asm.miranda_residual([fn(f, 1), fn(g, 1)], a, "auto", 2000, 0)
    assert res.is_exact and res.is_zero()


def test_miranda_rejects_three_slots():
    with pytest.raises(ValueError):
        asm.miranda_terms([theta(D, 0)] * 3, ch(X1))


# -- star products ------------------------------------------------------------------------

@pytest.fixture(scope="module")
def star():
    return asm.star_product(theta(D, 0, 1), 2, 20_000, 0)


def test_star_commutator(star):
    comm = star.exact_apply(X1, X2, 1) - star.exact_apply(X2, X1, 1)
    assert comm == ONE


def test_star_leading_term_is_the_product(star):
    f, g = X1 * X2 + 1, X2 * X2
    assert star.exact_apply(f, g, 0) == f * g


@pytest.mark.parametrize("f", [X1, X1 * X2, X2 * X2 + X1])
def test_star_unit(star, f):
    series = star.apply(f, ONE)
    assert series[0] == {e: (float(c), 0.0) for e, c in f.items()}
    assert series[1] == {} and series[2] == {}
    series = star.apply(ONE, f)
    assert series[1] == {} and series[2] == {}


def test_star_order_one_associativity_is_exact(star):
    res = star.associativity_residual(X1 * X1, X2, X1 * X2, 1)
    assert all(v == 0 for v, _e in res.values())


def test_star_rejects_bad_input():
    with pytest.raises(ValueError):
        asm.star_product(theta(D, 0))
    with pytest.raises(ValueError):
        # [pi, pi] = 2 x3 d1 d2 d3
        asm.star_product(theta(3, 0, 1, coeff=x(3, 2)) + theta(3, 1, 2, coeff=x(3, 1)))


# -- unimodular pairs and the trace -----------------------------------------------------------

def test_unimodular_examples():
    assert asm.check_unimodular(asm.PoissonData(theta(D, 0, 1), fn(PolyFunction(D))))["ok"]
    d3 = asm.PoissonData(theta(3, 0, 1, coeff=x(3, 2)), MultiVector(3))
    assert asm.check_unimodular(d3)["ok"]
    rep = asm.check_unimodular(asm.PoissonData(theta(D, 0, 1, coeff=X1), MultiVector(D)))
    assert rep["poisson"] and not rep["unimodular"] and not rep["ok"]


def test_trace_with_zero_hamiltonian():
    pd = asm.PoissonData(theta(3, 0, 1, coeff=x(3, 2) + 2), MultiVector(3))
    f = x(3, 0) * x(3, 1) + x(3, 2)
    tr = asm.trace_integrand(pd, f, 1, 4000, 0)
    only_u0(tr.H[0], MultiVector.from_function(f))
    direct = asm.F_graphsum([pd.pi], HochschildChain.from_tuple([f]), connected_only=True)
    assert (tr.H[1] - direct.evaluate("auto", 4000, 0)).max_abs() < 1e-12


def test_trace_rejects_non_unimodular():
    with pytest.raises(ValueError):
        asm.trace_integrand(asm.PoissonData(theta(D, 0, 1, coeff=X1), MultiVector(D)), X1)


def test_resummation_sides_agree_with_closed_weights():
    d = 3
    pd = asm.PoissonData(theta(d, 0, 1, coeff=x(d, 2) + 2), fn(x(d, 0) * x(d, 0) + x(d, 1) * x(d, 2)))
    f = x(d, 0) * x(d, 1) + x(d, 2)
    res = asm.resummation_sides(pd, f, 1, 0).evaluate("exact")
    assert res.is_zero()


# -- affine vector fields ----------------------------------------------------------------------

def test_affine_n1_example():
    f = X1 * X2 + X2
    assert asm.affine_property_check(theta(D, 0), [], ch(f), "exact").is_zero()
    only_u0(asm.F_n([theta(D, 0)], ch(f), "exact"), wedge(theta(D, 0), fn(f)))


def test_affine_detection():
    assert asm.is_affine_vector_field(theta(D, 0, coeff=X2 + 1) + theta(D, 1, coeff=X1))
    assert not asm.is_affine_vector_field(theta(D, 0, coeff=X1 * X1))
    assert not asm.is_affine_vector_field(theta(D, 0, 1))
    with pytest.raises(ValueError):
        asm.affine_residual_sum(theta(D, 0, coeff=X1 * X1), [], ch(X1))


affine_coeff = st.integers(-2, 2)


@given(st.lists(affine_coeff, min_size=6, max_size=6), st.integers(0, 2), st.data())
def test_affine_vector_fields_factor_out(cs, p, data):
    g1 = (theta(D, 0, coeff=X1 * cs[0] + X2 * cs[1] + cs[2])
          + theta(D, 1, coeff=X1 * cs[3] + X2 * cs[4] + cs[5]))
    assume(g1)
    a = data.draw(chains(p=p))
    assert asm.affine_property_check(g1, [], a, "exact").is_zero()


# -- Taylor results ------------------------------------------------------------------------

def test_taylor_result_arithmetic_and_json():
    a = asm.TaylorResult.from_multivectors(D, {0: fn(X1), 1: theta(D, 0)})
    b = a.scale(2) - a - a
    assert b.is_zero() and b.is_exact
    d = a.to_dict()
    assert d == asm.TaylorResult.from_multivectors(D, {0: fn(X1), 1: theta(D, 0)}).to_dict()
    assert a.within(3.0) is False or a.is_exact
