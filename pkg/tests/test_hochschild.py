from hypothesis import given
from hypothesis import strategies as st

from cyclic_formality.diffop import MultiDiffOp
from cyclic_formality.gradedcore import MultiVector, PolyFunction, hkr_chain, hkr_cochain, x
from cyclic_formality.hochschild import (
    HochschildChain,
    NegCyclicChain,
    b_plus_uB,
    cochain_action,
    connes_B,
    gerstenhaber_bracket,
    gerstenhaber_product,
    hoch_b,
    hochschild_cochain_diff,
)

from strategies import chains, multivectors, negcyclic, normalized_ops

D = 2
X1, X2 = x(D, 0), x(D, 1)
ONE = PolyFunction.const(D, 1)
MU = MultiDiffOp.multiplication(D)


def ch(*entries, coeff=1):
    return HochschildChain.from_tuple(list(entries), coeff)


def sign(n):
    return -1 if n % 2 else 1


# -- b and B -----------------------------------------------------------------------

def test_b_examples():
    assert not hoch_b(ch(X1, X2))
    assert not hoch_b(ch(X1 * X2 + 1))
    y = [x(3, i) for i in range(3)]
    expected = (HochschildChain.from_tuple([y[0] * y[1], y[2]])
                - HochschildChain.from_tuple([y[0], y[1] * y[2]])
                + HochschildChain.from_tuple([y[2] * y[0], y[1]]))
    assert hoch_b(HochschildChain.from_tuple(y)) == expected


def test_B_examples():
    assert connes_B(ch(X1)) == ch(ONE, X1)
    assert connes_B(ch(X1, X2)) == ch(ONE, X1, X2) - ch(ONE, X2, X1)
    # every output tuple of B(1, x1) has the constant 1 in a slot >= 1
    assert not connes_B(ch(ONE, X1))


def test_normalization_drops_constants_after_a0():
    assert not ch(X1, ONE)
    assert ch(ONE, X1)
    assert ch(X1, X2 + 3) == ch(X1, X2)


def test_b_plus_uB_examples():
    a = NegCyclicChain.lift(ch(X1))
    assert b_plus_uB(a) == NegCyclicChain.lift(ch(ONE, X1), 1)
    a = NegCyclicChain.lift(ch(X1, X2), 1)
    expected = NegCyclicChain(D, {1: hoch_b(ch(X1, X2)), 2: connes_B(ch(X1, X2))})
    assert b_plus_uB(a) == expected


@given(st.integers(0, 4).flatmap(lambda p: chains(p=p)))
def test_b_squares_to_zero(a):
    assert not hoch_b(hoch_b(a))


@given(chains())
def test_B_squares_to_zero(a):
    assert not connes_B(connes_B(a))


@given(chains())
def test_b_and_B_anticommute(a):
    assert not (hoch_b(connes_B(a)) + connes_B(hoch_b(a)))


@given(negcyclic())
def test_b_plus_uB_squares_to_zero(a):
    assert not b_plus_uB(b_plus_uB(a))


@given(chains())
def test_hkr_is_a_chain_map(a):
    assert not hkr_chain(hoch_b(a))
    assert hkr_chain(connes_B(a)) == hkr_chain(a).exterior_derivative()


# -- cochain action ------------------------------------------------------------------

def test_action_examples():
    assert not cochain_action(MU, ch(X1, X2))
    assert cochain_action(MultiDiffOp.identity(D), ch(X1)) == ch(X1)
    xi = MultiDiffOp.vector_field([X2, PolyFunction(D)])
    assert cochain_action(xi, ch(X1 * X1)) == ch(X1 * X2 * 2)


def test_function_is_inserted_after_a0():
    f = MultiDiffOp.function(X2)
    # shuffle with (1, f): insertion after a0 and after a1, never in front of a0;
    # signs from (-1)^{(k-1)(p+1)} (-1)^{i(k-1)} at k = 0
    assert cochain_action(f, ch(X1)) == ch(X1, X2)
    assert cochain_action(f, ch(X1, X1 * X1)) == ch(X1, X1 * X1, X2) - ch(X1, X2, X1 * X1)


@given(chains())
def test_multiplication_acts_as_signed_b(a):
    for p in a.lengths():
        part = a.part(p)
        assert cochain_action(MU, part) == hoch_b(part).scale(sign(p + 1))


@given(multivectors(), negcyclic())
def test_action_of_hkr_cochains_commutes_with_b_plus_uB(g, a):
    phi = hkr_cochain(g)
    assert b_plus_uB(cochain_action(phi, a)) == cochain_action(phi, b_plus_uB(a))


@given(normalized_ops(), normalized_ops(), chains())
def test_action_is_a_module_structure(f, g, a):
    lhs = cochain_action(f, cochain_action(g, a))
    other = cochain_action(g, cochain_action(f, a))
    lhs = lhs - other.scale(sign(f.degree * g.degree))
    assert lhs == cochain_action(gerstenhaber_bracket(f, g), a)


# -- Gerstenhaber structure ------------------------------------------------------------

def test_product_of_unary_operators_is_composition():
    phi = MultiDiffOp.vector_field([X2, PolyFunction(D)])
    psi = MultiDiffOp.vector_field([PolyFunction(D), X1 * X1])
    comp = gerstenhaber_product(phi, psi)
    for f in (X1 * X2, X2 * X2 * X1, X1 + X2):
        assert comp(f) == phi(psi(f))


def test_product_of_multiplications():
    # mu(mu(f, g), h) - mu(f, mu(g, h)) vanishes by associativity
    prod = gerstenhaber_product(MU, MU)
    assert prod.arity == 3
    assert not prod
    assert not gerstenhaber_bracket(MU, MU)


def test_product_with_a_constant():
    c = MultiDiffOp.function(PolyFunction.const(D, 5))
    # c inserted in slot 1 and slot 2 with opposite signs cancels
    assert not gerstenhaber_product(MU, c)
    xi = MultiDiffOp.vector_field([X2, ONE])
    assert gerstenhaber_product(xi, MultiDiffOp.function(X1 * X2))() == X2 * X2 + X1


def test_bracket_of_vector_field_and_function():
    xi = MultiDiffOp.vector_field([X2, PolyFunction(D)])
    br = gerstenhaber_bracket(xi, MultiDiffOp.function(X1 * X1))
    assert br.arity == 0
    assert br() == X1 * X2 * 2


@given(normalized_ops())
def test_hochschild_differential_squares_to_zero(phi):
    assert not hochschild_cochain_diff(hochschild_cochain_diff(phi))


@given(normalized_ops(), normalized_ops(), normalized_ops())
def test_gerstenhaber_jacobi(f, g, h):
    lhs = gerstenhaber_bracket(f, gerstenhaber_bracket(g, h))
    rhs = gerstenhaber_bracket(gerstenhaber_bracket(f, g), h)
    rhs = rhs + gerstenhaber_bracket(g, gerstenhaber_bracket(f, h)).scale(sign(f.degree * g.degree))
    assert lhs == rhs


@given(normalized_ops(), normalized_ops())
def test_bracket_antisymmetry(f, g):
    assert gerstenhaber_bracket(f, g) == gerstenhaber_bracket(g, f).scale(-sign(f.degree * g.degree))


@given(st.integers(0, D).flatmap(lambda k: multivectors(k=k)))
def test_hkr_cochain_is_hochschild_closed(g):
    assert not hochschild_cochain_diff(hkr_cochain(g))
