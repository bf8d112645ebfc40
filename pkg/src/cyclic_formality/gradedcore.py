"""Exact polynomial/Grassmann algebra on R^d and the multivector calculus.

Multivector fields are polynomials in commuting coordinates ``x_1..x_d``,
anticommuting ``theta_1..theta_d`` (``theta_nu`` stands for ``d/dx_nu``) and a
formal even variable ``v``.  Differential forms use ``dx_1..dx_d`` in place of
the thetas.  Indices are 0-based throughout the code; odd monomials are stored
as strictly increasing index tuples and all Grassmann derivatives are left
derivatives.
"""

from __future__ import annotations

import itertools
from fractions import Fraction
from math import factorial
from typing import Iterable, Mapping, Sequence

Exps = tuple[int, ...]
Odd = tuple[int, ...]


def _frac(c) -> Fraction:
    if isinstance(c, Fraction):
        return c
    if isinstance(c, float):
        raise TypeError("exact coefficients only; got float")
    return Fraction(c)


def _check_dim(a, b):
    if a.d != b.d:
        raise ValueError(f"dimension mismatch: {a.d} != {b.d}")


def merge_sign(left: Odd, right: Odd) -> int:
    """Sign of sorting the concatenation ``left + right`` (both sorted)."""
    inv = 0
    for a in left:
        for b in right:
            if a > b:
                inv += 1
    return -1 if inv & 1 else 1


def _add_exps(e1: Exps, e2: Exps) -> Exps:
    return tuple(a + b for a, b in zip(e1, e2))


def _grlex(exps: Exps):
    return (sum(exps), exps)


def rational_str(c: Fraction) -> str:
    """Canonical "num/den" text of a rational (den 1 included)."""
    c = Fraction(c)
    return f"{c.numerator}/{c.denominator}"


def parse_rational(text) -> Fraction:
    return Fraction(str(text))


class PolyFunction:
    """Polynomial function on R^d with rational coefficients."""

    __slots__ = ("d", "_terms")

    def __init__(self, d: int, terms: Mapping[Exps, object] | None = None):
        self.d = d
        clean = {}
        for e, c in (terms or {}).items():
            e = tuple(e)
            if len(e) != d or any(k < 0 for k in e):
                raise ValueError(f"bad exponent vector {e} for d={d}")
            c = _frac(c)
            if c:
                clean[e] = clean.get(e, Fraction(0)) + c
        self._terms = {e: c for e, c in sorted(clean.items(), key=lambda t: _grlex(t[0])) if c}

    @classmethod
    def const(cls, d: int, c=1) -> "PolyFunction":
        return cls(d, {(0,) * d: c})

    @classmethod
    def var(cls, d: int, i: int) -> "PolyFunction":
        e = [0] * d
        e[i] = 1
        return cls(d, {tuple(e): 1})

    @property
    def terms(self) -> dict[Exps, Fraction]:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def to_dict(self) -> dict:
        return {"d": self.d, "terms": [{"x": list(e), "c": rational_str(c)} for e, c in self._terms.items()]}

    @classmethod
    def from_dict(cls, data: Mapping) -> "PolyFunction":
        return cls(int(data["d"]), {tuple(t["x"]): parse_rational(t["c"]) for t in data["terms"]})

    def __bool__(self):
        return bool(self._terms)

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = PolyFunction.const(self.d, other)
        if not isinstance(other, PolyFunction):
            return NotImplemented
        return self.d == other.d and self._terms == other._terms

    def __hash__(self):
        return hash((self.d, tuple(self._terms.items())))

    def __repr__(self):
        if not self._terms:
            return "0"
        parts = []
        for e, c in self._terms.items():
            mono = "*".join(f"x{i + 1}" + (f"^{k}" if k > 1 else "") for i, k in enumerate(e) if k)
            parts.append(f"{c}" + (f"*{mono}" if mono else ""))
        return " + ".join(parts)

    def _coerce(self, other) -> "PolyFunction":
        if isinstance(other, PolyFunction):
            _check_dim(self, other)
            return other
        return PolyFunction.const(self.d, other)

    def __add__(self, other):
        other = self._coerce(other)
        t = dict(self._terms)
        for e, c in other._terms.items():
            t[e] = t.get(e, Fraction(0)) + c
        return PolyFunction(self.d, t)

    __radd__ = __add__

    def __neg__(self):
        return PolyFunction(self.d, {e: -c for e, c in self._terms.items()})

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if isinstance(other, (MultiVector, DiffForm)):
            return NotImplemented
        other = self._coerce(other)
        t: dict[Exps, Fraction] = {}
        for e1, c1 in self._terms.items():
            for e2, c2 in other._terms.items():
                e = _add_exps(e1, e2)
                t[e] = t.get(e, Fraction(0)) + c1 * c2
        return PolyFunction(self.d, t)

    __rmul__ = __mul__

    def partial(self, nu: int, order: int = 1) -> "PolyFunction":
        t = {}
        for e, c in self._terms.items():
            if e[nu] < order:
                continue
            k = e[nu]
            f = Fraction(factorial(k), factorial(k - order))
            e2 = list(e)
            e2[nu] -= order
            t[tuple(e2)] = c * f
        return PolyFunction(self.d, t)

    def diff(self, alpha: Sequence[int]) -> "PolyFunction":
        """Apply the multi-index derivative d^alpha."""
        p = self
        for nu, k in enumerate(alpha):
            if k:
                p = p.partial(nu, k)
        return p

    def degree(self) -> int:
        return max((sum(e) for e in self._terms), default=-1)

    def is_constant(self) -> bool:
        return all(sum(e) == 0 for e in self._terms)

    def constant_term(self) -> Fraction:
        return self._terms.get((0,) * self.d, Fraction(0))

    def __call__(self, *xs):
        total = Fraction(0)
        for e, c in self._terms.items():
            m = c
            for x, k in zip(xs, e):
                m *= Fraction(x) ** k
            total += m
        return total


def poly_arith(p: PolyFunction, q: PolyFunction | None, op: str, nu: int | None = None) -> PolyFunction:
    """Dispatch ``add``/``mul``/``partial`` (the latter ignores ``q``)."""
    if op == "add":
        return p + q
    if op == "mul":
        return p * q
    if op == "partial":
        return p.partial(nu)
    raise ValueError(f"unknown op {op!r}")


class _SuperPoly:
    """Shared machinery: terms keyed by (ell, odd tuple, exps)."""

    __slots__ = ("d", "_terms")
    _odd_name = "theta"

    def __init__(self, d: int, terms: Mapping[tuple, object] | None = None):
        self.d = d
        clean: dict[tuple, Fraction] = {}
        for key, c in (terms or {}).items():
            key = self._normalize_key(key)
            if key is None:
                continue
            sign, key = key
            c = _frac(c) * sign
            if c:
                clean[key] = clean.get(key, Fraction(0)) + c
        self._terms = {k: c for k, c in sorted(clean.items(), key=_key_order) if c}

    def _normalize_key(self, key):
        ell, odd, exps = key
        odd = tuple(odd)
        exps = tuple(exps)
        if len(exps) != self.d:
            raise ValueError(f"exponent vector {exps} does not match d={self.d}")
        if any(i < 0 or i >= self.d for i in odd):
            raise ValueError(f"odd index out of range in {odd}")
        if len(set(odd)) != len(odd):
            return None
        # sort with sign
        perm_sign = 1
        lst = list(odd)
        for i in range(len(lst)):
            for j in range(len(lst) - 1 - i):
                if lst[j] > lst[j + 1]:
                    lst[j], lst[j + 1] = lst[j + 1], lst[j]
                    perm_sign = -perm_sign
        if ell < 0:
            raise ValueError("negative v-power")
        return perm_sign, (ell, tuple(lst), exps)

    def _new(self, terms):
        return type(self)(self.d, terms)

    def to_dict(self) -> dict:
        """Canonical JSON-ready form; odd index sets ascending, rationals as "n/d"."""
        return {
            "kind": type(self).__name__,
            "d": self.d,
            "terms": [
                {"v": ell, "odd": list(odd), "x": list(e), "c": rational_str(c)}
                for (ell, odd, e), c in self._terms.items()
            ],
        }

    @classmethod
    def from_dict(cls, data: Mapping):
        if data.get("kind", cls.__name__) != cls.__name__:
            raise ValueError(f"expected {cls.__name__}, got {data['kind']}")
        terms = {}
        for t in data["terms"]:
            key = (int(t.get("v", 0)), tuple(t["odd"]), tuple(t["x"]))
            terms[key] = terms.get(key, Fraction(0)) + parse_rational(t["c"])
        return cls(int(data["d"]), terms)

    @property
    def terms(self) -> dict[tuple, Fraction]:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def __bool__(self):
        return bool(self._terms)

    def __eq__(self, other):
        if isinstance(other, int) and other == 0:
            return not self._terms
        if type(other) is not type(self):
            return NotImplemented
        return self.d == other.d and self._terms == other._terms

    def __hash__(self):
        return hash((type(self).__name__, self.d, tuple(self._terms.items())))

    def __repr__(self):
        if not self._terms:
            return "0"
        parts = []
        for (ell, odd, e), c in self._terms.items():
            bits = [str(c)]
            if ell:
                bits.append(f"v^{ell}")
            bits += [f"x{i + 1}^{k}" if k > 1 else f"x{i + 1}" for i, k in enumerate(e) if k]
            bits += [f"{self._odd_name}{i + 1}" for i in odd]
            parts.append("*".join(bits))
        return " + ".join(parts)

    def _coerce(self, other):
        if type(other) is type(self):
            _check_dim(self, other)
            return other
        if isinstance(other, PolyFunction):
            _check_dim(self, other)
            return self.from_function(other)
        if isinstance(other, (int, Fraction)):
            return self.from_function(PolyFunction.const(self.d, other))
        raise TypeError(f"cannot combine {type(self).__name__} with {type(other).__name__}")

    @classmethod
    def from_function(cls, f: PolyFunction, ell: int = 0):
        return cls(f.d, {(ell, (), e): c for e, c in f.items()})

    @classmethod
    def generator(cls, d: int, i: int, coeff: PolyFunction | int = 1):
        if not isinstance(coeff, PolyFunction):
            coeff = PolyFunction.const(d, coeff)
        return cls(d, {(0, (i,), e): c for e, c in coeff.items()})

    def __add__(self, other):
        other = self._coerce(other)
        t = dict(self._terms)
        for k, c in other._terms.items():
            t[k] = t.get(k, Fraction(0)) + c
        return self._new(t)

    __radd__ = __add__

    def __neg__(self):
        return self._new({k: -c for k, c in self._terms.items()})

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def scale(self, c) -> "_SuperPoly":
        c = _frac(c)
        return self._new({k: v * c for k, v in self._terms.items()})

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            return self.scale(other)
        other = self._coerce(other)
        t: dict[tuple, Fraction] = {}
        for (l1, o1, e1), c1 in self._terms.items():
            for (l2, o2, e2), c2 in other._terms.items():
                if set(o1) & set(o2):
                    continue
                s = merge_sign(o1, o2)
                key = (l1 + l2, tuple(sorted(o1 + o2)), _add_exps(e1, e2))
                t[key] = t.get(key, Fraction(0)) + s * c1 * c2
        return self._new(t)

    def __rmul__(self, other):
        if isinstance(other, (int, Fraction)):
            return self.scale(other)
        return self._coerce(other) * self

    # -- structure ------------------------------------------------------
    def homogeneous(self, k: int | None = None, ell: int | None = None):
        """Part with odd degree ``k`` and v-power ``ell`` (None = any)."""
        return self._new({
            key: c for key, c in self._terms.items()
            if (k is None or len(key[1]) == k) and (ell is None or key[0] == ell)
        })

    def bidegrees(self) -> set[tuple[int, int]]:
        return {(len(o), ell) for (ell, o, _e) in self._terms}

    def components(self):
        """Split into homogeneous (k, ell) pieces."""
        return {kl: self.homogeneous(*kl) for kl in sorted(self.bidegrees())}

    def is_homogeneous(self) -> bool:
        return len(self.bidegrees()) <= 1

    def odd_degree(self) -> int:
        degs = {len(o) for (_l, o, _e) in self._terms}
        if len(degs) > 1:
            raise ValueError("not homogeneous in odd degree")
        return degs.pop() if degs else 0

    def coefficient(self, odd: Odd, ell: int = 0) -> PolyFunction:
        return PolyFunction(self.d, {e: c for (l, o, e), c in self._terms.items() if o == tuple(odd) and l == ell})

    # -- calculus -------------------------------------------------------
    def partial_x(self, nu: int) -> "_SuperPoly":
        t = {}
        for (ell, o, e), c in self._terms.items():
            if e[nu]:
                e2 = list(e)
                e2[nu] -= 1
                t[(ell, o, tuple(e2))] = c * e[nu]
        return self._new(t)

    def diff_x(self, alpha: Sequence[int]):
        out = self
        for nu, k in enumerate(alpha):
            for _ in range(k):
                out = out.partial_x(nu)
        return out

    def left_odd_derivative(self, nu: int) -> "_SuperPoly":
        t = {}
        for (ell, o, e), c in self._terms.items():
            if nu in o:
                pos = o.index(nu)
                t[(ell, o[:pos] + o[pos + 1:], e)] = -c if pos & 1 else c
        return self._new(t)

    def right_odd_derivative(self, nu: int) -> "_SuperPoly":
        t = {}
        for (ell, o, e), c in self._terms.items():
            if nu in o:
                pos = o.index(nu)
                after = len(o) - 1 - pos
                t[(ell, o[:pos] + o[pos + 1:], e)] = -c if after & 1 else c
        return self._new(t)

    def times_v(self, power: int = 1):
        return self._new({(ell + power, o, e): c for (ell, o, e), c in self._terms.items()})

    def v_truncate(self):
        """Projection killing every positive v-power."""
        return self.homogeneous(ell=0)

    def max_x_degree(self) -> int:
        return max((sum(e) for (_l, _o, e) in self._terms), default=-1)


def _key_order(item):
    (ell, odd, exps), _c = item
    return (ell, len(odd), odd, sum(exps), exps)


class MultiVector(_SuperPoly):
    """Multivector field on R^d with polynomial coefficients and v-powers.

    The key ``(ell, (i1 < ... < ik), alpha)`` stands for
    ``v^ell x^alpha theta_{i1} ... theta_{ik}``.
    """

    __slots__ = ()

    def g_degree(self) -> int:
        """Degree k - 1 + 2*ell in the dg Lie algebra (homogeneous only)."""
        bd = self.bidegrees()
        if len(bd) > 1:
            raise ValueError("inhomogeneous multivector has no single degree")
        if not bd:
            return 0
        k, ell = bd.pop()
        return k - 1 + 2 * ell

    def shifted_degree(self) -> int:
        """Degree in the shifted algebra g[1]: k - 2 + 2*ell."""
        return self.g_degree() - 1


class DiffForm(_SuperPoly):
    """Differential form with polynomial coefficients (v-power always 0)."""

    __slots__ = ()
    _odd_name = "dx"

    def _normalize_key(self, key):
        if len(key) == 2:
            key = (0, key[0], key[1])
        if key[0] != 0:
            raise ValueError("differential forms carry no v-power")
        return super()._normalize_key(key)

    def form_degree(self) -> int:
        return self.odd_degree()

    def exterior_derivative(self) -> "DiffForm":
        out = DiffForm(self.d)
        for nu in range(self.d):
            out = out + DiffForm.generator(self.d, nu) * self.partial_x(nu)
        return out

    def interior(self, nu: int) -> "DiffForm":
        """Interior product with the coordinate vector field d/dx_nu."""
        return self.left_odd_derivative(nu)


def wedge(alpha: MultiVector, beta: MultiVector) -> MultiVector:
    _check_dim(alpha, beta)
    return alpha * beta


def _bracket_homogeneous(a: MultiVector, b: MultiVector) -> MultiVector:
    ka, kb = a.odd_degree(), b.odd_degree()
    out = MultiVector(a.d)
    sign = -1 if ((ka - 1) * (kb - 1)) & 1 else 1
    for nu in range(a.d):
        out = out + a.right_odd_derivative(nu) * b.partial_x(nu)
        out = out - (b.right_odd_derivative(nu) * a.partial_x(nu)).scale(sign)
    return out


def schouten(alpha: MultiVector, beta: MultiVector) -> MultiVector:
    """Schouten-Nijenhuis bracket, extended v-bilinearly.

    On homogeneous pieces of theta-degrees a, b:
    ``[A, B] = sum_nu (A d<theta_nu)(d_x_nu B) - (-1)^{(a-1)(b-1)} (B d<theta_nu)(d_x_nu A)``
    with right Grassmann derivatives ``d<``.  This is the Lie bracket on
    vector fields and gives ``[xi, f] = xi(f)``, ``[f, xi] = -xi(f)``.
    """
    _check_dim(alpha, beta)
    out = MultiVector(alpha.d)
    for ka in {len(o) for (_l, o, _e) in alpha.terms}:
        pa = alpha.homogeneous(k=ka)
        for kb in {len(o) for (_l, o, _e) in beta.terms}:
            out = out + _bracket_homogeneous(pa, beta.homogeneous(k=kb))
    return out


def divergence(gamma: MultiVector) -> MultiVector:
    """div = sum_nu d^2/(dx_nu dtheta_nu) with left theta-derivative."""
    out = MultiVector(gamma.d)
    for nu in range(gamma.d):
        out = out + gamma.left_odd_derivative(nu).partial_x(nu)
    return out


def delta_omega(gamma: MultiVector) -> MultiVector:
    return divergence(gamma).times_v()


def contraction(gamma: MultiVector, omega: DiffForm) -> MultiVector:
    """Contraction of a multivector with a form, landing in multivectors.

    ``theta_I ⌞ (dx_{j1}...dx_{jp}) = d>/dtheta_{j1} ... d>/dtheta_{jp} theta_I``
    with right Grassmann derivatives: the rightmost form factor pairs first,
    against the rightmost theta.  For k = p this is (-1)^{p(p-1)/2} times
    the interior product.  Coefficients multiply.
    """
    _check_dim(gamma, omega)
    out = MultiVector(gamma.d)
    for (_ell, odd, e), c in omega.items():
        piece = gamma
        for j in reversed(odd):
            piece = piece.right_odd_derivative(j)
        coeff = PolyFunction(gamma.d, {e: c})
        out = out + piece * coeff
    return out


def interior_product(gamma: MultiVector, omega: DiffForm) -> DiffForm:
    """Form-valued interior multiplication iota_gamma omega.

    ``iota_{theta_{i1}...theta_{ik}} = iota_{i1} o ... o iota_{ik}`` (the last
    vector field acts first); a function acts by multiplication.
    """
    _check_dim(gamma, omega)
    out = DiffForm(gamma.d)
    for (ell, odd, e), c in gamma.items():
        if ell:
            raise ValueError("interior product needs a v-free multivector")
        piece = omega
        for i in reversed(odd):
            piece = piece.interior(i)
        out = out + piece * PolyFunction(gamma.d, {e: c})
    return out


def lie_action(gamma: MultiVector, omega: DiffForm) -> DiffForm:
    """Cartan-type action L_gamma = d iota_gamma + (-1)^p iota_gamma d for
    gamma of theta-degree p+1; inhomogeneous gamma acts degreewise."""
    _check_dim(gamma, omega)
    if any(ell for (ell, _o, _e) in gamma.terms):
        raise ValueError("lie_action requires a v-free multivector")
    out = DiffForm(gamma.d)
    for k in {len(o) for (_l, o, _e) in gamma.terms}:
        g = gamma.homogeneous(k=k)
        p = k - 1
        first = interior_product(g, omega).exterior_derivative()
        second = interior_product(g, omega.exterior_derivative())
        out = out + first + (second if p % 2 == 0 else -second)
    return out


def hkr_chain(chain) -> DiffForm:
    """(a0, ..., ap) -> (1/p!) a0 da1 ... dap, extended linearly."""
    d = chain.d
    out = DiffForm(d)
    for tup, c in chain.items():
        form = DiffForm.from_function(tup[0])
        for a in tup[1:]:
            form = form * DiffForm.from_function(a).exterior_derivative()
        out = out + form.scale(c / factorial(len(tup) - 1))
    return out


def hkr_cochain(gamma: MultiVector):
    """Antisymmetrized multiderivation of a v-free multivector field."""
    from .diffop import MultiDiffOp

    if any(ell for (ell, _o, _e) in gamma.terms):
        raise ValueError("hkr_cochain requires a v-free multivector")
    d = gamma.d
    ops = []
    for k in sorted({len(o) for (_l, o, _e) in gamma.terms}):
        terms: dict[tuple, PolyFunction] = {}
        for (_ell, odd, e), c in gamma.homogeneous(k=k).items():
            coeff = PolyFunction(d, {e: c / factorial(k)})
            for perm in itertools.permutations(range(k)):
                sgn = perm_sign(perm)
                slots = tuple(_unit(d, odd[perm[j]]) for j in range(k))
                terms[slots] = terms.get(slots, PolyFunction(d)) + (coeff if sgn > 0 else -coeff)
        ops.append(MultiDiffOp(d, k, terms))
    if not ops:
        return MultiDiffOp(d, 0, {})
    if len(ops) > 1:
        raise ValueError("hkr_cochain of an inhomogeneous multivector; split by degree first")
    return ops[0]


def _unit(d: int, i: int) -> Exps:
    e = [0] * d
    e[i] = 1
    return tuple(e)


def perm_sign(perm: Sequence[int]) -> int:
    inv = sum(1 for i in range(len(perm)) for j in range(i + 1, len(perm)) if perm[i] > perm[j])
    return -1 if inv & 1 else 1


class KoszulContext:
    """Ordered list of (shifted) degrees of factors in a graded-symmetric word."""

    def __init__(self, degrees: Iterable[int]):
        self.degrees = tuple(int(x) for x in degrees)

    def __len__(self):
        return len(self.degrees)

    def sign(self, perm: Sequence[int]) -> int:
        return koszul_sign(perm, self)


def koszul_sign(perm: Sequence[int], ctx: KoszulContext | Sequence[int]) -> int:
    """Koszul sign eps with a_{perm[0]} ... a_{perm[n-1]} = eps a_0 ... a_{n-1}.

    Every inverted pair of odd factors contributes a factor -1.
    """
    degs = ctx.degrees if isinstance(ctx, KoszulContext) else tuple(ctx)
    perm = tuple(perm)
    if sorted(perm) != list(range(len(degs))):
        raise ValueError(f"permutation {perm} does not act on {len(degs)} letters")
    s = 0
    for i in range(len(perm)):
        for j in range(i + 1, len(perm)):
            if perm[i] > perm[j] and (degs[perm[i]] & 1) and (degs[perm[j]] & 1):
                s += 1
    return -1 if s & 1 else 1


# -- convenience constructors -----------------------------------------------

def theta(d: int, *idx: int, coeff: PolyFunction | int = 1, ell: int = 0) -> MultiVector:
    """Multivector coeff * v^ell * theta_{idx[0]} ... theta_{idx[-1]} (in given order)."""
    if not isinstance(coeff, PolyFunction):
        coeff = PolyFunction.const(d, coeff)
    return MultiVector(d, {(ell, tuple(idx), e): c for e, c in coeff.items()})


def dx(d: int, *idx: int, coeff: PolyFunction | int = 1) -> DiffForm:
    if not isinstance(coeff, PolyFunction):
        coeff = PolyFunction.const(d, coeff)
    return DiffForm(d, {(0, tuple(idx), e): c for e, c in coeff.items()})


def x(d: int, i: int) -> PolyFunction:
    return PolyFunction.var(d, i)
