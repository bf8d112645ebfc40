"""Normalized Hochschild / negative cyclic chains of the polynomial algebra,
the cochain action on chains and the Gerstenhaber bracket."""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .diffop import MultiDiffOp
from .gradedcore import Exps, PolyFunction

Basis = tuple[Exps, ...]


def _mono(d: int, e: Exps) -> PolyFunction:
    return PolyFunction(d, {e: 1})


class HochschildChain:
    """Rational combination of normalized chains (a0, a1, ..., ap).

    Entries are expanded multilinearly into monomials on construction, so
    equal chains have equal term maps.  A constant in any slot i >= 1 is
    zero in A (x) (A/R1)^p and is dropped.
    """

    __slots__ = ("d", "_terms")

    def __init__(self, d: int, terms: Mapping[Basis, object] | None = None):
        self.d = d
        clean: dict[Basis, Fraction] = {}
        zero = (0,) * d
        for basis, c in (terms or {}).items():
            basis = tuple(tuple(e) for e in basis)
            if not basis or any(len(e) != d for e in basis):
                raise ValueError(f"bad basis tuple {basis}")
            if any(e == zero for e in basis[1:]):
                continue
            c = Fraction(c)
            if c:
                clean[basis] = clean.get(basis, Fraction(0)) + c
        self._terms = {k: v for k, v in sorted(clean.items(), key=lambda t: (len(t[0]), t[0])) if v}

    @classmethod
    def from_tuple(cls, entries: Sequence[PolyFunction], coeff=1) -> "HochschildChain":
        """Multilinear expansion of the single chain (a0, ..., ap)."""
        if not entries:
            raise ValueError("a chain needs at least a0")
        d = entries[0].d
        terms: dict[Basis, Fraction] = {(): Fraction(coeff)}
        for a in entries:
            if a.d != d:
                raise ValueError("dimension mismatch")
            nxt: dict[Basis, Fraction] = {}
            for basis, c in terms.items():
                for e, ca in a.items():
                    key = basis + (e,)
                    nxt[key] = nxt.get(key, Fraction(0)) + c * ca
            terms = nxt
        return cls(d, terms)

    @classmethod
    def sum(cls, d: int, chains: Iterable["HochschildChain"]) -> "HochschildChain":
        out = cls(d)
        for ch in chains:
            out = out + ch
        return out

    def items(self):
        """Yield (tuple of monomial PolyFunctions, coefficient)."""
        for basis, c in self._terms.items():
            yield tuple(_mono(self.d, e) for e in basis), c

    @property
    def terms(self) -> dict[Basis, Fraction]:
        return dict(self._terms)

    def lengths(self) -> set[int]:
        """Set of p values present."""
        return {len(b) - 1 for b in self._terms}

    def part(self, p: int) -> "HochschildChain":
        return HochschildChain(self.d, {b: c for b, c in self._terms.items() if len(b) == p + 1})

    def __bool__(self):
        return bool(self._terms)

    def __eq__(self, other):
        if isinstance(other, int) and other == 0:
            return not self._terms
        if not isinstance(other, HochschildChain):
            return NotImplemented
        return self.d == other.d and self._terms == other._terms

    def __hash__(self):
        return hash((self.d, tuple(self._terms.items())))

    def __repr__(self):
        if not self._terms:
            return "0"
        parts = []
        for b, c in self._terms.items():
            entries = ", ".join(repr(_mono(self.d, e)) for e in b)
            parts.append(f"{c}*({entries})")
        return " + ".join(parts)

    def __add__(self, other: "HochschildChain") -> "HochschildChain":
        if self.d != other.d:
            raise ValueError("dimension mismatch")
        t = dict(self._terms)
        for b, c in other._terms.items():
            t[b] = t.get(b, Fraction(0)) + c
        return HochschildChain(self.d, t)

    def __neg__(self):
        return HochschildChain(self.d, {b: -c for b, c in self._terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c) -> "HochschildChain":
        c = Fraction(c)
        return HochschildChain(self.d, {b: v * c for b, v in self._terms.items()})

    __rmul__ = scale


def _prod(e1: Exps, e2: Exps) -> Exps:
    return tuple(a + b for a, b in zip(e1, e2))


def hoch_b(a: HochschildChain) -> HochschildChain:
    """b(a0..ap) = sum_i (-1)^i (.., a_i a_{i+1}, ..) + (-1)^p (a_p a0, a1, .., a_{p-1})."""
    terms: dict[Basis, Fraction] = {}

    def add(key, c):
        terms[key] = terms.get(key, Fraction(0)) + c

    for basis, c in a.terms.items():
        p = len(basis) - 1
        if p == 0:
            continue
        for i in range(p):
            key = basis[:i] + (_prod(basis[i], basis[i + 1]),) + basis[i + 2:]
            add(key, c if i % 2 == 0 else -c)
        key = (_prod(basis[p], basis[0]),) + basis[1:p]
        add(key, c if p % 2 == 0 else -c)
    return HochschildChain(a.d, terms)


def connes_B(a: HochschildChain) -> HochschildChain:
    """B(a0..ap) = sum_i (-1)^{ip} (1, a_i, .., a_p, a_0, .., a_{i-1})."""
    one = (0,) * a.d
    terms: dict[Basis, Fraction] = {}
    for basis, c in a.terms.items():
        p = len(basis) - 1
        for i in range(p + 1):
            key = (one,) + basis[i:] + basis[:i]
            s = -1 if (i * p) % 2 else 1
            terms[key] = terms.get(key, Fraction(0)) + s * c
    return HochschildChain(a.d, terms)


class NegCyclicChain:
    """Polynomial in u with Hochschild chain coefficients; u^j (a0..ap) has
    degree -p + 2j."""

    __slots__ = ("d", "_parts")

    def __init__(self, d: int, parts: Mapping[int, HochschildChain] | None = None):
        self.d = d
        self._parts = {}
        for j, ch in sorted((parts or {}).items()):
            if j < 0:
                raise ValueError("negative u-power")
            if ch.d != d:
                raise ValueError("dimension mismatch")
            if ch:
                self._parts[j] = self._parts[j] + ch if j in self._parts else ch

    @classmethod
    def lift(cls, chain: HochschildChain, u_power: int = 0) -> "NegCyclicChain":
        return cls(chain.d, {u_power: chain})

    @property
    def parts(self) -> dict[int, HochschildChain]:
        return dict(self._parts)

    def items(self):
        return self._parts.items()

    def __bool__(self):
        return bool(self._parts)

    def __eq__(self, other):
        if isinstance(other, int) and other == 0:
            return not self._parts
        if not isinstance(other, NegCyclicChain):
            return NotImplemented
        return self.d == other.d and self._parts == other._parts

    def __repr__(self):
        return " + ".join(f"u^{j}*[{ch!r}]" for j, ch in self._parts.items()) or "0"

    def __add__(self, other: "NegCyclicChain") -> "NegCyclicChain":
        parts = dict(self._parts)
        for j, ch in other._parts.items():
            parts[j] = parts[j] + ch if j in parts else ch
        return NegCyclicChain(self.d, parts)

    def __neg__(self):
        return NegCyclicChain(self.d, {j: -ch for j, ch in self._parts.items()})

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c) -> "NegCyclicChain":
        return NegCyclicChain(self.d, {j: ch.scale(c) for j, ch in self._parts.items()})

    def map(self, f) -> "NegCyclicChain":
        """Apply a u-linear map given on Hochschild chains."""
        return NegCyclicChain(self.d, {j: f(ch) for j, ch in self._parts.items()})


def b_plus_uB(a: NegCyclicChain) -> NegCyclicChain:
    parts: dict[int, HochschildChain] = {}
    for j, ch in a.items():
        for power, piece in ((j, hoch_b(ch)), (j + 1, connes_B(ch))):
            parts[power] = parts[power] + piece if power in parts else piece
    return NegCyclicChain(a.d, parts)


def cochain_action(phi: MultiDiffOp, a):
    """Action C^k (x) C_p -> C_{p-k+1} of a k-ary cochain on chains.

    (-1)^{(k-1)(p+1)} phi.(a0..ap)
        = sum_{i=0}^{p-k+1} (-1)^{i(k-1)} (a0, .., phi(a_i..a_{i+k-1}), .., ap)
        + sum_{i=p-k+2}^{p} (-1)^{ip} (phi(a_i..ap, a0..a_{i+k-p-2}), a_{i+k-p-1}, .., a_{i-1})

    For k = 0 the first sum starts at i = 1: a function is inserted after
    a0, never in front of it.  This is the shuffle with (1, f), which
    commutes with b and B; the i = 0 insertion would not.

    On normalized chains this is only meaningful for normalized phi
    (vanishing when any argument is constant).

    Extends u-linearly when ``a`` is a NegCyclicChain.
    """
    if isinstance(a, NegCyclicChain):
        return a.map(lambda ch: cochain_action(phi, ch))
    if phi.d != a.d:
        raise ValueError("dimension mismatch")
    d = a.d
    k = phi.arity
    out = HochschildChain(d)
    for entries, c in a.items():
        p = len(entries) - 1
        if k > p + 1:
            continue
        pre = -1 if ((k - 1) * (p + 1)) % 2 else 1
        for i in range(1 if k == 0 else 0, p - k + 2):
            val = phi(*entries[i:i + k])
            if not val:
                continue
            s = -1 if (i * (k - 1)) % 2 else 1
            out = out + HochschildChain.from_tuple(entries[:i] + (val,) + entries[i + k:], pre * s * c)
        for i in range(max(p - k + 2, 0), p + 1):
            args = entries[i:] + entries[:i + k - p - 1]
            val = phi(*args)
            if not val:
                continue
            s = -1 if (i * p) % 2 else 1
            rest = entries[i + k - p - 1:i]
            out = out + HochschildChain.from_tuple((val,) + rest, pre * s * c)
    return out


# -- Gerstenhaber algebra -------------------------------------------------------

def gerstenhaber_product(phi: MultiDiffOp, psi: MultiDiffOp) -> MultiDiffOp:
    """phi . psi = sum_k (-1)^{|psi|(|phi|-k)} phi o (id^k (x) psi (x) id^{|phi|-k})."""
    if phi.d != psi.d:
        raise ValueError("dimension mismatch")
    arity = phi.arity + psi.arity - 1
    out = MultiDiffOp(phi.d, max(arity, 0))
    if phi.arity == 0:
        return out
    dphi, dpsi = phi.degree, psi.degree
    for k in range(phi.arity):
        term = phi.insert(k, psi)
        if (dpsi * (dphi - k)) % 2:
            term = -term
        out = out + term
    return out


def gerstenhaber_bracket(phi: MultiDiffOp, psi: MultiDiffOp) -> MultiDiffOp:
    first = gerstenhaber_product(phi, psi)
    second = gerstenhaber_product(psi, phi)
    if (phi.degree * psi.degree) % 2:
        return first + second
    return first - second


def hochschild_cochain_diff(phi: MultiDiffOp) -> MultiDiffOp:
    """[mu, phi] with mu the multiplication."""
    return gerstenhaber_bracket(MultiDiffOp.multiplication(phi.d), phi)
