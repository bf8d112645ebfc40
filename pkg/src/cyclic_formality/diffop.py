"""Multidifferential operators with polynomial coefficients."""

from __future__ import annotations

import itertools
from fractions import Fraction
from math import factorial
from typing import Mapping, Sequence

from .gradedcore import Exps, PolyFunction


def _compositions(n: int, parts: int):
    """All tuples of ``parts`` nonnegative ints summing to n."""
    if parts == 1:
        yield (n,)
        return
    for first in range(n + 1):
        for rest in _compositions(n - first, parts - 1):
            yield (first,) + rest


def leibniz_splits(alpha: Exps, parts: int):
    """Yield (multinomial, [beta_0..beta_{parts-1}]) with sum beta = alpha."""
    per_coord = [list(_compositions(a, parts)) for a in alpha]
    for choice in itertools.product(*per_coord):
        coef = 1
        for a, comp in zip(alpha, choice):
            c = factorial(a)
            for k in comp:
                c //= factorial(k)
            coef *= c
        betas = [tuple(choice[nu][j] for nu in range(len(alpha))) for j in range(parts)]
        yield coef, betas


class MultiDiffOp:
    """Multilinear differential operator A^k -> A.

    ``terms`` maps a tuple of k multi-indices (one per slot) to the polynomial
    coefficient; the operator sends (f_1..f_k) to
    ``sum coeff * d^{alpha_1} f_1 * ... * d^{alpha_k} f_k``.
    """

    __slots__ = ("d", "arity", "_terms")

    def __init__(self, d: int, arity: int, terms: Mapping[tuple, PolyFunction] | None = None):
        self.d = d
        self.arity = arity
        clean = {}
        for slots, coeff in (terms or {}).items():
            slots = tuple(tuple(a) for a in slots)
            if len(slots) != arity:
                raise ValueError(f"term {slots} does not have arity {arity}")
            if not isinstance(coeff, PolyFunction):
                coeff = PolyFunction.const(d, coeff)
            if slots in clean:
                coeff = clean[slots] + coeff
            clean[slots] = coeff
        self._terms = {k: v for k, v in sorted(clean.items()) if v}

    # -- constructors ---------------------------------------------------
    @classmethod
    def multiplication(cls, d: int) -> "MultiDiffOp":
        z = (0,) * d
        return cls(d, 2, {(z, z): PolyFunction.const(d, 1)})

    @classmethod
    def identity(cls, d: int) -> "MultiDiffOp":
        return cls(d, 1, {((0,) * d,): PolyFunction.const(d, 1)})

    @classmethod
    def function(cls, f: PolyFunction) -> "MultiDiffOp":
        return cls(f.d, 0, {(): f})

    @classmethod
    def vector_field(cls, components: Sequence[PolyFunction]) -> "MultiDiffOp":
        d = len(components)
        terms = {}
        for nu, c in enumerate(components):
            e = [0] * d
            e[nu] = 1
            terms[(tuple(e),)] = c
        return cls(d, 1, terms)

    # -- algebra ----------------------------------------------------------
    @property
    def terms(self):
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    @property
    def degree(self) -> int:
        """Hochschild degree arity - 1."""
        return self.arity - 1

    def __bool__(self):
        return bool(self._terms)

    def __eq__(self, other):
        if isinstance(other, int) and other == 0:
            return not self._terms
        if not isinstance(other, MultiDiffOp):
            return NotImplemented
        if not self._terms and not other._terms:
            return self.d == other.d
        return self.d == other.d and self.arity == other.arity and self._terms == other._terms

    def __hash__(self):
        return hash((self.d, self.arity, tuple(self._terms.items())))

    def __repr__(self):
        return f"MultiDiffOp(d={self.d}, arity={self.arity}, terms={self._terms!r})"

    def _check(self, other: "MultiDiffOp"):
        if self.d != other.d:
            raise ValueError("dimension mismatch")
        if self.arity != other.arity and self._terms and other._terms:
            raise ValueError(f"arity mismatch {self.arity} != {other.arity}")

    def __add__(self, other: "MultiDiffOp") -> "MultiDiffOp":
        self._check(other)
        arity = self.arity if self._terms else other.arity
        t = dict(self._terms)
        for k, v in other._terms.items():
            t[k] = t[k] + v if k in t else v
        return MultiDiffOp(self.d, arity, t)

    def __neg__(self):
        return MultiDiffOp(self.d, self.arity, {k: -v for k, v in self._terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c) -> "MultiDiffOp":
        c = Fraction(c)
        return MultiDiffOp(self.d, self.arity, {k: v * c for k, v in self._terms.items()})

    def __call__(self, *fs: PolyFunction) -> PolyFunction:
        if len(fs) != self.arity:
            raise ValueError(f"expected {self.arity} arguments, got {len(fs)}")
        out = PolyFunction(self.d)
        for slots, coeff in self._terms.items():
            val = coeff
            for alpha, f in zip(slots, fs):
                val = val * f.diff(alpha)
                if not val:
                    break
            out = out + val
        return out

    def insert(self, i: int, psi: "MultiDiffOp") -> "MultiDiffOp":
        """phi o (id^i (x) psi (x) id^{k-i-1}) with Leibniz expansion."""
        if self.d != psi.d:
            raise ValueError("dimension mismatch")
        if not 0 <= i < self.arity:
            raise ValueError("insertion slot out of range")
        d = self.d
        arity = self.arity + psi.arity - 1
        terms: dict[tuple, PolyFunction] = {}
        for slots, c in self._terms.items():
            alpha = slots[i]
            for betas, e in psi._terms.items():
                for mult, split in leibniz_splits(alpha, psi.arity + 1):
                    coeff = c * e.diff(split[0])
                    if not coeff:
                        continue
                    inner = tuple(
                        tuple(a + b for a, b in zip(beta, extra))
                        for beta, extra in zip(betas, split[1:])
                    )
                    key = slots[:i] + inner + slots[i + 1:]
                    coeff = coeff * mult
                    terms[key] = terms[key] + coeff if key in terms else coeff
        return MultiDiffOp(d, arity, terms)

    def max_order(self) -> int:
        return max((sum(sum(a) for a in s) for s in self._terms), default=0)
