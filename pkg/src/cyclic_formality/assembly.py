"""Taylor components F_n from the graph expansion of exp(Phi_n), low-order
Kontsevich components, the L-infinity module relation, star products and
the trace integrand.

Every sign comes from one place: the generating function

    g = gamma_1(x1, th1, v1) ... gamma_n(xn, thn, vn) a_0(y0) ... a_p(yp)

on n + p + 1 copies of the super coordinates, and the derivative word that a
graph prescribes (``_graph_operator``).  ``superoperator_expansion`` applies
exp(Phi_n) literally with formal symbols for the forms, which is the
independent check of the per-graph bookkeeping.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Sequence

from .diffop import MultiDiffOp
from .gradedcore import (
    KoszulContext,
    MultiVector,
    PolyFunction,
    contraction,
    divergence,
    hkr_chain,
    hkr_cochain,
    koszul_sign,
    schouten,
    wedge,
)
from .graphs import AdmissibleGraph, canonical_key, enumerate_graphs
from .hochschild import (
    HochschildChain,
    NegCyclicChain,
    b_plus_uB,
    cochain_action,
)
from .weights import (
    Accumulator,
    DiskSampler,
    HalfPlaneGraph,
    N_BLOCKS,
    exact_weight,
    graph_top,
    halfplane_graphs,
    halfplane_sampler,
    halfplane_values,
    structurally_zero,
)

Slot = tuple[int, int, MultiVector]  # (k, ell, homogeneous piece)


# -- homogeneous pieces and degrees ---------------------------------------------

def shifted_degree(k: int, ell: int) -> int:
    """Degree of theta-degree k, v-power ell in the shifted algebra."""
    return k - 2 + 2 * ell


def homogeneous_pieces(gamma: MultiVector) -> list[Slot]:
    return [(k, ell, piece) for (k, ell), piece in gamma.components().items()]


def _as_negcyclic(a) -> NegCyclicChain:
    if isinstance(a, NegCyclicChain):
        return a
    if isinstance(a, HochschildChain):
        return NegCyclicChain.lift(a)
    raise TypeError("expected a Hochschild or negative cyclic chain")


@dataclass
class GammaWord:
    """Ordered word gamma_1 ... gamma_n of multivector fields."""

    gammas: list[MultiVector]

    def __post_init__(self):
        self.gammas = list(self.gammas)
        ds = {g.d for g in self.gammas}
        if len(ds) > 1:
            raise ValueError("dimension mismatch in gamma word")

    def __len__(self):
        return len(self.gammas)

    @property
    def d(self) -> int:
        return self.gammas[0].d

    def homogeneous_words(self):
        """Yield tuples of homogeneous slots whose sum over all choices is the word."""
        per_slot = [homogeneous_pieces(g) for g in self.gammas]
        yield from itertools.product(*per_slot)

    def is_homogeneous(self) -> bool:
        return all(g.is_homogeneous() for g in self.gammas)

    def koszul(self) -> KoszulContext:
        degs = []
        for g in self.gammas:
            if not g.is_homogeneous():
                raise ValueError("Koszul context needs homogeneous slots")
            (k, ell), = g.bidegrees() or {(0, 0)}
            degs.append(shifted_degree(k, ell))
        return KoszulContext(degs)


# -- multi-copy super polynomials -------------------------------------------------

class _Layout:
    """Copies 0..n-1 for the gammas, n..n+q-1 for the chain (or function)
    slots.  Odd symbol i*d + nu is theta^(i)_nu; n*d + nu is the output
    theta_nu."""

    def __init__(self, d: int, n: int, q: int, symbolic: bool = False):
        self.d = d
        self.n = n
        self.q = q
        self.copies = n + q
        self.out = n * d
        self.symbolic = symbolic  # chain copies carry derivative counts, not exponents


def _sort_sign(seq) -> tuple[int, tuple]:
    lst = list(seq)
    inv = 0
    for i in range(len(lst)):
        for j in range(i + 1, len(lst)):
            if lst[i] > lst[j]:
                inv += 1
            elif lst[i] == lst[j]:
                return 0, ()
    return (-1 if inv & 1 else 1), tuple(sorted(lst))


def _initial_state(lay: _Layout, slots: Sequence[Slot], basis) -> dict:
    """g for homogeneous gammas and one chain basis tuple (or symbolic slots)."""
    d = lay.d
    state = {((0,) * (lay.copies * d), (), (0,) * lay.n): Fraction(1)}
    for i, (_k, _ell, piece) in enumerate(slots):
        nxt = {}
        for (exps, odd, vp), c in state.items():
            for (ell, o, e), cg in piece.items():
                ex = list(exps)
                ex[i * d:(i + 1) * d] = e
                vv = list(vp)
                vv[i] = ell
                key = (tuple(ex), odd + tuple(i * d + nu for nu in o), tuple(vv))
                nxt[key] = nxt.get(key, Fraction(0)) + c * cg
        state = nxt
    if basis is not None:
        nxt = {}
        for (exps, odd, vp), c in state.items():
            ex = list(exps)
            for j, e in enumerate(basis):
                ex[(lay.n + j) * d:(lay.n + j + 1) * d] = e
            nxt[(tuple(ex), odd, vp)] = c
        state = nxt
    return state


def _add(out: dict, key, c):
    v = out.get(key, Fraction(0)) + c
    if v:
        out[key] = v
    else:
        out.pop(key, None)


def _d_x(lay: _Layout, state: dict, copy: int, nu: int) -> dict:
    idx = copy * lay.d + nu
    sym = lay.symbolic and copy >= lay.n
    out: dict = {}
    for (exps, odd, vp), c in state.items():
        e = exps[idx]
        if sym:
            ex = list(exps)
            ex[idx] = e + 1
            _add(out, (tuple(ex), odd, vp), c)
        elif e:
            ex = list(exps)
            ex[idx] = e - 1
            _add(out, (tuple(ex), odd, vp), c * e)
    return out


def _d_theta(state: dict, code: int) -> dict:
    """Left derivative in the odd symbol ``code``."""
    out: dict = {}
    for (exps, odd, vp), c in state.items():
        if code in odd:
            pos = odd.index(code)
            _add(out, (exps, odd[:pos] + odd[pos + 1:], vp), -c if pos & 1 else c)
    return out


def _replace_theta(state: dict, code: int, new: int) -> dict:
    """theta_nu d/dtheta^(i)_nu: replace in place, then restore the order."""
    out: dict = {}
    for (exps, odd, vp), c in state.items():
        if code in odd:
            lst = list(odd)
            lst[lst.index(code)] = new
            s, srt = _sort_sign(lst)
            if s:
                _add(out, (exps, srt, vp), c * s)
    return out


def _sum_states(states: Iterable[dict]) -> dict:
    out: dict = {}
    for st in states:
        for k, c in st.items():
            _add(out, k, c)
    return out


def _target_copy(lay: _Layout, target) -> int:
    kind, j = target
    return j if kind == "v" else lay.n + j


def _black_step(lay: _Layout, state: dict, src: int, copy: int) -> dict:
    return _sum_states(
        _d_theta(_d_x(lay, state, copy, nu), src * lay.d + nu) for nu in range(lay.d)
    )


def _white_step(lay: _Layout, state: dict, src: int) -> dict:
    return _sum_states(
        _replace_theta(state, src * lay.d + nu, lay.out + nu) for nu in range(lay.d)
    )


def _diagonal(lay: _Layout, state: dict, ells: Sequence[int]) -> MultiVector:
    """v_i -> 0 after the required v-derivatives, x^(i) -> x, leftover
    theta^(i) discarded, output thetas read as the result."""
    d = lay.d
    terms: dict = {}
    for (exps, odd, vp), c in state.items():
        if tuple(vp) != tuple(ells):
            continue
        if odd and odd[0] < lay.out:
            continue
        e = [0] * d
        for cp in range(lay.copies):
            for nu in range(d):
                e[nu] += exps[cp * d + nu]
        key = (0, tuple(o - lay.out for o in odd), tuple(e))
        terms[key] = terms.get(key, Fraction(0)) + c
    return MultiVector(d, terms)


def _graph_operator(lay: _Layout, g: AdmissibleGraph, state: dict) -> dict:
    """Apply the derivative word of g: white replacements, then the black
    edge derivatives from the last edge to the first."""
    for i, _pos, (kind, _j) in g.edges():
        if kind == "w":
            state = _white_step(lay, state, i)
            if not state:
                return state
    for i, _pos, t in reversed(g.black_edges()):
        state = _black_step(lay, state, i, _target_copy(lay, t))
        if not state:
            return state
    return state


def _block_sign(nb: int) -> int:
    """Separating (w D)(w D)...(w D) into (w ... w)(D ... D)."""
    return -1 if (nb * (nb - 1) // 2) & 1 else 1


def graphs_for(slots: Sequence[Slot], m: int, connected_only: bool = False,
               prune: bool = True) -> list[AdmissibleGraph]:
    """Graph classes contributing to slots acting on a chain with m entries:
    out-degrees k_i and v-degrees ell_i."""
    k = tuple(s[0] for s in slots)
    ells = tuple(s[1] for s in slots)
    out = []
    for g0 in enumerate_graphs(k, m, 0):
        g = AdmissibleGraph(g0.n1, g0.m, g0.n_w, g0.k, ells, g0.targets)
        if connected_only and any(g.is_disconnected(i) for i in range(g.n1)):
            continue
        if prune and structurally_zero(g):
            continue
        out.append(g)
    return out


def _slot_parity(slots: Sequence[Slot]) -> int:
    return sum(s[0] for s in slots) & 1


def graph_terms(slots: Sequence[Slot], chain: HochschildChain, connected_only: bool = False,
                prune: bool = True) -> list[tuple[AdmissibleGraph, MultiVector]]:
    """(graph, operator value) pairs for homogeneous slots and a chain of one
    length; the value includes the block sign and the global
    (-1)^{|gamma| p} but not the weight."""
    d = chain.d
    n = len(slots)
    out: dict[bytes, list] = {}
    for p in sorted(chain.lengths()):
        part = chain.part(p)
        m = p + 1
        lay = _Layout(d, n, m)
        glob = -1 if (_slot_parity(slots) * p) & 1 else 1
        states = [(_initial_state(lay, slots, basis), c) for basis, c in part.terms.items()]
        for g in graphs_for(slots, m, connected_only, prune):
            total = MultiVector(d)
            for st, c in states:
                res = _graph_operator(lay, g, st)
                if res:
                    total = total + _diagonal(lay, res, g.deg).scale(c)
            if total:
                total = total.scale(glob * _block_sign(len(g.black_edges())))
                key = canonical_key(g)
                if key in out:
                    out[key][1] = out[key][1] + total
                else:
                    out[key] = [g, total]
    return [(g, mv) for g, mv in out.values() if mv]


# -- lazily weighted graph sums -----------------------------------------------------

def _mv_add(a: MultiVector | None, b: MultiVector) -> MultiVector:
    return b if a is None else a + b


class GraphSum:
    """sum_Gamma w_Gamma(u) * sum_j u^j V_{Gamma, j} + exact part.

    Kept unevaluated so that linear combinations of Taylor components are
    estimated sample by sample (graphs of one shape share samples)."""

    def __init__(self, d: int):
        self.d = d
        self.exact: dict[int, MultiVector] = {}
        self.graphs: dict[bytes, tuple[AdmissibleGraph, dict[int, MultiVector]]] = {}

    def copy(self) -> "GraphSum":
        out = GraphSum(self.d)
        out.exact = dict(self.exact)
        out.graphs = {k: (g, dict(v)) for k, (g, v) in self.graphs.items()}
        return out

    def add_exact(self, u: int, mv: MultiVector):
        if mv:
            self.exact[u] = _mv_add(self.exact.get(u), mv)

    def add_graph(self, g: AdmissibleGraph, u: int, mv: MultiVector):
        if not mv:
            return
        key = canonical_key(g)
        if key not in self.graphs:
            self.graphs[key] = (g, {})
        parts = self.graphs[key][1]
        parts[u] = _mv_add(parts.get(u), mv)

    def __add__(self, other: "GraphSum") -> "GraphSum":
        out = self.copy()
        for u, mv in other.exact.items():
            out.add_exact(u, mv)
        for _k, (g, parts) in other.graphs.items():
            for u, mv in parts.items():
                out.add_graph(g, u, mv)
        return out

    def scale(self, c) -> "GraphSum":
        return self.map(lambda mv: mv.scale(c))

    def __neg__(self):
        return self.scale(-1)

    def __sub__(self, other):
        return self + (-other)

    def map(self, f: Callable[[MultiVector], MultiVector]) -> "GraphSum":
        """Apply a linear map to every multivector coefficient."""
        out = GraphSum(self.d)
        for u, mv in self.exact.items():
            out.add_exact(u, f(mv))
        for _k, (g, parts) in self.graphs.items():
            for u, mv in parts.items():
                out.add_graph(g, u, f(mv))
        return out

    def times_u(self, power: int = 1) -> "GraphSum":
        out = GraphSum(self.d)
        for u, mv in self.exact.items():
            out.add_exact(u + power, mv)
        for _k, (g, parts) in self.graphs.items():
            for u, mv in parts.items():
                out.add_graph(g, u + power, mv)
        return out

    def formal(self) -> dict:
        """graph key -> {u: MultiVector} (operator parts, no weights)."""
        return {k: dict(parts) for k, (_g, parts) in self.graphs.items()}

    def evaluate(self, mode: str = "auto", samples: int = 200_000, seed: int = 0,
                 interior_perm: Sequence[int] | None = None,
                 blocks: int = N_BLOCKS) -> "TaylorResult":
        """Weighted value.  ``mode='exact'`` requires every weight in a closed
        family; ``'auto'`` uses closed forms where known and Monte Carlo for
        the rest; ``'mc'`` samples every non-pruned graph."""
        exact: dict[tuple, Fraction] = {}
        for u, mv in self.exact.items():
            for (_l, odd, e), c in mv.items():
                _add(exact, (u, odd, e), c)
        by_shape: dict[tuple[int, int], list] = {}
        for _key, (g, parts) in sorted(self.graphs.items()):
            ex = None if mode == "mc" else exact_weight(g)
            if structurally_zero(g):
                ex = {}
            if ex is not None:
                for uw, w in ex.items():
                    for u, mv in parts.items():
                        for (_l, odd, e), c in mv.items():
                            _add(exact, (uw + u, odd, e), w * c)
                continue
            if mode == "exact":
                raise ValueError(f"no closed-form weight for graph {canonical_key(g).decode()}")
            by_shape.setdefault((g.n1, g.m), []).append((g, parts))
        values: dict[tuple, float] = {}
        errors: dict[tuple, float] = {}
        info = {"samples": 0, "rejected": 0, "graphs_mc": 0}
        for (n1, m), items in sorted(by_shape.items()):
            est, rejected = _mc_graph_combination(n1, m, items, samples, seed, interior_perm, blocks)
            info["samples"] = samples
            info["rejected"] += rejected
            info["graphs_mc"] += len(items)
            for key, (mean, se) in est.items():
                values[key] = values.get(key, 0.0) + mean
                errors[key] = math.hypot(errors.get(key, 0.0), se)
        return TaylorResult.combine(self.d, exact, values, errors, info)


def _mc_graph_combination(n1, m, items, samples, seed, interior_perm, blocks):
    sampler = DiskSampler(n1, m, samples, seed, blocks)
    acc = Accumulator()
    coeffs = []
    for g, parts in items:
        lst = []
        for u, mv in parts.items():
            for (_l, odd, e), c in mv.items():
                lst.append((u, (odd, e), float(c)))
        coeffs.append((g, lst))
    for z, ang, wt in sampler:
        zz = z if interior_perm is None else z[:, list(interior_perm)]
        block: dict = {}
        for g, lst in coeffs:
            top = graph_top(g, zz, ang)
            for uw, arr in top.items():
                for u, rest, c in lst:
                    key = (uw + u,) + rest
                    if key in block:
                        block[key] = block[key] + c * arr
                    else:
                        block[key] = c * arr
        acc.add_block(block, wt)
    return {k: (mean, se) for k, (mean, se, _e) in acc.result().items()}, sampler.rejected


# -- results with errors -------------------------------------------------------------

def _fmt(c) -> str:
    if isinstance(c, Fraction):
        return f"{c.numerator}/{c.denominator}"
    return repr(float(c))


class TaylorResult:
    """u-polynomial of multivector fields with numeric coefficients and
    propagated standard errors.  Keys are (u_power, odd_tuple, exps)."""

    def __init__(self, d: int, values: dict | None = None, errors: dict | None = None,
                 info: dict | None = None):
        self.d = d
        self.values: dict[tuple, Fraction | float] = dict(values or {})
        self.errors: dict[tuple, float] = dict(errors or {})
        self.info = dict(info or {})

    @classmethod
    def combine(cls, d, exact: dict, values: dict, errors: dict, info=None) -> "TaylorResult":
        out = dict(exact)
        for k, v in values.items():
            out[k] = float(out.get(k, 0)) + v
        return cls(d, out, errors, info)

    @classmethod
    def from_multivectors(cls, d: int, parts: dict[int, MultiVector]) -> "TaylorResult":
        vals = {}
        for u, mv in parts.items():
            for (_l, odd, e), c in mv.items():
                _add(vals, (u, odd, e), c)
        return cls(d, vals)

    @property
    def is_exact(self) -> bool:
        return all(isinstance(v, Fraction) for v in self.values.values())

    def error(self, key) -> float:
        return self.errors.get(key, 0.0)

    def keys(self):
        return sorted(set(self.values) | set(self.errors))

    def __add__(self, other: "TaylorResult") -> "TaylorResult":
        """Sum of independent estimates (errors add in quadrature)."""
        vals = dict(self.values)
        for k, v in other.values.items():
            if k in vals and isinstance(vals[k], Fraction) and isinstance(v, Fraction):
                vals[k] = vals[k] + v
            else:
                vals[k] = float(vals.get(k, 0)) + float(v)
        errs = dict(self.errors)
        for k, e in other.errors.items():
            errs[k] = math.hypot(errs.get(k, 0.0), e)
        return TaylorResult(self.d, vals, errs)

    def scale(self, c) -> "TaylorResult":
        vals = {k: (v * c if isinstance(v, Fraction) else float(v) * float(c)) for k, v in self.values.items()}
        return TaylorResult(self.d, vals, {k: e * abs(float(c)) for k, e in self.errors.items()}, self.info)

    def __neg__(self):
        return self.scale(-1)

    def __sub__(self, other):
        return self + (-other)

    def is_zero(self) -> bool:
        """Exactly zero (no nonzero exact coefficient, no MC coefficient)."""
        return all(isinstance(v, Fraction) and v == 0 for v in self.values.values())

    def max_abs(self) -> float:
        return max((abs(float(v)) for v in self.values.values()), default=0.0)

    def max_sigma(self) -> float:
        """Largest |value| / stderr over MC coefficients (inf if an exact
        coefficient is nonzero)."""
        worst = 0.0
        for k in self.keys():
            v = abs(float(self.values.get(k, 0)))
            e = self.error(k)
            if v == 0:
                continue
            worst = max(worst, v / e if e > 0 else math.inf)
        return worst

    def within(self, nsigma: float = 3.0, floor: float = 0.0) -> bool:
        """Every coefficient within nsigma standard errors of 0 (or below floor)."""
        for k in self.keys():
            v = abs(float(self.values.get(k, 0)))
            if v <= floor:
                continue
            if v > nsigma * self.error(k):
                return False
        return True

    def to_multivectors(self) -> dict[int, MultiVector]:
        if not self.is_exact:
            raise ValueError("Monte Carlo result has no exact multivector form")
        parts: dict[int, dict] = {}
        for (u, odd, e), c in self.values.items():
            if c:
                parts.setdefault(u, {})[(0, odd, e)] = c
        return {u: MultiVector(self.d, t) for u, t in sorted(parts.items())}

    def to_dict(self) -> dict:
        terms = []
        for k in self.keys():
            u, odd, e = k
            v = self.values.get(k, Fraction(0))
            terms.append({"u_power": u, "theta": list(odd), "x": list(e),
                          "value": _fmt(v), "stderr": self.error(k)})
        return {"d": self.d, "exact": self.is_exact, "terms": terms}

    def __repr__(self):
        return f"TaylorResult(d={self.d}, {self.to_dict()['terms']})"


# -- F_n -----------------------------------------------------------------------

def _check_dims(word: GammaWord, a):
    if len(word) and word.d != a.d:
        raise ValueError("dimension mismatch between gammas and chain")


def F_graphsum(gammas, a, connected_only: bool = False, prune: bool = True) -> GraphSum:
    """F_n(gamma; a) as an unevaluated weighted graph sum (F_0 exact)."""
    word = gammas if isinstance(gammas, GammaWord) else GammaWord(list(gammas))
    a = _as_negcyclic(a)
    d = a.d
    out = GraphSum(d)
    if len(word) == 0:
        for j, ch in a.items():
            p0 = ch.part(0)
            mv = MultiVector(d)
            for basis, c in p0.terms.items():
                mv = mv + MultiVector(d, {(0, (), basis[0]): c})
            out.add_exact(j, mv)
        return out
    _check_dims(word, a)
    for slots in word.homogeneous_words():
        for j, ch in a.items():
            for g, mv in graph_terms(slots, ch, connected_only, prune):
                out.add_graph(g, j, mv)
    return out


def F_n(gammas, a, mode: str = "auto", samples: int = 200_000, seed: int = 0,
        connected_only: bool = False) -> TaylorResult:
    """Taylor component F_n(gamma_1 ... gamma_n; a) of the module morphism."""
    return F_graphsum(gammas, a, connected_only).evaluate(mode, samples, seed)


def F1_closed(gamma: MultiVector, a) -> dict[int, MultiVector]:
    """(-1)^p u^s gamma contracted with H(a), s = k + ell - p - 1, for
    k >= p and s >= 0; zero otherwise.  Extended linearly."""
    a = _as_negcyclic(a)
    d = a.d
    out: dict[int, MultiVector] = {}
    for k, ell, piece in homogeneous_pieces(gamma):
        bare = piece.homogeneous(k=k, ell=ell)
        bare = MultiVector(d, {(0, o, e): c for (_l, o, e), c in bare.items()})
        for j, ch in a.items():
            for p in ch.lengths():
                s = k + ell - p - 1
                if k < p or s < 0:
                    continue
                val = contraction(bare, hkr_chain(ch.part(p)))
                if p & 1:
                    val = -val
                if val:
                    out[s + j] = _mv_add(out.get(s + j), val)
    return {u: mv for u, mv in sorted(out.items()) if mv}


# -- formal expansion of exp(Phi_n) -------------------------------------------------

def formal_graph_expansion(slots: Sequence[Slot], chain: HochschildChain) -> dict:
    """Route 1 in formal form: {(omega word, phi powers): MultiVector}.

    Each graph contributes its operator value times 1/prod k!, attached to
    the sorted product of its edge symbols; an edge symbol is
    (source, target copy) and the form order is the global edge order."""
    d = chain.d
    n = len(slots)
    pref = Fraction(1, math.prod(math.factorial(s[0]) for s in slots))
    out: dict = {}
    for p in chain.lengths():
        m = p + 1
        lay = _Layout(d, n, m)
        for g, mv in graph_terms(slots, chain.part(p), prune=False):
            symbols = [(i, _target_copy(lay, t)) for i, _pos, t in g.black_edges()]
            codes = [i * lay.copies + c for i, c in symbols]
            s, srt = _sort_sign(codes)
            if not s:
                continue
            key = (srt, g.r())
            out[key] = _mv_add(out.get(key), mv.scale(pref * s))
    return {k: v for k, v in out.items() if v}


def superoperator_expansion(slots: Sequence[Slot], chain: HochschildChain) -> dict:
    """Route 2: apply exp(Phi_n) to g literally, with odd formal symbols for
    omega(z_i, z_k) and even ones for phi(z_i); then v = 0 and the diagonal.
    Returns {(omega word, phi powers): MultiVector} including (-1)^{|gamma| p}."""
    d = chain.d
    n = len(slots)
    out: dict = {}
    ells = [s[1] for s in slots]
    for p in sorted(chain.lengths()):
        m = p + 1
        lay = _Layout(d, n, m)
        glob = -1 if (_slot_parity(slots) * p) & 1 else 1
        zero_v = (0,) * n
        for basis, c in chain.part(p).terms.items():
            st0 = _initial_state(lay, slots, basis)
            level = {((), (0,) * n): st0}
            j = 0
            while level:
                if j:
                    scale = Fraction(glob, math.factorial(j)) * c
                    for (word, phis), st in level.items():
                        mv = _diagonal(lay, st, zero_v)
                        if mv:
                            key = (word, phis)
                            out[key] = _mv_add(out.get(key), mv.scale(scale))
                else:
                    mv = _diagonal(lay, st0, zero_v)
                    if mv:
                        key = ((), (0,) * n)
                        out[key] = _mv_add(out.get(key), mv.scale(glob * c))
                level = _phi_step(lay, level)
                j += 1
    del ells
    return {k: v for k, v in out.items() if v}


def _phi_step(lay: _Layout, level: dict) -> dict:
    nxt: dict = {}

    def put(word, phis, st):
        if not st:
            return
        key = (word, phis)
        if key in nxt:
            nxt[key] = _sum_states([nxt[key], st])
        else:
            nxt[key] = st

    n = lay.n
    for (word, phis), st in level.items():
        nform = len(word)
        for i in range(n):
            for cp in range(lay.copies):
                if cp == i:
                    continue
                code = i * lay.copies + cp
                if code in word:
                    continue
                res = _black_step(lay, st, i, cp)
                if not res:
                    continue
                # D passes the forms already present, then omega multiplies on the left
                sign = -1 if nform & 1 else 1
                s2, srt = _sort_sign((code,) + word)
                res = {k: v * sign * s2 for k, v in res.items()}
                put(srt, phis, res)
            ph = list(phis)
            ph[i] += 1
            ph = tuple(ph)
            put(word, ph, _white_step(lay, st, i))
            put(word, ph, _d_v(st, i))
    return nxt


def _d_v(state: dict, i: int) -> dict:
    out: dict = {}
    for (exps, odd, vp), c in state.items():
        if vp[i]:
            vv = list(vp)
            vv[i] -= 1
            _add(out, (exps, odd, tuple(vv)), c * vp[i])
    return out


# -- Kontsevich components ---------------------------------------------------------

def U1(gamma: MultiVector) -> MultiDiffOp:
    """First Taylor component: the HKR cochain (v-free input)."""
    return hkr_cochain(gamma.v_truncate())


def _halfplane_operator(slots: Sequence[Slot], g: HalfPlaneGraph, nfun: int) -> MultiDiffOp:
    d = slots[0][2].d
    n = len(slots)
    lay = _Layout(d, n, nfun, symbolic=True)
    state = _initial_state(lay, slots, None)
    for i, _pos, t in reversed(g.edges()):
        state = _black_step(lay, state, i, _target_copy(lay, t))
        if not state:
            return MultiDiffOp(d, nfun)
    terms: dict = {}
    for (exps, odd, _vp), c in state.items():
        if odd:
            continue
        e = [0] * d
        for cp in range(n):
            for nu in range(d):
                e[nu] += exps[cp * d + nu]
        slot_idx = tuple(tuple(exps[(n + j) * d:(n + j + 1) * d]) for j in range(nfun))
        poly = PolyFunction(d, {tuple(e): c})
        terms[slot_idx] = terms[slot_idx] + poly if slot_idx in terms else poly
    return MultiDiffOp(d, nfun, terms).scale(_block_sign(sum(g.k)))


def U1_graph(gamma: MultiVector) -> MultiDiffOp:
    """U_1 by the half-plane graph sum with exact one-vertex weights
    sign(order) / (k!)^2; agrees with ``U1``."""
    gamma = gamma.v_truncate()
    d = gamma.d
    out = None
    for k, ell, piece in homogeneous_pieces(gamma):
        for g in halfplane_graphs((k,), k):
            order = [j for _kind, j in g.targets[0]]
            inv = sum(1 for a in range(k) for b in range(a + 1, k) if order[a] > order[b])
            w = Fraction(-1 if inv & 1 else 1, math.factorial(k) ** 2)
            op = _halfplane_operator([(k, ell, piece)], g, k).scale(w)
            out = op if out is None else out + op
    return out if out is not None else MultiDiffOp(d, 0)


class HalfPlaneSum:
    """sum_Gamma w_Gamma * V_Gamma over half-plane graphs plus an exact part;
    V values are dicts key -> Fraction.  Evaluated sample by sample per shape."""

    def __init__(self):
        self.exact: dict = {}
        self.graphs: dict[str, tuple[HalfPlaneGraph, dict]] = {}

    def add_exact(self, key, c):
        _add(self.exact, key, Fraction(c))

    def add_graph(self, g: HalfPlaneGraph, key, c):
        c = Fraction(c)
        if not c:
            return
        if g.key() not in self.graphs:
            self.graphs[g.key()] = (g, {})
        _add(self.graphs[g.key()][1], key, c)

    def evaluate(self, samples: int = 200_000, seed: int = 0, blocks: int = N_BLOCKS):
        """key -> (value, stderr)."""
        by_shape: dict = {}
        for _k, (g, vec) in sorted(self.graphs.items()):
            if vec:
                by_shape.setdefault((g.n, g.m), []).append((g, vec))
        values = {k: float(v) for k, v in self.exact.items()}
        errors: dict = {}
        for (n, m), items in sorted(by_shape.items()):
            acc = Accumulator()
            for w, psi, wt in halfplane_sampler(n, m, samples, seed, blocks):
                block: dict = {}
                for g, vec in items:
                    arr = halfplane_values(g, w, psi)
                    for key, c in vec.items():
                        block[key] = block[key] + float(c) * arr if key in block else float(c) * arr
                acc.add_block(block, wt)
            for key, (mean, se, _e) in acc.result().items():
                values[key] = values.get(key, 0.0) + mean
                errors[key] = math.hypot(errors.get(key, 0.0), se)
        return {k: (values.get(k, 0.0), errors.get(k, 0.0)) for k in sorted(set(values) | set(errors))}


def U2_terms(g1: MultiVector, g2: MultiVector) -> list[tuple[HalfPlaneGraph, MultiDiffOp]]:
    """(graph, operator) pairs with U_2(g1, g2) = sum w_Gamma * operator; the
    graph set is every half-plane graph with out-degrees (k1, k2) on
    k1 + k2 - 2 boundary points."""
    g1, g2 = g1.v_truncate(), g2.v_truncate()
    out = []
    for k1, l1, p1 in homogeneous_pieces(g1):
        for k2, l2, p2 in homogeneous_pieces(g2):
            nfun = k1 + k2 - 2
            if nfun < 0:
                continue
            slots = [(k1, l1, p1), (k2, l2, p2)]
            for hg in halfplane_graphs((k1, k2), nfun):
                op = _halfplane_operator(slots, hg, nfun)
                if op:
                    out.append((hg, op))
    return out


def U2(g1: MultiVector, g2: MultiVector, samples: int = 200_000, seed: int = 0):
    """U_2(g1, g2) as {slot multi-indices: {x exps: (value, stderr)}}."""
    hs = HalfPlaneSum()
    for hg, op in U2_terms(g1, g2):
        for slots, poly in op.items():
            for e, c in poly.items():
                hs.add_graph(hg, (slots, e), c)
    res = hs.evaluate(samples, seed)
    out: dict = {}
    for (slots, e), val in res.items():
        out.setdefault(slots, {})[e] = val
    return out


# -- the module relation ---------------------------------------------------------------

def _slots_word(slots: Sequence[Slot]) -> list[MultiVector]:
    return [s[2] for s in slots]


def _shuffles(n: int, k: int):
    for first in itertools.combinations(range(n), k):
        rest = tuple(i for i in range(n) if i not in first)
        yield first, rest


def _act_chain(op: MultiDiffOp, a: NegCyclicChain) -> NegCyclicChain:
    return a.map(lambda ch: cochain_action(op, ch))


def _chain_parts_by_p(a: NegCyclicChain):
    for j, ch in a.items():
        for p in ch.lengths():
            yield j, p, ch.part(p)


@dataclass
class MirandaTerms:
    """The pieces of the module relation, each an unevaluated graph sum,
    plus an independent Monte Carlo part for U_2 terms."""

    delta: GraphSum
    differential: GraphSum
    kontsevich: GraphSum
    brackets: GraphSum
    divergence: GraphSum
    u2_part: TaylorResult | None = None

    def residual(self) -> GraphSum:
        return self.delta + self.differential + self.kontsevich + self.brackets - self.divergence


def _homogeneous_miranda(slots: Sequence[Slot], a: NegCyclicChain, u2_samples: int,
                         seed: int) -> MirandaTerms:
    d = a.d
    n = len(slots)
    degs = [shifted_degree(k, ell) for k, ell, _ in slots]
    total = sum(degs)
    word = _slots_word(slots)

    # F_n(delta gamma; a): delta is a degree-1 derivation of the symmetric algebra
    delta = GraphSum(d)
    for i in range(n):
        before = sum(degs[:i])
        dg = divergence(word[i]).times_v()
        if not dg:
            continue
        w = list(word)
        w[i] = dg
        term = F_graphsum(w, a)
        delta = delta + (term if before % 2 == 0 else -term)

    # (-1)^{|gamma| + p} F_n(gamma; (b + uB) a)
    differential = GraphSum(d)
    for j, p, ch in _chain_parts_by_p(a):
        piece = NegCyclicChain.lift(ch, j)
        term = F_graphsum(word, b_plus_uB(piece))
        differential = differential + (term if (total + p) % 2 == 0 else -term)

    # sum over shuffles of F_k(gamma_sigma; U_{n-k}(bar gamma) . a)
    kontsevich = GraphSum(d)
    u2_part = None
    sign_pref = -1 if (total - 1) % 2 else 1
    for k in range(n):
        for first, rest in _shuffles(n, k):
            eps = koszul_sign(first + rest, degs)
            bars = [word[i].v_truncate() for i in rest]
            if any(not b for b in bars):
                continue
            if len(rest) == 1:
                acted = _act_chain(U1(bars[0]), a)
                term = F_graphsum([word[i] for i in first], acted)
                kontsevich = kontsevich + term.scale(sign_pref * eps)
            elif len(rest) == 2 and k == 0:
                part = _u2_acted_F0(bars[0], bars[1], a, u2_samples, seed).scale(sign_pref * eps)
                u2_part = part if u2_part is None else u2_part + part
            else:
                raise NotImplementedError("U_n with n >= 3 is out of scope")

    # sum_{i<j} eps_ij F_{n-1}((-1)^{|gamma_i| - 1} [gamma_i, gamma_j] rest; a)
    brackets = GraphSum(d)
    for i, j in itertools.combinations(range(n), 2):
        rest = [r for r in range(n) if r not in (i, j)]
        eps = koszul_sign((i, j) + tuple(rest), degs)
        br = schouten(word[i], word[j])
        if not br:
            continue
        s = eps * (-1 if (degs[i] - 1) % 2 else 1)
        term = F_graphsum([br] + [word[r] for r in rest], a)
        brackets = brackets + term.scale(s)

    div = F_graphsum(word, a).map(divergence)
    return MirandaTerms(delta, differential, kontsevich, brackets, div, u2_part)


def _u2_acted_F0(b1: MultiVector, b2: MultiVector, a: NegCyclicChain, samples: int,
                 seed: int) -> TaylorResult:
    """F_0(U_2(b1, b2) . a) with the Monte Carlo U_2, as a TaylorResult."""
    d = a.d
    hs = HalfPlaneSum()
    for hg, op in U2_terms(b1, b2):
        acted = _act_chain(op, a)
        for j, ch in acted.items():
            for basis, c in ch.part(0).terms.items():
                hs.add_graph(hg, (j, (), basis[0]), c)
    vals, errs = {}, {}
    for key, (v, e) in hs.evaluate(samples, seed).items():
        vals[key] = v
        errs[key] = e
    return TaylorResult(d, vals, errs)


def miranda_terms(gammas, a, u2_samples: int = 200_000, seed: int = 0) -> list[MirandaTerms]:
    word = gammas if isinstance(gammas, GammaWord) else GammaWord(list(gammas))
    a = _as_negcyclic(a)
    if len(word) > 2:
        raise ValueError("the module relation is checked for n <= 2")
    if len(word):
        _check_dims(word, a)
    return [_homogeneous_miranda(slots, a, u2_samples, seed) for slots in word.homogeneous_words()]


def miranda_residual(gammas, a, mode: str = "auto", samples: int = 200_000,
                     seed: int = 0) -> TaylorResult:
    """Left side minus right side of the L-infinity module relation."""
    parts = miranda_terms(gammas, a, samples, seed)
    d = _as_negcyclic(a).d
    total = GraphSum(d)
    extra = None
    for mt in parts:
        total = total + mt.residual()
        if mt.u2_part is not None:
            extra = mt.u2_part if extra is None else extra + mt.u2_part
    res = total.evaluate(mode, samples, seed)
    return res if extra is None else res + extra


# -- star products ------------------------------------------------------------------------

def _is_bivector(pi: MultiVector) -> bool:
    return pi.bidegrees() <= {(2, 0)}


@dataclass
class StarSeries:
    """f * g = sum_j eps^j B_j(f, g), B_0 = mu, B_1 = U_1(pi),
    B_2 = U_2(pi, pi) / 2 (Monte Carlo weights)."""

    pi: MultiVector
    order: int
    exact_terms: list[MultiDiffOp]
    u2_terms: list[tuple[HalfPlaneGraph, MultiDiffOp]] = field(default_factory=list)
    samples: int = 200_000
    seed: int = 0

    def _half(self):
        return [(g, op.scale(Fraction(1, 2))) for g, op in self.u2_terms]

    def apply(self, f: PolyFunction, g: PolyFunction) -> dict[int, dict]:
        """order -> {x exps: (value, stderr)}."""
        out = {}
        for j, op in enumerate(self.exact_terms):
            val = op(f, g)
            out[j] = {e: (float(c), 0.0) for e, c in val.items()}
        if self.order >= 2:
            hs = HalfPlaneSum()
            for hg, op in self._half():
                for e, c in op(f, g).items():
                    hs.add_graph(hg, e, c)
            out[2] = hs.evaluate(self.samples, self.seed)
        return out

    def exact_apply(self, f: PolyFunction, g: PolyFunction, j: int) -> PolyFunction:
        return self.exact_terms[j](f, g)

    def associativity_residual(self, f: PolyFunction, g: PolyFunction, h: PolyFunction,
                               j: int) -> dict:
        """Coefficient of eps^j in (f*g)*h - f*(g*h): exps -> (value, stderr)."""
        hs = HalfPlaneSum()
        ops: list = list(self.exact_terms) + [None] * (j + 1)
        half = self._half()

        def add_poly(poly: PolyFunction, sign):
            for e, c in poly.items():
                hs.add_exact(e, sign * c)

        for a_ord in range(j + 1):
            b_ord = j - a_ord
            for outer, inner, left in ((a_ord, b_ord, True), (a_ord, b_ord, False)):
                sign = 1 if left else -1
                oop, iop = ops[outer], ops[inner]
                if outer >= len(self.exact_terms) and outer != 2:
                    continue
                if inner >= len(self.exact_terms) and inner != 2:
                    continue
                if outer == 2 and inner == 2:
                    continue
                if oop is not None and iop is not None:
                    fg = iop(f, g) if left else iop(g, h)
                    add_poly(oop(fg, h) if left else oop(f, fg), sign)
                elif oop is None and iop is not None:
                    fg = iop(f, g) if left else iop(g, h)
                    for hg, op in half:
                        val = op(fg, h) if left else op(f, fg)
                        for e, c in val.items():
                            hs.add_graph(hg, e, sign * c)
                elif oop is not None and iop is None:
                    for hg, op in half:
                        inner_val = op(f, g) if left else op(g, h)
                        val = oop(inner_val, h) if left else oop(f, inner_val)
                        for e, c in val.items():
                            hs.add_graph(hg, e, sign * c)
        return hs.evaluate(self.samples, self.seed)


def star_product(pi: MultiVector, order: int = 2, samples: int = 200_000,
                 seed: int = 0) -> StarSeries:
    if not _is_bivector(pi):
        raise ValueError("star_product needs a bivector field")
    if schouten(pi, pi):
        raise ValueError("pi is not Poisson: [pi, pi] != 0")
    if order > 2:
        raise ValueError("star products are built up to order 2")
    d = pi.d
    exact = [MultiDiffOp.multiplication(d)]
    if order >= 1:
        exact.append(U1(pi))
    u2 = U2_terms(pi, pi) if order >= 2 else []
    return StarSeries(pi, order, exact, u2, samples, seed)


# -- unimodular Poisson structures and the trace ------------------------------------------

@dataclass
class PoissonData:
    pi: MultiVector
    h: MultiVector

    def __post_init__(self):
        if not isinstance(self.h, MultiVector):
            self.h = MultiVector.from_function(self.h)
        if self.pi.d != self.h.d:
            raise ValueError("dimension mismatch")
        if not _is_bivector(self.pi):
            raise ValueError("pi must be a v-free bivector")
        if self.h.bidegrees() - {(0, 0)}:
            raise ValueError("h must be a function")


def check_unimodular(pd: PoissonData) -> dict:
    """Report on [pi, pi] = 0 and div pi - [h, pi] = 0; never raises."""
    jac = schouten(pd.pi, pd.pi)
    flux = divergence(pd.pi) - schouten(pd.h, pd.pi)
    return {
        "ok": not jac and not flux,
        "poisson": not jac,
        "unimodular": not flux,
        "poisson_residual": repr(jac),
        "divergence_residual": repr(flux),
    }


def _function_chain(f: PolyFunction) -> NegCyclicChain:
    return NegCyclicChain.lift(HochschildChain.from_tuple([f]))


def resummation_sides(pd: PoissonData, f: PolyFunction, k: int, n: int) -> GraphSum:
    """F_{k+n}((hv)^k pi^n; f) - sum_s C(k,s) h^s F~_{k-s+n}((hv)^{k-s} pi^n; f),
    as one graph sum (F~: no disconnected interior vertices)."""
    hv = pd.h.times_v()
    a = _function_chain(f)
    lhs = F_graphsum([hv] * k + [pd.pi] * n, a)
    rhs = GraphSum(f.d)
    for s in range(k + 1):
        term = F_graphsum([hv] * (k - s) + [pd.pi] * n, a, connected_only=True)
        hs = pd.h
        power = MultiVector.from_function(PolyFunction.const(f.d, 1))
        for _ in range(s):
            power = power * hs
        rhs = rhs + term.map(lambda mv, pw=power: mv * pw).scale(math.comb(k, s))
    return lhs - rhs


@dataclass
class TraceIntegrand:
    """Integrand exp(h) * sum_n eps^n / n! H_n(pi, h, f) of the trace."""

    H: list[TaylorResult]
    prefactor: str = "exp(h)"

    def to_dict(self) -> dict:
        return {"prefactor": self.prefactor, "H": [r.to_dict() for r in self.H]}


def trace_integrand(pd: PoissonData, f: PolyFunction, order: int = 1, samples: int = 200_000,
                    seed: int = 0) -> TraceIntegrand:
    """H_n = sum_r F~_{n+r}((hv)^r pi^n; f) / r!, r <= 2n, for n <= order."""
    rep = check_unimodular(pd)
    if not rep["ok"]:
        raise ValueError(f"pi, h is not a unimodular Poisson pair: {rep}")
    a = _function_chain(f)
    hv = pd.h.times_v()
    out = []
    for n in range(order + 1):
        total = GraphSum(f.d)
        for r in range(2 * n + 1):
            term = F_graphsum([hv] * r + [pd.pi] * n, a, connected_only=True)
            total = total + term.scale(Fraction(1, math.factorial(r)))
        out.append(total.evaluate("auto", samples, seed))
    return TraceIntegrand(out)


# -- affine vector fields ------------------------------------------------------------

def is_affine_vector_field(gamma: MultiVector) -> bool:
    if gamma.bidegrees() - {(1, 0)}:
        return False
    return gamma.max_x_degree() <= 1


def affine_residual_sum(gamma1: MultiVector, rest, a) -> GraphSum:
    """F_n(gamma_1 rest; a) - gamma_1 wedge F_{n-1}(rest; a) as a graph sum."""
    if not is_affine_vector_field(gamma1):
        raise ValueError("gamma_1 must be an affine vector field")
    rest = list(rest)
    lhs = F_graphsum([gamma1] + rest, a)
    rhs = F_graphsum(rest, a).map(lambda mv: wedge(gamma1, mv))
    return lhs - rhs


def affine_property_check(gamma1: MultiVector, rest, a, mode: str = "auto",
                          samples: int = 200_000, seed: int = 0) -> TaylorResult:
    return affine_residual_sum(gamma1, rest, a).evaluate(mode, samples, seed)
