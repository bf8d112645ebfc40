"""Admissible disk graphs: validation, enumeration, canonical keys.

A graph has ``n1`` interior vertices (first type, ordered), ``m`` boundary
vertices (second type, ordered, boundary vertex 0 is the basepoint carrying
``a0``) and ``n_w`` white vertices.  Interior vertex ``i`` carries an ordered
list of ``k_i`` targets; a target is one of

    ("v", j)   interior vertex j
    ("b", j)   boundary vertex j
    ("w", j)   white vertex j

and a v-degree ``deg[i]``.  Boundary and white vertices have no outgoing
edges by construction.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from typing import Iterable, Sequence

Target = tuple[str, int]

KINDS = ("v", "b", "w")


def _as_target(t) -> Target:
    kind, j = t
    if kind not in KINDS:
        raise ValueError(f"unknown target kind {kind!r}")
    return (str(kind), int(j))


@dataclass(frozen=True)
class AdmissibleGraph:
    n1: int
    m: int
    n_w: int
    k: tuple[int, ...]
    deg: tuple[int, ...]
    targets: tuple[tuple[Target, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "k", tuple(int(v) for v in self.k))
        object.__setattr__(self, "deg", tuple(int(v) for v in self.deg))
        object.__setattr__(
            self, "targets", tuple(tuple(_as_target(t) for t in ts) for ts in self.targets)
        )

    # -- edges --------------------------------------------------------------
    def edges(self) -> list[tuple[int, int, Target]]:
        """All edges in global order: (source, position, target)."""
        return [(i, pos, t) for i, ts in enumerate(self.targets) for pos, t in enumerate(ts)]

    def black_edges(self) -> list[tuple[int, int, Target]]:
        return [e for e in self.edges() if e[2][0] != "w"]

    def white_counts(self) -> tuple[int, ...]:
        return tuple(sum(1 for t in ts if t[0] == "w") for ts in self.targets)

    def r(self) -> tuple[int, ...]:
        """Zero-mode power per interior vertex: v-degree plus white targets."""
        return tuple(d + w for d, w in zip(self.deg, self.white_counts()))

    def is_disconnected(self, i: int) -> bool:
        """No edge starts or ends at interior vertex i."""
        if self.targets[i]:
            return False
        return not any(t == ("v", i) for ts in self.targets for t in ts)

    def form_degree_bound(self) -> int:
        """Largest total form degree the graph form can reach."""
        return len(self.black_edges()) + 2 * sum(1 for r in self.r() if r > 0)

    def config_dim(self) -> int:
        return 2 * self.n1 + self.m - 1

    # -- serialization ------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "n1": self.n1,
            "m": self.m,
            "n_w": self.n_w,
            "k": list(self.k),
            "deg": list(self.deg),
            "targets": [[list(t) for t in ts] for ts in self.targets],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "AdmissibleGraph":
        return cls(
            n1=int(data["n1"]),
            m=int(data["m"]),
            n_w=int(data["n_w"]),
            k=tuple(data["k"]),
            deg=tuple(data["deg"]),
            targets=tuple(tuple(tuple(t) for t in ts) for ts in data["targets"]),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def to_dot(self) -> str:
        lines = ["digraph G {"]
        for i in range(self.n1):
            lines.append(f'  v{i} [label="g{i + 1} deg={self.deg[i]}" shape=circle style=filled];')
        for j in range(self.m):
            lines.append(f'  b{j} [label="a{j}" shape=box];')
        for j in range(self.n_w):
            lines.append(f'  w{j} [label="" shape=circle];')
        for i, pos, (kind, j) in self.edges():
            lines.append(f'  v{i} -> {kind}{j} [label="{pos + 1}"];')
        lines.append("}")
        return "\n".join(lines)


def validate(g: AdmissibleGraph) -> list[str]:
    """Return the list of violated rules (empty when admissible)."""
    problems = []
    if len(g.k) != g.n1 or len(g.deg) != g.n1 or len(g.targets) != g.n1:
        problems.append("shape: k, deg and targets must have one entry per interior vertex")
        return problems
    if g.m < 1:
        problems.append("shape: the basepoint boundary vertex must exist (m >= 1)")
    if any(d < 0 for d in g.deg):
        problems.append("shape: negative v-degree")
    incoming_white = [0] * g.n_w
    for i, ts in enumerate(g.targets):
        if len(ts) != g.k[i]:
            problems.append(f"rule 1: vertex {i} has {len(ts)} edges, expected {g.k[i]}")
        for kind, j in ts:
            bound = {"v": g.n1, "b": g.m, "w": g.n_w}[kind]
            if not 0 <= j < bound:
                problems.append(f"range: target ({kind},{j}) of vertex {i} does not exist")
            elif kind == "w":
                incoming_white[j] += 1
        if ("v", i) in ts:
            problems.append(f"rule 4: self-loop at vertex {i}")
        if len(set(ts)) != len(ts):
            problems.append(f"rule 5: repeated edge from vertex {i}")
    for j, c in enumerate(incoming_white):
        if c != 1:
            problems.append(f"rule 3: white vertex {j} has {c} incoming edges")
    return problems


def is_valid(g: AdmissibleGraph) -> bool:
    return not validate(g)


def canonicalize(g: AdmissibleGraph) -> AdmissibleGraph:
    """Relabel whites so white j is hit by the j-th white edge in global order."""
    relabel: dict[int, int] = {}
    new_targets = []
    for ts in g.targets:
        row = []
        for kind, j in ts:
            if kind == "w":
                if j not in relabel:
                    relabel[j] = len(relabel)
                row.append(("w", relabel[j]))
            else:
                row.append((kind, j))
        new_targets.append(tuple(row))
    return AdmissibleGraph(g.n1, g.m, g.n_w, g.k, g.deg, tuple(new_targets))


def canonical_key(g: AdmissibleGraph) -> bytes:
    problems = validate(g)
    if problems:
        raise ValueError("invalid graph: " + "; ".join(problems))
    return canonicalize(g).to_json().encode()


def _row_choices(i: int, k: int, n1: int, m: int):
    """Ordered target lists for vertex i; 'W' marks a white target."""
    black = [("v", j) for j in range(n1) if j != i] + [("b", j) for j in range(m)]
    pool = black + [("W", -1)]
    for row in itertools.product(pool, repeat=k):
        blacks = [t for t in row if t[0] != "W"]
        if len(set(blacks)) == len(blacks):
            yield row


def _number_whites(rows) -> tuple[tuple[tuple[Target, ...], ...], int]:
    count = 0
    out = []
    for row in rows:
        new = []
        for t in row:
            if t[0] == "W":
                new.append(("w", count))
                count += 1
            else:
                new.append(t)
        out.append(tuple(new))
    return tuple(out), count


def enumerate_graphs(k: Sequence[int], m: int, max_deg: int = 0) -> list[AdmissibleGraph]:
    """One representative per class of admissible graphs, in canonical order."""
    if m < 1:
        raise ValueError("m counts the basepoint and must be >= 1")
    k = tuple(int(v) for v in k)
    if any(v < 0 for v in k):
        raise ValueError("negative out-degree")
    n1 = len(k)
    rows_per_vertex = [list(_row_choices(i, k[i], n1, m)) for i in range(n1)]
    out = []
    for rows in itertools.product(*rows_per_vertex):
        targets, n_w = _number_whites(rows)
        for deg in itertools.product(range(max_deg + 1), repeat=n1):
            out.append(AdmissibleGraph(n1, m, n_w, k, deg, targets))
    return out


def brute_force_classes(k: Sequence[int], m: int, max_deg: int = 0) -> set[str]:
    """Reference enumeration: all labeled-white graphs, deduplicated by
    minimizing over white permutations (independent of ``canonicalize``)."""
    k = tuple(k)
    n1 = len(k)
    total = sum(k)
    degs = list(itertools.product(range(max_deg + 1), repeat=n1))
    reps = set()
    for n_w in range(total + 1):
        pool = [("v", j) for j in range(n1)] + [("b", j) for j in range(m)] + [("w", j) for j in range(n_w)]
        rows = [list(itertools.product(pool, repeat=ki)) for ki in k]
        perms = list(itertools.permutations(range(n_w)))
        for choice in itertools.product(*rows):
            # v-degrees do not constrain targets, so validity is checked once
            if validate(AdmissibleGraph(n1, m, n_w, k, (0,) * n1, choice)):
                continue
            best = min(
                json.dumps([tuple(tuple(("w", perm[j]) if kind == "w" else (kind, j) for kind, j in ts)
                                  for ts in choice)])
                for perm in perms
            )
            for deg in degs:
                reps.add(json.dumps([n1, m, n_w, list(k), list(deg)]) + best)
    return reps


def edge_boundary(g: AdmissibleGraph, edge: tuple[int, int]) -> tuple[AdmissibleGraph, int]:
    """Redirect the black-to-black edge ``(source, position)`` to a new white
    vertex.  The sign is (-1)^j with j the 1-based position of the edge among
    the black-to-black edges in global order (the order of the product of
    propagators)."""
    src, pos = edge
    target = g.targets[src][pos]
    if target[0] == "w":
        raise ValueError("edge_boundary needs a black-to-black edge")
    black = [(i, p) for i, p, _t in g.black_edges()]
    j = black.index((src, pos)) + 1
    rows = [list(ts) for ts in g.targets]
    rows[src][pos] = ("w", g.n_w)
    new = AdmissibleGraph(g.n1, g.m, g.n_w + 1, g.k, g.deg, tuple(tuple(r) for r in rows))
    return canonicalize(new), (-1 if j % 2 else 1)


def relabel_interior(g: AdmissibleGraph, perm: Sequence[int]) -> tuple[AdmissibleGraph, int]:
    """Move interior vertex i to position perm[i].  Returns the relabeled
    graph and the sign of the induced reordering of black edges (the
    propagator product is taken in global edge order)."""
    perm = tuple(perm)
    if sorted(perm) != list(range(g.n1)):
        raise ValueError("perm must be a permutation of the interior vertices")
    rows: list = [None] * g.n1
    k = [0] * g.n1
    deg = [0] * g.n1
    for i, ts in enumerate(g.targets):
        rows[perm[i]] = tuple(("v", perm[j]) if kind == "v" else (kind, j) for kind, j in ts)
        k[perm[i]] = g.k[i]
        deg[perm[i]] = g.deg[i]
    new = AdmissibleGraph(g.n1, g.m, g.n_w, tuple(k), tuple(deg), tuple(rows))
    old_order = [(perm[i], pos) for i, pos, _t in g.black_edges()]
    new_order = [(i, pos) for i, pos, _t in new.black_edges()]
    idx = [new_order.index(e) for e in old_order]
    inv = sum(1 for a in range(len(idx)) for b in range(a + 1, len(idx)) if idx[a] > idx[b])
    return canonicalize(new), (-1 if inv & 1 else 1)


def edge_conservation(g: AdmissibleGraph) -> bool:
    return len(g.black_edges()) + g.n_w == sum(g.k)


def figure_graph(k_deg: int = 0, l_deg: int = 0) -> AdmissibleGraph:
    """Two interior vertices of out-degrees 2 and 3, three boundary vertices
    and one white vertex: g1 -> (a0, g2), g2 -> (a1, a2, white)."""
    return AdmissibleGraph(
        n1=2,
        m=3,
        n_w=1,
        k=(2, 3),
        deg=(k_deg, l_deg),
        targets=(
            (("b", 0), ("v", 1)),
            (("b", 1), ("b", 2), ("w", 0)),
        ),
    )


def graphs_from_iterable(items: Iterable[dict]) -> list[AdmissibleGraph]:
    return [AdmissibleGraph.from_dict(d) for d in items]
